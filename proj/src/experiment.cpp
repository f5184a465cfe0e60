#include "tokenlab/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tokenlab/rng.hpp"
#include "tokenlab/stats.hpp"

namespace fs = std::filesystem;

namespace tokenlab {

namespace {

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);  // binary: byte-stable newlines
    if (!out) throw std::runtime_error("cannot open for writing: " + p.string());
    return out;
}

void write_quartile_csv(const fs::path& p, const QuartileReport& rep) {
    auto out = open_out(p);
    out << csv_schema_line("quartile_report") << "\n";
    out << "# boundaries: p25=" << g17(rep.p25) << " p50=" << g17(rep.p50) << " p75=" << g17(rep.p75)
        << "\n";
    out << "quartile,count,mean_adv,grad_norm,dpi_mean,dpi_p5,dpi_p95\n";
    for (const QuartileRow& r : rep.rows) {
        out << r.quartile << "," << r.count << "," << g17(r.mean_adv) << "," << g17(r.grad_norm) << ","
            << g17(r.dpi_mean) << "," << g17(r.dpi_p5) << "," << g17(r.dpi_p95) << "\n";
    }
}

void write_direction_csv(const fs::path& p, const DirectionBuckets& d) {
    auto out = open_out(p);
    out << csv_schema_line("direction_report") << "\n";
    out << "bucket,lo,hi,count,ratio,present\n";
    const size_t nb = d.count.size();
    for (size_t b = 0; b < nb; ++b) {
        const double lo = b == 0 ? 0.0 : d.edges[b - 1];
        const double hi = b < d.edges.size() ? d.edges[b] : 1.0;
        out << b << "," << g17(lo) << "," << g17(hi) << "," << d.count[b] << ","
            << (d.present[b] ? g17(d.ratio[b]) : std::string("nan")) << "," << (d.present[b] ? 1 : 0)
            << "\n";
    }
}

void write_bound_row(std::ofstream& out, const BoundRow& r) {
    out << r.token << "," << r.layer << "," << g17(r.pi) << "," << g17(r.w) << "," << g17(r.lower) << ","
        << g17(r.actual) << "," << g17(r.upper) << "," << (r.flagged ? 1 : 0) << "\n";
}

// One full-batch SGD step with the KL term off, on a copy. The shared
// instrument behind the direction reports.
PolicyNet single_sgd_copy(const RolloutBatch& batch, const PolicyNet& net, TrainerConfig cfg, double lr) {
    cfg.beta = 0.0;
    cfg.optimizer = OptimizerKind::sgd;
    cfg.lr = lr;
    cfg.epochs = 1;
    cfg.minibatch_responses = 0;
    cfg.lopti_order = LoptiOrder::off;
    PolicyNet out = net;
    Optimizer opt(cfg.optimizer, cfg, out);
    RolloutBatch work = batch;
    grpo_step(work, out, opt, cfg, UpdateContext{0, 0});
    return out;
}

// vocab >= chain end, hidden widths nonincreasing, context*embed >= first
// hidden: every Jacobian in the chain has at least as many columns as rows,
// so the lower bound stays in force.
PolicyDims contracting_dims(Rng& rng) {
    PolicyDims d;
    d.vocab = 4 + rng.uniform_int(0, 20);
    const int layers = 1 + rng.uniform_int(0, 1);
    const int h_last = d.vocab + rng.uniform_int(0, 10);
    const int h_first = layers == 2 ? h_last + rng.uniform_int(0, 10) : h_last;
    d.hidden = layers == 2 ? std::vector<int>{h_first, h_last} : std::vector<int>{h_last};
    d.context = 2 + rng.uniform_int(0, 2);
    d.embed = (h_first + d.context - 1) / d.context + rng.uniform_int(0, 3);
    return d;
}

// Head wider than the last hidden layer: the widening Jacobian voids the
// lower bound and the row must come back flagged.
PolicyDims widening_dims(Rng& rng) {
    PolicyDims d;
    d.vocab = 12 + rng.uniform_int(0, 12);
    const int h = std::max(2, d.vocab / 2);
    d.hidden = {h};
    d.context = 2 + rng.uniform_int(0, 2);
    d.embed = (h + d.context - 1) / d.context + rng.uniform_int(0, 2);
    return d;
}

}  // namespace

std::string csv_schema_line(const std::string& name) { return "# schema: tokenlab." + name + " v1"; }

void require_schema(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv, expected schema " + name);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != csv_schema_line(name))
        throw std::runtime_error("schema mismatch: got \"" + line + "\", expected \"" +
                                 csv_schema_line(name) + "\"");
}

std::vector<TrainLogRow> read_train_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    require_schema(in, "train_log");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("missing header in " + path);
    std::vector<TrainLogRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        std::array<double, 7> v{};
        for (int i = 0; i < 7; ++i) {
            if (!std::getline(ls, field, ',')) throw std::runtime_error("short row in " + path);
            v[i] = std::stod(field);
        }
        rows.push_back({static_cast<int>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6]});
    }
    return rows;
}

TrainSummary cmd_train(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const fs::path root(out_dir);

    TrainSummary summary;
    summary.config_path = (root / "resolved_config.cfg").string();
    {
        auto out = open_out(summary.config_path);
        out << serialize(cfg);
    }

    summary.log_path = (root / "train_log.csv").string();
    auto log = open_out(summary.log_path);
    log << csv_schema_line("train_log") << "\n";
    log << "step,mean_reward,objective,grad_norm,clip_frac,kl,wall_ms\n";
    log.flush();

    TrainHooks hooks;
    hooks.on_step = [&](int step, const StepMetrics& m) {
        log << step << "," << g17(m.mean_reward) << "," << g17(m.objective) << "," << g17(m.grad_norm)
            << "," << g17(m.clip_frac) << "," << g17(m.kl) << "," << g17(m.wall_ms) << "\n";
        log.flush();
    };
    hooks.on_checkpoint = [&](int step, const PolicyNet& net) {
        char name[64];
        std::snprintf(name, sizeof name, "checkpoint_step%d.bin", step);
        net.save((root / name).string());
    };

    PolicyNet net(cfg.dims, cfg.seed);
    const TrainResult res = train(cfg, net, hooks);

    summary.checkpoint_path = (root / "checkpoint_final.bin").string();
    net.save(summary.checkpoint_path);

    summary.steps = static_cast<int>(res.log.size());
    summary.baseline_mean_reward = res.baseline_mean_reward;
    const int tail = std::min<int>(10, summary.steps);
    if (tail > 0) {
        double acc = 0;
        for (int i = summary.steps - tail; i < summary.steps; ++i) acc += res.log[i].mean_reward;
        summary.final_mean_reward = acc / tail;
    }
    return summary;
}

void cmd_diagnose(const RunConfig& cfg, const std::string& checkpoint_path, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const fs::path root(out_dir);

    PolicyNet net = PolicyNet::load(checkpoint_path);
    if (!(net.dims() == cfg.dims))
        throw std::invalid_argument("checkpoint dims do not match the configured policy dims");

    // The checkpoint serves as its own reference: the KL estimate is exactly
    // zero and nothing downstream shifts.
    RolloutBatch batch = rollout(cfg, net, net, 0);
    assign_advantages(batch, cfg.trainer);

    write_quartile_csv(root / "update_report.csv", update_quartile_report(batch, net, cfg.trainer));
    for (int g = 1; g <= 4; ++g) {
        char name[32];
        std::snprintf(name, sizeof name, "selective_g%d.csv", g);
        write_quartile_csv(root / name, selective_update_experiment(batch, net, g, cfg.trainer));
    }

    // Direction reports compare a plain step against a reweighted step built
    // from the same raw advantages.
    RolloutBatch naive = batch;
    for (TokenRecord* t : flat_tokens(naive)) t->advantage = t->advantage_raw;
    RolloutBatch shaped = batch;
    for (TokenRecord* t : flat_tokens(shaped)) {
        const double weight = cfg.trainer.alpha * t->old_prob + (1.0 - cfg.trainer.alpha);
        t->advantage = weight * t->advantage_raw;
    }
    const auto tokens = flat_tokens(static_cast<const RolloutBatch&>(batch));
    const PolicyNet after_naive = single_sgd_copy(naive, net, cfg.trainer, 1e-3);
    const PolicyNet after_shaped = single_sgd_copy(shaped, net, cfg.trainer, 1e-3);
    write_direction_csv(root / "direction_naive.csv", correct_direction_ratio(net, after_naive, tokens));
    write_direction_csv(root / "direction_reweight.csv",
                        correct_direction_ratio(net, after_shaped, tokens));
}

int cmd_verify_bounds(int trials, uint64_t seed, const std::string& csv_path) {
    if (trials < 0) throw std::invalid_argument("trials must be >= 0");
    if (!csv_path.empty()) fs::create_directories(fs::path(csv_path).parent_path().empty()
                                                      ? fs::path(".")
                                                      : fs::path(csv_path).parent_path());
    std::ofstream out;
    if (!csv_path.empty()) {
        out = open_out(csv_path);
        out << csv_schema_line("bound_report") << "\n";
        out << "token,layer,pi,w,lower,actual,upper,flagged\n";
    }

    int violations = 0;
    const double slack = 1e-9;

    // Equality witnesses first: the uniform tail must sit on the lower bound,
    // the two-token tail on the upper bound, both to 1e-10.
    {
        const BoundRow lo = tightness_uniform_tail(32, 0.37, 1.25);
        if (std::abs(lo.actual - lo.lower) > 1e-10 || lo.flagged) ++violations;
        if (out) write_bound_row(out, lo);
        const BoundRow hi = tightness_two_hot(32, 0.37, 1.25);
        if (std::abs(hi.actual - hi.upper) > 1e-10 || hi.flagged) ++violations;
        if (out) write_bound_row(out, hi);
    }

    for (int i = 0; i < trials; ++i) {
        Rng rng = Rng::derive(seed, "bounds", static_cast<uint64_t>(i));
        const bool widen = i % 101 == 53;       // widening layer, flag path
        const bool kill_row = i % 97 == 29;     // zeroed weight row, sigma_min = 0
        const PolicyDims dims = widen ? widening_dims(rng) : contracting_dims(rng);
        PolicyNet net(dims, rng.next_u64(), rng.uniform(0.5, 6.0));
        if (kill_row) {
            Tensor& w1 = net.params()[1];  // first trunk weight
            for (int c = 0; c < w1.cols(); ++c) w1(0, c) = 0.0;
        }

        TokenRecord rec;
        rec.context.resize(dims.context);
        for (int& id : rec.context) id = rng.uniform_int(0, dims.vocab - 1);
        rec.token = rng.uniform_int(0, dims.vocab - 1);

        const double mag = rng.uniform(0.1, 2.0);
        const double w = rng.uniform01() < 0.5 ? -mag : mag;
        const int top = bound_layer_count(net) - 1;
        // Flag paths need the offending Jacobian inside the product, so those
        // trials pin the layer below it.
        const int layer = (widen || kill_row) ? 0 : rng.uniform_int(0, top);

        const BoundRow row = bound_sandwich_row(net, rec, layer, w);
        if (!row.flagged) {
            if (row.actual < row.lower - slack || row.actual > row.upper + slack) ++violations;
        }
        if (out) write_bound_row(out, row);
    }
    if (out) out.flush();
    return violations;
}

void cmd_ablate(const RunConfig& cfg, const std::string& which, const std::string& out_dir) {
    struct Variant {
        std::string name;
        std::function<void(TrainerConfig&)> tweak;
    };
    std::vector<Variant> variants;
    if (which == "mask_high") {
        variants.push_back({"naive", [](TrainerConfig&) {}});
        variants.push_back({"mask_high", [](TrainerConfig& t) { t.mask_high_ablation = true; }});
    } else if (which == "lopti_reversed") {
        variants.push_back({"lopti_low_first", [](TrainerConfig& t) { t.lopti_order = LoptiOrder::low_first; }});
        variants.push_back(
            {"lopti_high_first", [](TrainerConfig& t) { t.lopti_order = LoptiOrder::high_first; }});
    } else if (which == "alpha_sweep") {
        for (double a : {0.0, 0.1, 0.2, 0.3, 0.5, 1.0}) {
            char name[32];
            std::snprintf(name, sizeof name, "alpha_%g", a);
            variants.push_back({name, [a](TrainerConfig& t) {
                                    t.reweight_on = true;
                                    t.alpha = a;
                                }});
        }
    } else if (which == "eta_sweep") {
        for (double e : {0.3, 0.5, 0.7}) {
            char name[32];
            std::snprintf(name, sizeof name, "eta_%g", e);
            variants.push_back({name, [e](TrainerConfig& t) {
                                    t.lopti_order = LoptiOrder::low_first;
                                    t.eta = e;
                                }});
        }
    } else {
        throw std::invalid_argument("unknown ablation: " + which +
                                    " (expected mask_high, lopti_reversed, alpha_sweep or eta_sweep)");
    }

    fs::create_directories(out_dir);
    auto out = open_out(fs::path(out_dir) / "comparison.csv");
    out << csv_schema_line("ablation_report") << "\n";
    out << "variant,seed,baseline_reward,final_reward\n";

    for (const Variant& v : variants) {
        for (uint64_t ds = 0; ds < 3; ++ds) {
            RunConfig rc = cfg;
            rc.seed = cfg.seed + ds;
            rc.checkpoint_interval = 0;
            v.tweak(rc.trainer);
            validate(rc.trainer);
            PolicyNet net(rc.dims, rc.seed);
            const TrainResult res = train(rc, net);
            const int n = static_cast<int>(res.log.size());
            const int tail = std::min(10, n);
            double fin = 0;
            for (int i = n - tail; i < n; ++i) fin += res.log[i].mean_reward;
            if (tail > 0) fin /= tail;
            out << v.name << "," << rc.seed << "," << g17(res.baseline_mean_reward) << "," << g17(fin)
                << "\n";
            out.flush();
        }
    }
}

}  // namespace tokenlab
