#include "tokenlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tokenlab/stats.hpp"
#include "tokenlab/svd.hpp"

namespace tokenlab {

QuartileGroups quartile_groups(std::span<const double> old_probs) {
    if (old_probs.empty()) throw std::invalid_argument("quartile_groups: empty batch");
    QuartileGroups q;
    std::vector<double> xs(old_probs.begin(), old_probs.end());
    q.p25 = stats::percentile(xs, 25.0);
    q.p50 = stats::percentile(xs, 50.0);
    q.p75 = stats::percentile(xs, 75.0);
    for (int i = 0; i < static_cast<int>(old_probs.size()); ++i) {
        const double p = old_probs[static_cast<size_t>(i)];
        if (p <= q.p25) q.idx[0].push_back(i);
        else if (p <= q.p50) q.idx[1].push_back(i);
        else if (p <= q.p75) q.idx[2].push_back(i);
        else q.idx[3].push_back(i);
    }
    return q;
}

std::vector<double> probability_shift(const PolicyNet& before, const PolicyNet& after,
                                      std::span<const TokenRecord* const> records) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const TokenRecord* rec : records)
        out.push_back(after.prob_of(rec->context, rec->token) - before.prob_of(rec->context, rec->token));
    return out;
}

ShiftSummary summarize_shifts(std::span<const double> shifts) {
    ShiftSummary s;
    if (shifts.empty()) return s;
    std::vector<double> xs(shifts.begin(), shifts.end());
    const size_t drop = static_cast<size_t>(std::floor(0.01 * static_cast<double>(xs.size())));
    if (drop > 0) {
        std::sort(xs.begin(), xs.end(), [](double a, double b) { return std::fabs(a) < std::fabs(b); });
        xs.resize(xs.size() - drop);
    }
    s.used = static_cast<int>(xs.size());
    s.mean = stats::mean(xs);
    s.p5 = stats::percentile(xs, 5.0);
    s.p95 = stats::percentile(xs, 95.0);
    return s;
}

namespace {

std::vector<double> collect_old_probs(std::span<const TokenRecord* const> toks) {
    std::vector<double> probs;
    probs.reserve(toks.size());
    for (const TokenRecord* t : toks) probs.push_back(t->old_prob);
    return probs;
}

double quartile_loss_grad_norm(const PolicyNet& net, std::span<const TokenRecord* const> toks,
                               const TrainerConfig& cfg) {
    if (toks.empty()) return 0.0;
    Tape tape;
    const PolicyNet::TapeBinding binding = net.bind(tape);
    const LossNodes ln = cfg.algorithm == Algorithm::rpp ? rpp_loss(tape, net, binding, toks, cfg)
                                                         : surrogate_loss(tape, net, binding, toks, cfg);
    GradientView gv = tape.backward(ln.total);
    double s2 = 0.0;
    for (Tape::NodeId pid : binding.param_ids)
        if (gv.has(pid)) {
            const double n = gv.grad(pid).norm();
            s2 += n * n;
        }
    return std::sqrt(s2);
}

}  // namespace

std::array<double, 4> grad_norm_by_group(const RolloutBatch& batch, const PolicyNet& net,
                                         const TrainerConfig& cfg, bool sum_mode) {
    const std::vector<const TokenRecord*> toks = flat_tokens(batch);
    if (toks.empty()) throw std::invalid_argument("grad_norm_by_group: empty batch");
    const QuartileGroups q = quartile_groups(collect_old_probs(toks));
    std::array<double, 4> out{};
    for (int g = 0; g < 4; ++g) {
        std::vector<const TokenRecord*> sel;
        for (int i : q.idx[static_cast<size_t>(g)]) sel.push_back(toks[static_cast<size_t>(i)]);
        double n = quartile_loss_grad_norm(net, sel, cfg);
        if (sum_mode) n *= static_cast<double>(sel.size());
        out[static_cast<size_t>(g)] = n;
    }
    return out;
}

namespace {

// group 0 keeps every advantage; 1..4 zero everything outside that quartile.
QuartileReport run_quartile_update(const RolloutBatch& batch, const PolicyNet& net, int group,
                                   const TrainerConfig& cfg, double lr) {
    RolloutBatch work = batch;  // advantages get masked on the copy
    std::vector<TokenRecord*> toks = flat_tokens(work);
    if (toks.empty()) throw std::invalid_argument("quartile update: empty batch");
    std::vector<const TokenRecord*> ctoks(toks.begin(), toks.end());

    const QuartileGroups q = quartile_groups(collect_old_probs(ctoks));
    std::vector<double> original_adv(toks.size());
    for (size_t i = 0; i < toks.size(); ++i) original_adv[i] = toks[i]->advantage;
    if (group > 0) {
        std::vector<uint8_t> in_group(toks.size(), 0);
        for (int i : q.idx[static_cast<size_t>(group - 1)]) in_group[static_cast<size_t>(i)] = 1;
        for (size_t i = 0; i < toks.size(); ++i)
            if (!in_group[i]) toks[i]->advantage = 0.0;
    }

    // The isolation premise needs the KL term off: with it on, every token
    // would pull parameters regardless of masking.
    TrainerConfig scfg = cfg;
    scfg.beta = 0.0;
    scfg.optimizer = OptimizerKind::sgd;
    scfg.lr = lr;

    PolicyNet after = net;
    Optimizer opt(OptimizerKind::sgd, scfg, after);
    {
        Tape tape;
        const PolicyNet::TapeBinding binding = after.bind(tape);
        const LossNodes ln = scfg.algorithm == Algorithm::rpp
                                 ? rpp_loss(tape, after, binding, ctoks, scfg)
                                 : surrogate_loss(tape, after, binding, ctoks, scfg);
        GradientView gv = tape.backward(tape.scale(ln.total, -1.0));
        std::vector<Tensor> grads;
        for (Tape::NodeId pid : binding.param_ids) grads.push_back(gv.grad_or_zero(pid));
        opt.apply(after, grads);
    }

    const std::vector<double> dpi = probability_shift(net, after, ctoks);

    QuartileReport report;
    report.p25 = q.p25;
    report.p50 = q.p50;
    report.p75 = q.p75;
    for (int g = 0; g < 4; ++g) {
        QuartileRow& row = report.rows[static_cast<size_t>(g)];
        row.quartile = g + 1;
        const std::vector<int>& members = q.idx[static_cast<size_t>(g)];
        row.count = static_cast<int>(members.size());
        if (members.empty()) continue;
        std::vector<double> adv, shifts;
        std::vector<const TokenRecord*> sel;
        for (int i : members) {
            adv.push_back(original_adv[static_cast<size_t>(i)]);
            shifts.push_back(dpi[static_cast<size_t>(i)]);
            sel.push_back(ctoks[static_cast<size_t>(i)]);
        }
        row.mean_adv = stats::mean(adv);
        // Norm of the group-restricted loss gradient at the pre-update point,
        // on the original advantages.
        std::vector<TokenRecord> sel_restored(sel.size());
        for (size_t i = 0; i < sel.size(); ++i) {
            sel_restored[i] = *sel[i];
            sel_restored[i].advantage = adv[i];
        }
        std::vector<const TokenRecord*> selp;
        for (const TokenRecord& r : sel_restored) selp.push_back(&r);
        row.grad_norm = quartile_loss_grad_norm(net, selp, scfg);
        const ShiftSummary s = summarize_shifts(shifts);
        row.dpi_mean = s.mean;
        row.dpi_p5 = s.p5;
        row.dpi_p95 = s.p95;
    }
    return report;
}

}  // namespace

QuartileReport selective_update_experiment(const RolloutBatch& batch, const PolicyNet& net, int group,
                                           const TrainerConfig& cfg, double lr) {
    if (group < 1 || group > 4) throw std::invalid_argument("selective_update_experiment: group must be 1..4");
    return run_quartile_update(batch, net, group, cfg, lr);
}

QuartileReport update_quartile_report(const RolloutBatch& batch, const PolicyNet& net,
                                      const TrainerConfig& cfg, double lr) {
    return run_quartile_update(batch, net, 0, cfg, lr);
}

DirectionBuckets correct_direction_ratio(const PolicyNet& before, const PolicyNet& after,
                                         std::span<const TokenRecord* const> records,
                                         std::vector<double> edges) {
    for (size_t i = 0; i + 1 < edges.size(); ++i)
        if (!(edges[i] < edges[i + 1])) throw std::invalid_argument("correct_direction_ratio: edges not increasing");
    DirectionBuckets out;
    out.edges = edges;
    const size_t nb = edges.size() + 1;
    out.count.assign(nb, 0);
    out.ratio.assign(nb, 0.0);
    out.present.assign(nb, false);
    std::vector<int> up(nb, 0);
    const std::vector<double> dpi = probability_shift(before, after, records);
    for (size_t i = 0; i < records.size(); ++i) {
        if (!(records[i]->advantage > 0.0)) continue;
        const double p = records[i]->old_prob;
        size_t b = 0;
        while (b < edges.size() && p > edges[b]) ++b;
        ++out.count[b];
        if (dpi[i] > 0.0) ++up[b];
    }
    for (size_t b = 0; b < nb; ++b) {
        if (out.count[b] == 0) continue;
        out.present[b] = true;
        out.ratio[b] = static_cast<double>(up[b]) / static_cast<double>(out.count[b]);
    }
    return out;
}

int bound_layer_count(const PolicyNet& net) { return static_cast<int>(net.dims().hidden.size()) + 2; }

BoundRow bound_sandwich_row(const PolicyNet& net, const TokenRecord& record, int layer, double w) {
    const int n_act = bound_layer_count(net);
    if (layer < 0 || layer >= n_act) throw std::invalid_argument("bound_sandwich_row: layer out of range");
    const int n = net.dims().vocab;
    Tape tape;
    const PolicyNet::TapeBinding binding = net.bind(tape);
    const PolicyNet::TokenNodes tn = net.forward_on_tape(tape, binding, record.context, record.token);
    const Tape::NodeId loss = tape.scale(tn.logp, w);
    GradientView gv = tape.backward(loss);
    const Tensor delta = gv.grad_or_zero(tn.activations[static_cast<size_t>(layer)]);

    BoundRow row;
    row.token = record.token;
    row.layer = layer;
    row.w = w;
    row.pi = std::exp(tape.value(tn.logp).value());
    row.actual = delta.norm();
    const double base = std::fabs(w) * (1.0 - row.pi);
    row.lower = base * std::sqrt(static_cast<double>(n) / static_cast<double>(n - 1));
    row.upper = base * std::sqrt(2.0);
    for (int j = layer + 1; j < n_act; ++j) {
        const Tensor jac = tape.layer_jacobian(tn.activations[static_cast<size_t>(j)],
                                               tn.activations[static_cast<size_t>(j - 1)]);
        const SingularExtremes se = singular_extremes(jac);
        // A widening layer has a null space in the transposed map, so no
        // positive lower constant exists; near-zero sigma_min is flagged too.
        double c = se.sigma_min;
        if (jac.rows() > jac.cols()) c = 0.0;
        if (c < 1e-10) row.flagged = true;
        row.lower *= c;
        row.upper *= se.sigma_max;
    }
    return row;
}

namespace {

BoundRow tightness_row(int vocab, const Tensor& logits, double w) {
    PolicyDims dims;
    dims.vocab = vocab;
    dims.embed = 1;
    dims.context = 1;
    dims.hidden = {2};
    PolicyNet net = PolicyNet::zeros(dims);
    net.params().back() = logits;  // head bias carries the crafted logits
    TokenRecord rec;
    rec.context = {0};
    rec.token = 0;
    return bound_sandwich_row(net, rec, bound_layer_count(net) - 1, w);
}

}  // namespace

BoundRow tightness_uniform_tail(int vocab, double pi, double w) {
    if (vocab < 2) throw std::invalid_argument("tightness_uniform_tail: vocab must be >= 2");
    if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("tightness_uniform_tail: pi must be in (0, 1)");
    Tensor logits = Tensor::vec(vocab);
    logits[0] = std::log(pi / (1.0 - pi) * static_cast<double>(vocab - 1));
    return tightness_row(vocab, logits, w);
}

BoundRow tightness_two_hot(int vocab, double pi, double w) {
    if (vocab < 2) throw std::invalid_argument("tightness_two_hot: vocab must be >= 2");
    if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("tightness_two_hot: pi must be in (0, 1)");
    Tensor logits = Tensor::vec(vocab);
    logits[0] = std::log(pi / (1.0 - pi));
    for (int i = 2; i < vocab; ++i) logits[i] = -40.0;
    return tightness_row(vocab, logits, w);
}

}  // namespace tokenlab
