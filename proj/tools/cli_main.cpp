// Command-line front end. Everything goes through the public C interface;
// this file never touches the C++ core directly.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tokenlab.h"

namespace {

struct ConfigDeleter {
    void operator()(tl_config* c) const { tl_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<tl_config, ConfigDeleter>;

int die(tl_status s) {
    std::fprintf(stderr, "error: %s\n", tl_last_error());
    return static_cast<int>(s);
}

std::string default_out(const std::string& leaf) {
    const char* root = std::getenv("TOKENLAB_OUT");
    return (root && *root ? std::string(root) : std::string("tokenlab_out")) + "/" + leaf;
}

// Shared per-subcommand options resolved into a ready config.
struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string variant;
    int64_t seed = -1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key=value lines)")
            ->check(CLI::ExistingFile);
        cmd->add_option("--override", overrides, "extra key=value settings, applied in order")
            ->type_name("KEY=VALUE");
        cmd->add_option("--seed", seed, "run seed (shorthand for --override run.seed=...)");
        cmd->add_option("--variant", variant, "algorithm variant")
            ->check(CLI::IsMember({"naive", "reweight", "lopti", "reweight+lopti"}));
    }

    tl_status build(ConfigPtr& out) const {
        out.reset(tl_config_create());
        if (!out) return TL_ERR_INTERNAL;
        tl_status s = TL_OK;
        if (!config_path.empty() && (s = tl_config_load(out.get(), config_path.c_str())) != TL_OK)
            return s;
        for (const std::string& ov : overrides) {
            const auto eq = ov.find('=');
            if (eq == std::string::npos || eq == 0) {
                std::fprintf(stderr, "error: override must look like key=value: %s\n", ov.c_str());
                return TL_ERR_INVALID_ARGUMENT;
            }
            s = tl_config_set(out.get(), ov.substr(0, eq).c_str(), ov.substr(eq + 1).c_str());
            if (s != TL_OK) return s;
        }
        if (seed >= 0) {
            const std::string v = std::to_string(seed);
            if ((s = tl_config_set(out.get(), "run.seed", v.c_str())) != TL_OK) return s;
        }
        if (!variant.empty()) {
            const bool rw = variant == "reweight" || variant == "reweight+lopti";
            const bool lp = variant == "lopti" || variant == "reweight+lopti";
            if ((s = tl_config_set(out.get(), "trainer.reweight", rw ? "1" : "0")) != TL_OK) return s;
            if ((s = tl_config_set(out.get(), "trainer.lopti_order", lp ? "low_first" : "off")) != TL_OK)
                return s;
        }
        return TL_OK;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"token-level policy-gradient lab"};
    app.require_subcommand(1);

    CommonOpts train_opts;
    std::string train_out = default_out("train");
    CLI::App* train = app.add_subcommand("train", "run the training loop and log per-step metrics");
    train_opts.attach(train);
    train->add_option("--out", train_out, "output directory");

    CommonOpts diag_opts;
    std::string diag_out = default_out("diagnose");
    std::string checkpoint;
    CLI::App* diag = app.add_subcommand("diagnose", "per-quartile update analysis of a checkpoint");
    diag_opts.attach(diag);
    diag->add_option("--checkpoint", checkpoint, "policy checkpoint to analyze")
        ->required()
        ->check(CLI::ExistingFile);
    diag->add_option("--out", diag_out, "output directory");

    int trials = 1000;
    uint64_t bounds_seed = 1;
    std::string bounds_csv = default_out("bounds") + "/bound_report.csv";
    CLI::App* bounds =
        app.add_subcommand("verify-bounds", "certify gradient-norm bounds on randomized nets");
    bounds->add_option("--trials", trials, "number of randomized trials")->check(CLI::NonNegativeNumber);
    bounds->add_option("--seed", bounds_seed, "trial stream seed");
    bounds->add_option("--csv", bounds_csv, "where to write the row-per-trial report");

    CommonOpts abl_opts;
    std::string abl_out = default_out("ablate");
    std::string which;
    CLI::App* abl = app.add_subcommand("ablate", "re-run training over a variant matrix");
    abl_opts.attach(abl);
    abl->add_option("--which", which, "mask_high | lopti_reversed | alpha_sweep | eta_sweep")->required();
    abl->add_option("--out", abl_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) {
        ConfigPtr cfg;
        tl_status s = train_opts.build(cfg);
        if (s != TL_OK) return die(s);
        tl_train_summary summary{};
        if ((s = tl_train(cfg.get(), train_out.c_str(), &summary)) != TL_OK) return die(s);
        std::printf("steps: %d\nbaseline_reward: %.6f\nfinal_reward: %.6f\nout: %s\n", summary.steps,
                    summary.baseline_mean_reward, summary.final_mean_reward, train_out.c_str());
        return 0;
    }
    if (diag->parsed()) {
        ConfigPtr cfg;
        tl_status s = diag_opts.build(cfg);
        if (s != TL_OK) return die(s);
        if ((s = tl_diagnose(cfg.get(), checkpoint.c_str(), diag_out.c_str())) != TL_OK) return die(s);
        std::printf("out: %s\n", diag_out.c_str());
        return 0;
    }
    if (bounds->parsed()) {
        int violations = -1;
        const tl_status s =
            tl_verify_bounds(trials, bounds_seed, bounds_csv.empty() ? nullptr : bounds_csv.c_str(),
                             &violations);
        if (s != TL_OK) return die(s);
        std::printf("trials: %d\nviolations: %d\nreport: %s\n", trials, violations, bounds_csv.c_str());
        return violations == 0 ? 0 : 1;
    }
    if (abl->parsed()) {
        ConfigPtr cfg;
        tl_status s = abl_opts.build(cfg);
        if (s != TL_OK) return die(s);
        if ((s = tl_ablate(cfg.get(), which.c_str(), abl_out.c_str())) != TL_OK) return die(s);
        std::printf("out: %s\n", abl_out.c_str());
        return 0;
    }
    return 0;
}
