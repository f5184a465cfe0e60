#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "tokenlab/config.hpp"
#include "tokenlab/diagnostics.hpp"
#include "tokenlab/trainer.hpp"

namespace tokenlab {

struct TrainSummary {
    int steps = 0;
    double baseline_mean_reward = 0.0;
    double final_mean_reward = 0.0;  // mean reward over the last <= 10 steps
    std::string log_path;
    std::string checkpoint_path;
    std::string config_path;
};

// Writes resolved_config.cfg, train_log.csv (row per step, flushed as it
// goes), interval checkpoints and checkpoint_final.bin under out_dir.
TrainSummary cmd_train(const RunConfig& cfg, const std::string& out_dir);

// Loads a checkpoint and emits the analysis CSVs: update_report.csv,
// selective_g1..4.csv, direction_naive.csv, direction_reweight.csv.
void cmd_diagnose(const RunConfig& cfg, const std::string& checkpoint_path, const std::string& out_dir);

// Randomized bound certification rows plus the two tightness constructions.
// Returns the number of violated non-flagged rows (0 means certified).
int cmd_verify_bounds(int trials, uint64_t seed, const std::string& csv_path);

// which: mask_high | lopti_reversed | alpha_sweep | eta_sweep. Repeats the
// training run over a variant matrix with a shared seed set and writes
// comparison.csv with paired baseline/final rewards.
void cmd_ablate(const RunConfig& cfg, const std::string& which, const std::string& out_dir);

// First line of every emitted CSV; readers reject anything else.
std::string csv_schema_line(const std::string& name);
void require_schema(std::istream& in, const std::string& name);

struct TrainLogRow {
    int step = 0;
    double mean_reward = 0, objective = 0, grad_norm = 0, clip_frac = 0, kl = 0, wall_ms = 0;
};
std::vector<TrainLogRow> read_train_log(const std::string& path);

}  // namespace tokenlab
