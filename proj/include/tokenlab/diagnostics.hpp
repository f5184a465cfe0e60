#pragma once

#include <array>
#include <span>
#include <vector>

#include "tokenlab/policy.hpp"
#include "tokenlab/trainer.hpp"

namespace tokenlab {

// Quartile membership by old probability. Boundaries are nearest-rank 25/50/75
// percentiles; values exactly on a boundary go to the lower quartile.
struct QuartileGroups {
    std::array<std::vector<int>, 4> idx;
    double p25 = 0.0, p50 = 0.0, p75 = 0.0;
};

QuartileGroups quartile_groups(std::span<const double> old_probs);

// Exact re-evaluation of each record's token probability under two parameter
// sets; no sampling involved.
std::vector<double> probability_shift(const PolicyNet& before, const PolicyNet& after,
                                      std::span<const TokenRecord* const> records);

// Summary with the largest floor(1%) of |shifts| excluded.
struct ShiftSummary {
    double mean = 0.0, p5 = 0.0, p95 = 0.0;
    int used = 0;
};

ShiftSummary summarize_shifts(std::span<const double> shifts);

struct QuartileRow {
    int quartile = 0;  // 1..4
    int count = 0;
    double mean_adv = 0.0;
    double grad_norm = 0.0;
    double dpi_mean = 0.0, dpi_p5 = 0.0, dpi_p95 = 0.0;
};

struct QuartileReport {
    double p25 = 0.0, p50 = 0.0, p75 = 0.0;
    std::array<QuartileRow, 4> rows;
};

// Norm of the parameter gradient of the quartile-restricted mean objective,
// one value per quartile (sum_mode scales each by the quartile's token count).
std::array<double, 4> grad_norm_by_group(const RolloutBatch& batch, const PolicyNet& net,
                                         const TrainerConfig& cfg, bool sum_mode = false);

// Clone the net, zero every advantage outside the chosen quartile (1..4),
// take one SGD step on the full-batch objective with the KL term off, and
// report per-quartile probability shifts. Cross-quartile shifts measure
// update interference.
QuartileReport selective_update_experiment(const RolloutBatch& batch, const PolicyNet& net, int group,
                                           const TrainerConfig& cfg, double lr = 1e-3);

// Same single-SGD-step report without any masking: every token keeps its
// advantage.
QuartileReport update_quartile_report(const RolloutBatch& batch, const PolicyNet& net,
                                      const TrainerConfig& cfg, double lr = 1e-3);

// Among positive-advantage tokens, the fraction whose probability strictly
// increased, bucketed by old probability. A bucket with no positive tokens is
// marked absent rather than zero.
struct DirectionBuckets {
    std::vector<double> edges;  // bucket b covers (edges[b-1], edges[b]]
    std::vector<int> count;
    std::vector<double> ratio;
    std::vector<bool> present;
};

DirectionBuckets correct_direction_ratio(const PolicyNet& before, const PolicyNet& after,
                                         std::span<const TokenRecord* const> records,
                                         std::vector<double> edges = {0.25, 0.5, 0.75});

// One certified gradient-norm sandwich for the loss w * log pi(token):
// prod(c_j) * |w| * sqrt(N/(N-1)) * (1-pi) <= ||delta_layer|| <=
// prod(d_j) * |w| * sqrt(2) * (1-pi), with c_j/d_j the extreme singular
// values of the layer Jacobians above `layer`. Rows where some c_j is
// numerically zero (or a layer widens, voiding the lower bound) are flagged
// and carry no certified claim.
struct BoundRow {
    int token = 0;
    int layer = 0;  // 0 = embedding concat, then hidden layers, last = logits
    double pi = 0.0;
    double w = 0.0;
    double lower = 0.0;
    double actual = 0.0;
    double upper = 0.0;
    bool flagged = false;
};

BoundRow bound_sandwich_row(const PolicyNet& net, const TokenRecord& record, int layer, double w);

// Number of activation stages a bound row can target (input, hiddens, logits).
int bound_layer_count(const PolicyNet& net);

// Zero-weight nets with crafted head biases realizing the equality cases:
// uniform residual mass meets the lower bound, all residual mass on one
// other token meets the upper bound.
BoundRow tightness_uniform_tail(int vocab, double pi, double w);
BoundRow tightness_two_hot(int vocab, double pi, double w);

}  // namespace tokenlab
