#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tokenlab {

struct GroupRewards {
    int prompt_id = 0;
    std::vector<double> rewards;  // one per response, G >= 2
};

// Group-relative advantages: (r - mean) / population std, identical for
// every token of a response. Groups whose reward std falls under the floor
// contribute nothing (all zeros).
std::vector<double> grpo_group_advantage(const GroupRewards& g, double std_floor = 1e-6);

struct AdvantageBatch {
    std::vector<std::vector<double>> per_token;  // [response][position]
    double mu = 0.0;
    double sigma = 0.0;
    bool zeroed = false;  // batch std under floor, advantages zeroed
};

// Suffix-sum KL penalty folded into the reward, then whitening over every
// token in the batch: raw[i][t] = r_i - beta * sum_{j>=t} k1[i][j], with
// k1 the per-token probability ratio against the reference policy.
AdvantageBatch rpp_advantage(std::span<const double> rewards, const std::vector<std::vector<double>>& k1,
                             double beta, double std_floor = 1e-6);

// new = (alpha * old_prob + 1 - alpha) * old, elementwise.
std::vector<double> reweight(std::span<const double> advantages, std::span<const double> old_probs,
                             double alpha);

struct LoptiMasks {
    std::vector<uint8_t> low;   // old_prob <= eta
    std::vector<uint8_t> high;  // complement
};

LoptiMasks lopti_masks(std::span<const double> old_probs, double eta);

}  // namespace tokenlab
