#include "tokenlab/advantage.hpp"

#include <cmath>
#include <stdexcept>

#include "tokenlab/stats.hpp"

namespace tokenlab {

std::vector<double> grpo_group_advantage(const GroupRewards& g, double std_floor) {
    if (g.rewards.size() < 2) throw std::invalid_argument("grpo_group_advantage: need G >= 2");
    for (double r : g.rewards)
        if (!std::isfinite(r)) throw std::invalid_argument("grpo_group_advantage: non-finite reward");
    const double mu = stats::mean(g.rewards);
    const double sd = stats::pop_std(g.rewards);
    std::vector<double> adv(g.rewards.size(), 0.0);
    if (sd < std_floor) return adv;
    for (size_t i = 0; i < adv.size(); ++i) adv[i] = (g.rewards[i] - mu) / sd;
    return adv;
}

AdvantageBatch rpp_advantage(std::span<const double> rewards, const std::vector<std::vector<double>>& k1,
                             double beta, double std_floor) {
    if (rewards.size() != k1.size()) throw std::invalid_argument("rpp_advantage: rewards/k1 size mismatch");
    AdvantageBatch out;
    out.per_token.resize(k1.size());
    std::vector<double> flat;
    for (size_t i = 0; i < k1.size(); ++i) {
        const std::vector<double>& ks = k1[i];
        for (double v : ks)
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::invalid_argument("rpp_advantage: k1 values must be positive finite");
        std::vector<double>& raw = out.per_token[i];
        raw.resize(ks.size());
        double suffix = 0.0;
        for (size_t t = ks.size(); t-- > 0;) {
            suffix += ks[t];
            raw[t] = rewards[i] - beta * suffix;
        }
        flat.insert(flat.end(), raw.begin(), raw.end());
    }
    if (flat.empty()) return out;
    out.mu = stats::mean(flat);
    out.sigma = stats::pop_std(flat);
    if (out.sigma < std_floor) {
        out.zeroed = true;
        for (auto& row : out.per_token)
            for (double& v : row) v = 0.0;
        return out;
    }
    for (auto& row : out.per_token)
        for (double& v : row) v = (v - out.mu) / out.sigma;
    return out;
}

std::vector<double> reweight(std::span<const double> advantages, std::span<const double> old_probs,
                             double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("reweight: alpha must be in [0, 1]");
    if (advantages.size() != old_probs.size())
        throw std::invalid_argument("reweight: advantages/probs size mismatch");
    std::vector<double> out(advantages.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double p = old_probs[i];
        if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("reweight: probs must be in (0, 1]");
        out[i] = (alpha * p + (1.0 - alpha)) * advantages[i];
    }
    return out;
}

LoptiMasks lopti_masks(std::span<const double> old_probs, double eta) {
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("lopti_masks: eta must be in (0, 1)");
    LoptiMasks m;
    m.low.resize(old_probs.size());
    m.high.resize(old_probs.size());
    for (size_t i = 0; i < old_probs.size(); ++i) {
        m.low[i] = old_probs[i] <= eta ? 1 : 0;
        m.high[i] = 1 - m.low[i];
    }
    return m;
}

}  // namespace tokenlab
