#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tokenlab/rng.hpp"
#include "tokenlab/tape.hpp"
#include "tokenlab/tensor.hpp"

namespace tokenlab {

// Token inventory. Layout is fixed: pad, eos, the four format markers, ten
// digits, a query marker, then filler up to the requested size.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kEos = 1;
    static constexpr int kThink = 2;
    static constexpr int kThinkEnd = 3;
    static constexpr int kAnswer = 4;
    static constexpr int kAnswerEnd = 5;
    static constexpr int kDigit0 = 6;
    static constexpr int kQuery = 16;
    static constexpr int kMinSize = 17;

    static Vocabulary standard(int size);
    static int digit(int d) { return kDigit0 + d; }

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int id) const;
    int id(const std::string& name) const;  // -1 if absent

private:
    std::vector<std::string> names_;
};

struct PolicyDims {
    int vocab = 32;
    int embed = 16;
    int context = 16;
    std::vector<int> hidden = {64, 64};

    bool operator==(const PolicyDims&) const = default;
};

// One sampled token with everything later stages need: the exact padded
// context it was sampled from, the probabilities recorded at temperature 1,
// and the advantage slots filled in by the advantage stage.
struct TokenRecord {
    std::vector<int> context;  // padded to the policy context length
    int token = 0;
    int position = 0;      // index within the response output
    int response_id = 0;   // flat index within the rollout batch
    double logp_old = 0.0;
    double old_prob = 1.0;
    double logp_ref = 0.0;
    double ref_prob = 1.0;
    double advantage = 0.0;
    double advantage_raw = 0.0;  // group advantage before reweighting/masking
    bool low_mask = false;
};

struct Response {
    std::vector<int> prompt;
    std::vector<int> output;
    std::vector<TokenRecord> records;  // aligned 1:1 with output
    bool eos_terminated = false;
    double reward = 0.0;
};

// Softmax over logits at the given temperature (probability bookkeeping in
// the rest of the lab always uses temperature 1; temperature only shapes
// sampling).
inline Tensor token_distribution(const Tensor& logits, double temperature) {
    return kernels::softmax(logits, temperature);
}

// Fixed-context autoregressive policy: k token embeddings concatenated, a
// tanh MLP trunk, and a linear head over the vocabulary. Parameter order is
// fixed (embedding, per-layer weight/bias, head weight/bias) and relied on by
// checkpoints and optimizers.
class PolicyNet {
public:
    PolicyNet(PolicyDims dims, uint64_t seed, double init_scale = 1.0);
    static PolicyNet zeros(PolicyDims dims);

    const PolicyDims& dims() const { return dims_; }
    uint64_t seed() const { return seed_; }

    int param_count() const { return static_cast<int>(params_.size()); }
    int scalar_count() const;
    std::vector<Tensor>& params() { return params_; }
    const std::vector<Tensor>& params() const { return params_; }
    bool params_finite() const;

    // Last k ids of prefix, left-padded with pad_id.
    std::vector<int> context_of(std::span<const int> prefix, int pad_id = 0) const;

    struct ForwardTrace {
        Tensor input;                 // concatenated embeddings, a_0
        std::vector<Tensor> hidden;   // tanh activations a_1 .. a_L
        Tensor logits;                // pre-softmax head output
    };
    ForwardTrace forward_trace(std::span<const int> context) const;
    Tensor forward_logits(std::span<const int> context) const;

    double logp_of(std::span<const int> context, int token) const;
    double prob_of(std::span<const int> context, int token) const;

    // Tape construction. bind() pushes every parameter once; token subgraphs
    // share those leaves, so per-token losses stay isolated while parameter
    // gradients accumulate across tokens.
    struct TapeBinding {
        std::vector<Tape::NodeId> param_ids;  // same order as params()
    };
    struct TokenNodes {
        std::vector<Tape::NodeId> activations;  // a_0, a_1 .. a_L, logits
        Tape::NodeId logits = -1;
        Tape::NodeId logp = -1;
    };
    TapeBinding bind(Tape& tape) const;
    TokenNodes forward_on_tape(Tape& tape, const TapeBinding& binding, std::span<const int> context,
                               int token) const;

    void save(const std::string& path) const;
    static PolicyNet load(const std::string& path);

private:
    PolicyNet() = default;
    void check_dims() const;

    PolicyDims dims_;
    uint64_t seed_ = 0;
    std::vector<Tensor> params_;
};

// Autoregressive sampling. Stops after eos_id or after max_len generated
// tokens. Records logp/prob at temperature 1 for every sampled token;
// ref fields start equal to the old fields until a reference policy fills
// them in.
Response sample_response(const PolicyNet& net, std::span<const int> prompt, int max_len, double temperature,
                         Rng& rng, bool greedy = false, int eos_id = Vocabulary::kEos);

// Differentiable log-probability of record.token given record.context.
Tape::NodeId log_prob_node(const PolicyNet& net, Tape& tape, const PolicyNet::TapeBinding& binding,
                           const TokenRecord& record);

}  // namespace tokenlab
