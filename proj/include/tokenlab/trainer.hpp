#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tokenlab/advantage.hpp"
#include "tokenlab/policy.hpp"
#include "tokenlab/tape.hpp"
#include "tokenlab/tasks.hpp"

namespace tokenlab {

enum class Algorithm { grpo, rpp };
enum class LoptiOrder { off, low_first, high_first };
enum class OptimizerKind { adamw, sgd };

struct TrainerConfig {
    Algorithm algorithm = Algorithm::grpo;
    double eps_low = 0.2;
    double eps_high = 0.24;
    double beta = 0.001;
    bool reweight_on = false;
    double alpha = 0.3;
    LoptiOrder lopti_order = LoptiOrder::off;
    double eta = 0.5;
    bool mask_high_ablation = false;
    OptimizerKind optimizer = OptimizerKind::adamw;
    double lr = 1e-6;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    int group_size = 8;
    int prompts_per_batch = 4;
    int epochs = 1;
    int minibatch_responses = 0;  // 0 = one update pass over the whole batch
    int max_response_len = 12;
    double temperature = 1.0;
    double std_floor = 1e-6;
};

void validate(const TrainerConfig& cfg);

struct StepMetrics {
    double mean_reward = 0.0;
    double objective = 0.0;  // batch objective J before the update
    double grad_norm = 0.0;
    double clip_frac = 0.0;  // fraction of tokens outside the trust region
    double kl = 0.0;         // mean per-token KL estimate against the reference
    double wall_ms = 0.0;
};

struct PromptGroup {
    PromptInstance instance;
    std::vector<Response> responses;
};

struct RolloutBatch {
    std::vector<PromptGroup> groups;
};

std::vector<TokenRecord*> flat_tokens(RolloutBatch& batch);
std::vector<const TokenRecord*> flat_tokens(const RolloutBatch& batch);

class Optimizer {
public:
    Optimizer(OptimizerKind kind, const TrainerConfig& cfg, const PolicyNet& net);

    // grads are gradients of the minimized loss, aligned with net.params().
    void apply(PolicyNet& net, const std::vector<Tensor>& grads);
    int64_t steps_taken() const { return t_; }

private:
    OptimizerKind kind_;
    double lr_, beta1_, beta2_, eps_, weight_decay_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

// Clipped-surrogate objective built on a tape. total is J averaged over all
// tokens (the quantity to maximize); per-token nodes are exposed for
// gradient-identity checks and diagnostics.
struct LossNodes {
    Tape::NodeId total = -1;
    std::vector<Tape::NodeId> logp;
    std::vector<Tape::NodeId> token_objective;
    std::vector<Tape::NodeId> kl_term;  // per-token k3 nodes, empty when KL is off
};

// J = (1/T) sum_t { min[r*A, clip(r)*A] - beta*(pi_ref/pi - log(pi_ref/pi) - 1) },
// r = pi / pi_old. The KL term is omitted when beta = 0.
LossNodes surrogate_loss(Tape& tape, const PolicyNet& net, const PolicyNet::TapeBinding& binding,
                         std::span<const TokenRecord* const> tokens, const TrainerConfig& cfg);

// Same surrogate without any KL term (the KL penalty lives in the advantage).
LossNodes rpp_loss(Tape& tape, const PolicyNet& net, const PolicyNet::TapeBinding& binding,
                   std::span<const TokenRecord* const> tokens, const TrainerConfig& cfg);

// Analytic per-token gradient of the objective with respect to log pi:
// w = (pi/pi_old)*A*I_trust + beta*(pi_ref/pi) - beta, where I_trust drops to
// zero iff (A > 0 and r > 1+eps_high) or (A < 0 and r < 1-eps_low).
std::vector<double> policy_gradient_weights(const PolicyNet& net, std::span<const TokenRecord* const> tokens,
                                            const TrainerConfig& cfg, bool include_kl = true);

// Seed context for update-pass shuffling: derived streams depend only on
// (seed, step, executed pass index), so schedulers that skip stages keep the
// remaining passes bit-identical.
struct UpdateContext {
    uint64_t seed = 0;
    uint64_t step = 0;
};

StepMetrics grpo_step(RolloutBatch& batch, PolicyNet& net, Optimizer& opt, const TrainerConfig& cfg,
                      const UpdateContext& uc);

// Two-stage masked update: one full epoch loop with advantages restricted to
// one probability group, then the complementary group. Empty groups skip
// their stage. The KL term always covers every token.
StepMetrics lopti_step(RolloutBatch& batch, PolicyNet& net, Optimizer& opt, const TrainerConfig& cfg,
                       const UpdateContext& uc);

struct RunConfig {
    TaskSpec task;
    PolicyDims dims;
    TrainerConfig trainer;
    uint64_t seed = 1;
    int steps = 200;
    int checkpoint_interval = 0;  // 0 = no interval checkpoints
    bool record_timing = false;
};

struct TrainHooks {
    std::function<void(int step, const StepMetrics&)> on_step;
    std::function<void(int step, const PolicyNet&)> on_checkpoint;
};

struct TrainResult {
    std::vector<StepMetrics> log;
    double baseline_mean_reward = 0.0;  // untrained policy, measured pre-loop
};

// Full loop: sample M prompts x G responses, score, advantages, optional
// reweighting/masking, one scheduler step. Returns the trained net through
// the in/out parameter.
TrainResult train(const RunConfig& cfg, PolicyNet& net, const TrainHooks& hooks = {});

// Rollout phase alone, exposed for diagnostics: scored responses with
// reference probabilities and group advantages filled in.
RolloutBatch rollout(const RunConfig& cfg, const PolicyNet& net, const PolicyNet& ref, uint64_t step);

// Advantage assignment (group-relative or batch-whitened), then optional
// reweighting and the high-probability ablation mask, per cfg.
void assign_advantages(RolloutBatch& batch, const TrainerConfig& cfg);

}  // namespace tokenlab
