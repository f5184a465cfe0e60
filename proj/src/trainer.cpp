#include "tokenlab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tokenlab {

void validate(const TrainerConfig& cfg) {
    if (cfg.eps_low < 0.0 || cfg.eps_high < 0.0) throw std::invalid_argument("trainer: clip thresholds must be >= 0");
    if (cfg.beta < 0.0) throw std::invalid_argument("trainer: beta must be >= 0");
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw std::invalid_argument("trainer: alpha must be in [0, 1]");
    if (cfg.lopti_order != LoptiOrder::off || cfg.mask_high_ablation) {
        if (!(cfg.eta > 0.0 && cfg.eta < 1.0)) throw std::invalid_argument("trainer: eta must be in (0, 1)");
    }
    if (cfg.lr < 0.0) throw std::invalid_argument("trainer: lr must be >= 0");
    if (cfg.group_size < 2) throw std::invalid_argument("trainer: group_size must be >= 2");
    if (cfg.prompts_per_batch < 1) throw std::invalid_argument("trainer: prompts_per_batch must be >= 1");
    if (cfg.epochs < 1) throw std::invalid_argument("trainer: epochs must be >= 1");
    if (cfg.minibatch_responses < 0) throw std::invalid_argument("trainer: minibatch_responses must be >= 0");
    if (cfg.max_response_len < 1) throw std::invalid_argument("trainer: max_response_len must be >= 1");
    if (!(cfg.temperature > 0.0)) throw std::invalid_argument("trainer: temperature must be > 0");
    if (!(cfg.std_floor > 0.0)) throw std::invalid_argument("trainer: std_floor must be > 0");
}

std::vector<TokenRecord*> flat_tokens(RolloutBatch& batch) {
    std::vector<TokenRecord*> out;
    for (PromptGroup& g : batch.groups)
        for (Response& r : g.responses)
            for (TokenRecord& t : r.records) out.push_back(&t);
    return out;
}

std::vector<const TokenRecord*> flat_tokens(const RolloutBatch& batch) {
    std::vector<const TokenRecord*> out;
    for (const PromptGroup& g : batch.groups)
        for (const Response& r : g.responses)
            for (const TokenRecord& t : r.records) out.push_back(&t);
    return out;
}

Optimizer::Optimizer(OptimizerKind kind, const TrainerConfig& cfg, const PolicyNet& net)
    : kind_(kind),
      lr_(cfg.lr),
      beta1_(cfg.adam_beta1),
      beta2_(cfg.adam_beta2),
      eps_(cfg.adam_eps),
      weight_decay_(cfg.weight_decay) {
    if (kind_ == OptimizerKind::adamw) {
        for (const Tensor& p : net.params()) {
            m_.push_back(Tensor::zeros(p.rows(), p.cols()));
            v_.push_back(Tensor::zeros(p.rows(), p.cols()));
        }
    }
}

void Optimizer::apply(PolicyNet& net, const std::vector<Tensor>& grads) {
    std::vector<Tensor>& params = net.params();
    if (grads.size() != params.size()) throw std::invalid_argument("Optimizer: gradient count mismatch");
    for (size_t i = 0; i < params.size(); ++i)
        if (!params[i].same_shape(grads[i])) throw std::invalid_argument("Optimizer: gradient shape mismatch");
    ++t_;
    if (kind_ == OptimizerKind::sgd) {
        for (size_t i = 0; i < params.size(); ++i)
            for (int j = 0; j < params[i].size(); ++j) params[i][j] -= lr_ * grads[i][j];
        return;
    }
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        for (int j = 0; j < params[i].size(); ++j) {
            const double g = grads[i][j];
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            params[i][j] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * params[i][j]);
        }
    }
}

namespace {

void check_record(const TokenRecord& r) {
    if (!(r.old_prob > 0.0 && r.old_prob <= 1.0))
        throw std::invalid_argument("surrogate_loss: old_prob must be in (0, 1]");
    if (!(r.ref_prob > 0.0 && r.ref_prob <= 1.0))
        throw std::invalid_argument("surrogate_loss: ref_prob must be in (0, 1]");
    if (!std::isfinite(r.advantage)) throw std::invalid_argument("surrogate_loss: non-finite advantage");
}

LossNodes build_loss(Tape& tape, const PolicyNet& net, const PolicyNet::TapeBinding& binding,
                     std::span<const TokenRecord* const> tokens, const TrainerConfig& cfg, bool include_kl) {
    if (tokens.empty()) throw std::invalid_argument("surrogate_loss: empty token batch");
    const bool with_kl = include_kl && cfg.beta > 0.0;
    LossNodes out;
    for (const TokenRecord* rec : tokens) {
        check_record(*rec);
        const PolicyNet::TokenNodes tn = net.forward_on_tape(tape, binding, rec->context, rec->token);
        out.logp.push_back(tn.logp);
        const Tape::NodeId ratio = tape.exp(tape.shift(tn.logp, -rec->logp_old));
        const Tape::NodeId unclipped = tape.scale(ratio, rec->advantage);
        const Tape::NodeId clipped =
            tape.scale(tape.clamp(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high), rec->advantage);
        Tape::NodeId obj = tape.min2(unclipped, clipped);
        if (with_kl) {
            const Tape::NodeId u = tape.shift(tape.scale(tn.logp, -1.0), rec->logp_ref);
            const Tape::NodeId k3 = tape.shift(tape.sub(tape.exp(u), u), -1.0);
            out.kl_term.push_back(k3);
            obj = tape.sub(obj, tape.scale(k3, cfg.beta));
        }
        out.token_objective.push_back(obj);
    }
    out.total = tape.scale(tape.add_many(out.token_objective), 1.0 / static_cast<double>(tokens.size()));
    return out;
}

}  // namespace

LossNodes surrogate_loss(Tape& tape, const PolicyNet& net, const PolicyNet::TapeBinding& binding,
                         std::span<const TokenRecord* const> tokens, const TrainerConfig& cfg) {
    return build_loss(tape, net, binding, tokens, cfg, true);
}

LossNodes rpp_loss(Tape& tape, const PolicyNet& net, const PolicyNet::TapeBinding& binding,
                   std::span<const TokenRecord* const> tokens, const TrainerConfig& cfg) {
    return build_loss(tape, net, binding, tokens, cfg, false);
}

std::vector<double> policy_gradient_weights(const PolicyNet& net, std::span<const TokenRecord* const> tokens,
                                            const TrainerConfig& cfg, bool include_kl) {
    std::vector<double> w;
    w.reserve(tokens.size());
    for (const TokenRecord* rec : tokens) {
        check_record(*rec);
        const double logp = net.logp_of(rec->context, rec->token);
        const double ratio = std::exp(logp - rec->logp_old);
        const bool outside = (rec->advantage > 0.0 && ratio > 1.0 + cfg.eps_high) ||
                             (rec->advantage < 0.0 && ratio < 1.0 - cfg.eps_low);
        double wi = outside ? 0.0 : ratio * rec->advantage;
        if (include_kl && cfg.beta > 0.0) wi += cfg.beta * std::exp(rec->logp_ref - logp) - cfg.beta;
        w.push_back(wi);
    }
    return w;
}

namespace {

bool uses_kl(const TrainerConfig& cfg) { return cfg.algorithm == Algorithm::grpo; }

StepMetrics compute_metrics(const RolloutBatch& batch, const std::vector<TokenRecord*>& toks,
                            const PolicyNet& net, const TrainerConfig& cfg) {
    StepMetrics m;
    int nresp = 0;
    double rsum = 0.0;
    for (const PromptGroup& g : batch.groups)
        for (const Response& r : g.responses) {
            rsum += r.reward;
            ++nresp;
        }
    if (nresp > 0) m.mean_reward = rsum / nresp;
    if (toks.empty()) return m;
    Tape tape;
    const PolicyNet::TapeBinding binding = net.bind(tape);
    std::span<const TokenRecord* const> span(toks.data(), toks.size());
    const LossNodes ln = build_loss(tape, net, binding, span, cfg, uses_kl(cfg));
    m.objective = tape.value(ln.total).value();
    if (!std::isfinite(m.objective)) throw std::runtime_error("step: non-finite objective");
    GradientView gv = tape.backward(ln.total);
    double s2 = 0.0;
    for (Tape::NodeId pid : binding.param_ids)
        if (gv.has(pid)) {
            const double n = gv.grad(pid).norm();
            s2 += n * n;
        }
    m.grad_norm = std::sqrt(s2);
    int clipped = 0;
    double ksum = 0.0;
    for (size_t i = 0; i < toks.size(); ++i) {
        const TokenRecord& rec = *toks[i];
        const double logp = tape.value(ln.logp[i]).value();
        const double ratio = std::exp(logp - rec.logp_old);
        const bool outside = (rec.advantage > 0.0 && ratio > 1.0 + cfg.eps_high) ||
                             (rec.advantage < 0.0 && ratio < 1.0 - cfg.eps_low);
        if (outside) ++clipped;
        const double u = rec.logp_ref - logp;
        ksum += std::exp(u) - u - 1.0;
    }
    m.clip_frac = static_cast<double>(clipped) / static_cast<double>(toks.size());
    m.kl = ksum / static_cast<double>(toks.size());
    return m;
}

std::vector<Response*> flat_responses(RolloutBatch& batch) {
    std::vector<Response*> out;
    for (PromptGroup& g : batch.groups)
        for (Response& r : g.responses) out.push_back(&r);
    return out;
}

// One epoch pass: responses are chunked into mini-batches (shuffled when the
// chunking is nontrivial) and each chunk takes one optimizer update on -J.
void run_update_pass(RolloutBatch& batch, PolicyNet& net, Optimizer& opt, const TrainerConfig& cfg,
                     const UpdateContext& uc, int& executed_pass) {
    std::vector<Response*> responses = flat_responses(batch);
    const int nresp = static_cast<int>(responses.size());
    if (nresp == 0) return;
    std::vector<int> order(responses.size());
    std::iota(order.begin(), order.end(), 0);
    const int mb = cfg.minibatch_responses;
    const bool chunked = mb > 0 && mb < nresp;
    if (chunked) {
        Rng rng = Rng::derive(uc.seed, "update", uc.step, static_cast<uint64_t>(executed_pass));
        rng.shuffle(order);
    }
    const int chunk = chunked ? mb : nresp;
    for (int start = 0; start < nresp; start += chunk) {
        const int end = std::min(start + chunk, nresp);
        std::vector<const TokenRecord*> toks;
        for (int i = start; i < end; ++i)
            for (TokenRecord& t : responses[static_cast<size_t>(order[static_cast<size_t>(i)])]->records)
                toks.push_back(&t);
        if (toks.empty()) continue;
        Tape tape;
        const PolicyNet::TapeBinding binding = net.bind(tape);
        std::span<const TokenRecord* const> span(toks.data(), toks.size());
        const LossNodes ln = build_loss(tape, net, binding, span, cfg, uses_kl(cfg));
        if (!std::isfinite(tape.value(ln.total).value()))
            throw std::runtime_error("update: non-finite objective");
        const Tape::NodeId loss = tape.scale(ln.total, -1.0);
        GradientView gv = tape.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(binding.param_ids.size());
        for (Tape::NodeId pid : binding.param_ids) grads.push_back(gv.grad_or_zero(pid));
        opt.apply(net, grads);
        if (!net.params_finite())
            throw std::runtime_error("optimizer diverged: non-finite parameters after update step " +
                                     std::to_string(uc.step));
    }
    ++executed_pass;
}

}  // namespace

StepMetrics grpo_step(RolloutBatch& batch, PolicyNet& net, Optimizer& opt, const TrainerConfig& cfg,
                      const UpdateContext& uc) {
    validate(cfg);
    std::vector<TokenRecord*> toks = flat_tokens(batch);
    const StepMetrics m = compute_metrics(batch, toks, net, cfg);
    int pass = 0;
    for (int e = 0; e < cfg.epochs; ++e) run_update_pass(batch, net, opt, cfg, uc, pass);
    return m;
}

StepMetrics lopti_step(RolloutBatch& batch, PolicyNet& net, Optimizer& opt, const TrainerConfig& cfg,
                       const UpdateContext& uc) {
    validate(cfg);
    if (cfg.lopti_order == LoptiOrder::off) throw std::invalid_argument("lopti_step: lopti_order is off");
    std::vector<TokenRecord*> toks = flat_tokens(batch);
    const StepMetrics m = compute_metrics(batch, toks, net, cfg);
    std::vector<double> entry_adv(toks.size());
    std::vector<double> probs(toks.size());
    for (size_t i = 0; i < toks.size(); ++i) {
        entry_adv[i] = toks[i]->advantage;
        probs[i] = toks[i]->old_prob;
    }
    const LoptiMasks masks = lopti_masks(probs, cfg.eta);
    for (size_t i = 0; i < toks.size(); ++i) toks[i]->low_mask = masks.low[i] != 0;
    const bool low_first = cfg.lopti_order == LoptiOrder::low_first;
    int pass = 0;
    for (int stage = 0; stage < 2; ++stage) {
        const bool low_stage = (stage == 0) == low_first;
        const std::vector<uint8_t>& mask = low_stage ? masks.low : masks.high;
        bool any = false;
        for (uint8_t b : mask)
            if (b) {
                any = true;
                break;
            }
        if (!any) continue;
        for (size_t i = 0; i < toks.size(); ++i) toks[i]->advantage = mask[i] ? entry_adv[i] : 0.0;
        for (int e = 0; e < cfg.epochs; ++e) run_update_pass(batch, net, opt, cfg, uc, pass);
    }
    for (size_t i = 0; i < toks.size(); ++i) toks[i]->advantage = entry_adv[i];
    return m;
}

RolloutBatch rollout(const RunConfig& cfg, const PolicyNet& net, const PolicyNet& ref, uint64_t step) {
    RolloutBatch batch;
    int flat_resp = 0;
    for (int mq = 0; mq < cfg.trainer.prompts_per_batch; ++mq) {
        PromptGroup group;
        Rng task_rng = Rng::derive(cfg.seed, "task", step, static_cast<uint64_t>(mq));
        group.instance = generate_prompt(cfg.task, task_rng);
        for (int g = 0; g < cfg.trainer.group_size; ++g) {
            Rng rng = Rng::derive(cfg.seed, "rollout", step, static_cast<uint64_t>(mq), static_cast<uint64_t>(g));
            Response resp = sample_response(net, group.instance.prompt, cfg.trainer.max_response_len,
                                            cfg.trainer.temperature, rng);
            for (TokenRecord& rec : resp.records) {
                rec.response_id = flat_resp;
                rec.logp_ref = ref.logp_of(rec.context, rec.token);
                rec.ref_prob = std::exp(rec.logp_ref);
            }
            resp.reward = score(cfg.task, group.instance, resp.output).reward;
            group.responses.push_back(std::move(resp));
            ++flat_resp;
        }
        batch.groups.push_back(std::move(group));
    }
    return batch;
}

void assign_advantages(RolloutBatch& batch, const TrainerConfig& cfg) {
    if (cfg.algorithm == Algorithm::grpo) {
        int gid = 0;
        for (PromptGroup& g : batch.groups) {
            GroupRewards gr;
            gr.prompt_id = gid++;
            for (const Response& r : g.responses) gr.rewards.push_back(r.reward);
            const std::vector<double> adv = grpo_group_advantage(gr, cfg.std_floor);
            for (size_t i = 0; i < g.responses.size(); ++i)
                for (TokenRecord& t : g.responses[i].records) {
                    t.advantage_raw = adv[i];
                    t.advantage = adv[i];
                }
        }
    } else {
        std::vector<double> rewards;
        std::vector<std::vector<double>> k1;
        std::vector<Response*> responses;
        for (PromptGroup& g : batch.groups)
            for (Response& r : g.responses) {
                responses.push_back(&r);
                rewards.push_back(r.reward);
                std::vector<double> row;
                for (const TokenRecord& t : r.records) row.push_back(t.old_prob / t.ref_prob);
                k1.push_back(std::move(row));
            }
        const AdvantageBatch ab = rpp_advantage(rewards, k1, cfg.beta, cfg.std_floor);
        for (size_t i = 0; i < responses.size(); ++i)
            for (size_t t = 0; t < responses[i]->records.size(); ++t) {
                responses[i]->records[t].advantage_raw = ab.per_token[i][t];
                responses[i]->records[t].advantage = ab.per_token[i][t];
            }
    }
    std::vector<TokenRecord*> toks = flat_tokens(batch);
    if (cfg.reweight_on) {
        std::vector<double> adv(toks.size()), probs(toks.size());
        for (size_t i = 0; i < toks.size(); ++i) {
            adv[i] = toks[i]->advantage;
            probs[i] = toks[i]->old_prob;
        }
        const std::vector<double> shaped = reweight(adv, probs, cfg.alpha);
        for (size_t i = 0; i < toks.size(); ++i) toks[i]->advantage = shaped[i];
    }
    if (cfg.mask_high_ablation) {
        std::vector<double> probs(toks.size());
        for (size_t i = 0; i < toks.size(); ++i) probs[i] = toks[i]->old_prob;
        const LoptiMasks masks = lopti_masks(probs, cfg.eta);
        for (size_t i = 0; i < toks.size(); ++i) {
            toks[i]->low_mask = masks.low[i] != 0;
            if (!masks.low[i]) toks[i]->advantage = 0.0;
        }
    }
}

TrainResult train(const RunConfig& cfg, PolicyNet& net, const TrainHooks& hooks) {
    validate(cfg.trainer);
    if (cfg.steps < 0) throw std::invalid_argument("train: steps must be >= 0");
    const PolicyNet ref = net;  // frozen reference: the policy before training
    Optimizer opt(cfg.trainer.optimizer, cfg.trainer, net);
    TrainResult result;
    for (int s = 0; s < cfg.steps; ++s) {
        const auto t0 = std::chrono::steady_clock::now();
        RolloutBatch batch = rollout(cfg, net, ref, static_cast<uint64_t>(s));
        assign_advantages(batch, cfg.trainer);
        const UpdateContext uc{cfg.seed, static_cast<uint64_t>(s)};
        StepMetrics m = cfg.trainer.lopti_order != LoptiOrder::off
                            ? lopti_step(batch, net, opt, cfg.trainer, uc)
                            : grpo_step(batch, net, opt, cfg.trainer, uc);
        if (cfg.record_timing) {
            const auto t1 = std::chrono::steady_clock::now();
            m.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        }
        if (s == 0) result.baseline_mean_reward = m.mean_reward;
        result.log.push_back(m);
        if (hooks.on_step) hooks.on_step(s, m);
        if (cfg.checkpoint_interval > 0 && (s + 1) % cfg.checkpoint_interval == 0 && hooks.on_checkpoint)
            hooks.on_checkpoint(s + 1, net);
    }
    return result;
}

}  // namespace tokenlab
