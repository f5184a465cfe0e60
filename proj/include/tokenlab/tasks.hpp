#pragma once

#include <span>
#include <string>
#include <vector>

#include "tokenlab/policy.hpp"
#include "tokenlab/rng.hpp"

namespace tokenlab {

enum class TaskKind { format_answer, binary };

// Reward constants for the composite format+answer regime.
struct RewardParams {
    double format_correct = 1.0;
    double format_wrong = -1.0;
    double answer_correct = 2.0;
    double answer_partial = -1.5;
    double answer_wrong = -2.0;
};

struct TaskSpec {
    TaskKind kind = TaskKind::format_answer;
    int difficulty_min = 2;
    int difficulty_max = 5;
    int bits_per_slot = 2;  // parity group length, format_answer only
    RewardParams reward;
    double binary_correct = 1.0;
    double binary_wrong = 0.0;
};

struct PromptInstance {
    std::vector<int> prompt;
    std::vector<int> truth;  // digit token ids, one per answer slot
    int difficulty = 0;
};

struct ScoreBreakdown {
    enum class Answer { correct, partial, wrong };
    bool format_ok = false;
    Answer answer = Answer::wrong;
    double reward = 0.0;
};

// format_answer: per slot, a query marker followed by bits_per_slot random
// bit digits; the slot's truth is the parity. binary: difficulty random
// digits after one query marker; truth is their sum mod 10, a single slot.
PromptInstance generate_prompt(const TaskSpec& spec, Rng& rng);

// Pure reward. Format is graded on marker ordering (think-open, think-close,
// answer-open, answer-close, each exactly once, in that order). The answer
// segment is whatever sits between the first answer-open and the next
// answer-close; absent markers leave it empty. binary collapses to
// correct-or-not on the answer segment.
ScoreBreakdown score(const TaskSpec& spec, const PromptInstance& instance, std::span<const int> response);

// A maximal-reward response for the instance.
std::vector<int> canonical_response(const TaskSpec& spec, const PromptInstance& instance);

// One-line dump, stable field order: prompt=..;truth=..;difficulty=N
std::string dump_instance(const PromptInstance& instance);
PromptInstance parse_instance(const std::string& line);

}  // namespace tokenlab
