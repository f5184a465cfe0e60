#include "tokenlab/tasks.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace tokenlab {

namespace {

// Tokens strictly between the first answer-open and the first answer-close
// after it; empty when the pair is absent.
std::vector<int> answer_segment(std::span<const int> response) {
    const int n = static_cast<int>(response.size());
    int open = -1;
    for (int i = 0; i < n; ++i)
        if (response[static_cast<size_t>(i)] == Vocabulary::kAnswer) {
            open = i;
            break;
        }
    if (open < 0) return {};
    for (int j = open + 1; j < n; ++j)
        if (response[static_cast<size_t>(j)] == Vocabulary::kAnswerEnd)
            return std::vector<int>(response.begin() + open + 1, response.begin() + j);
    return {};
}

bool format_valid(std::span<const int> response) {
    const int markers[4] = {Vocabulary::kThink, Vocabulary::kThinkEnd, Vocabulary::kAnswer,
                            Vocabulary::kAnswerEnd};
    int pos[4];
    for (int m = 0; m < 4; ++m) {
        int count = 0;
        pos[m] = -1;
        for (int i = 0; i < static_cast<int>(response.size()); ++i)
            if (response[static_cast<size_t>(i)] == markers[m]) {
                ++count;
                pos[m] = i;
            }
        if (count != 1) return false;
    }
    return pos[0] < pos[1] && pos[1] < pos[2] && pos[2] < pos[3];
}

}  // namespace

PromptInstance generate_prompt(const TaskSpec& spec, Rng& rng) {
    if (spec.difficulty_min < 1 || spec.difficulty_max < spec.difficulty_min)
        throw std::invalid_argument("generate_prompt: bad difficulty range");
    PromptInstance inst;
    inst.difficulty = rng.uniform_int(spec.difficulty_min, spec.difficulty_max);
    if (spec.kind == TaskKind::format_answer) {
        if (spec.bits_per_slot < 1) throw std::invalid_argument("generate_prompt: bad bits_per_slot");
        for (int s = 0; s < inst.difficulty; ++s) {
            inst.prompt.push_back(Vocabulary::kQuery);
            int parity = 0;
            for (int b = 0; b < spec.bits_per_slot; ++b) {
                const int bit = rng.uniform_int(0, 1);
                parity ^= bit;
                inst.prompt.push_back(Vocabulary::digit(bit));
            }
            inst.truth.push_back(Vocabulary::digit(parity));
        }
    } else {
        inst.prompt.push_back(Vocabulary::kQuery);
        int sum = 0;
        for (int s = 0; s < inst.difficulty; ++s) {
            const int d = rng.uniform_int(0, 9);
            sum += d;
            inst.prompt.push_back(Vocabulary::digit(d));
        }
        inst.truth.push_back(Vocabulary::digit(sum % 10));
    }
    return inst;
}

ScoreBreakdown score(const TaskSpec& spec, const PromptInstance& instance, std::span<const int> response) {
    ScoreBreakdown out;
    const std::vector<int> seg = answer_segment(response);
    if (spec.kind == TaskKind::binary) {
        out.format_ok = format_valid(response);  // informational, not rewarded
        const bool correct = !seg.empty() && seg == instance.truth;
        out.answer = correct ? ScoreBreakdown::Answer::correct : ScoreBreakdown::Answer::wrong;
        out.reward = correct ? spec.binary_correct : spec.binary_wrong;
        return out;
    }
    out.format_ok = format_valid(response);
    const size_t slots = instance.truth.size();
    size_t matches = 0;
    for (size_t i = 0; i < std::min(seg.size(), slots); ++i)
        if (seg[i] == instance.truth[i]) ++matches;
    if (seg.size() == slots && matches == slots) out.answer = ScoreBreakdown::Answer::correct;
    else if (matches >= 1) out.answer = ScoreBreakdown::Answer::partial;
    else out.answer = ScoreBreakdown::Answer::wrong;
    double r = out.format_ok ? spec.reward.format_correct : spec.reward.format_wrong;
    switch (out.answer) {
        case ScoreBreakdown::Answer::correct: r += spec.reward.answer_correct; break;
        case ScoreBreakdown::Answer::partial: r += spec.reward.answer_partial; break;
        case ScoreBreakdown::Answer::wrong: r += spec.reward.answer_wrong; break;
    }
    out.reward = r;
    return out;
}

std::vector<int> canonical_response(const TaskSpec& spec, const PromptInstance& instance) {
    std::vector<int> r;
    if (spec.kind == TaskKind::format_answer) {
        r.push_back(Vocabulary::kThink);
        r.push_back(Vocabulary::kThinkEnd);
    }
    r.push_back(Vocabulary::kAnswer);
    r.insert(r.end(), instance.truth.begin(), instance.truth.end());
    r.push_back(Vocabulary::kAnswerEnd);
    r.push_back(Vocabulary::kEos);
    return r;
}

std::string dump_instance(const PromptInstance& instance) {
    std::ostringstream os;
    os << "prompt=";
    for (size_t i = 0; i < instance.prompt.size(); ++i) os << (i ? "," : "") << instance.prompt[i];
    os << ";truth=";
    for (size_t i = 0; i < instance.truth.size(); ++i) os << (i ? "," : "") << instance.truth[i];
    os << ";difficulty=" << instance.difficulty;
    return os.str();
}

namespace {

std::vector<int> parse_id_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string part;
    while (std::getline(is, part, ',')) {
        if (part.empty()) continue;
        out.push_back(std::stoi(part));
    }
    return out;
}

}  // namespace

PromptInstance parse_instance(const std::string& line) {
    PromptInstance inst;
    std::istringstream is(line);
    std::string field;
    bool saw_prompt = false, saw_truth = false, saw_diff = false;
    while (std::getline(is, field, ';')) {
        const size_t eq = field.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("parse_instance: malformed field: " + field);
        const std::string key = field.substr(0, eq);
        const std::string val = field.substr(eq + 1);
        if (key == "prompt") {
            inst.prompt = parse_id_list(val);
            saw_prompt = true;
        } else if (key == "truth") {
            inst.truth = parse_id_list(val);
            saw_truth = true;
        } else if (key == "difficulty") {
            inst.difficulty = std::stoi(val);
            saw_diff = true;
        } else {
            throw std::invalid_argument("parse_instance: unknown field: " + key);
        }
    }
    if (!saw_prompt || !saw_truth || !saw_diff) throw std::invalid_argument("parse_instance: missing fields");
    return inst;
}

}  // namespace tokenlab
