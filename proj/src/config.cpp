#include "tokenlab/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace tokenlab {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& want) {
    throw std::invalid_argument("config: key '" + key + "' has invalid value '" + value + "' (expected " +
                                want + ")");
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) bad_value(key, value, "a number");
        return v;
    } catch (const std::invalid_argument&) {
        bad_value(key, value, "a number");
    } catch (const std::out_of_range&) {
        bad_value(key, value, "a representable number");
    }
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) bad_value(key, value, "an integer");
        return v;
    } catch (const std::invalid_argument&) {
        bad_value(key, value, "an integer");
    } catch (const std::out_of_range&) {
        bad_value(key, value, "a representable integer");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) bad_value(key, value, "an unsigned integer");
        return static_cast<uint64_t>(v);
    } catch (const std::invalid_argument&) {
        bad_value(key, value, "an unsigned integer");
    } catch (const std::out_of_range&) {
        bad_value(key, value, "a representable unsigned integer");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "0" || value == "false") return false;
    if (value == "1" || value == "true") return true;
    bad_value(key, value, "0 or 1");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::istringstream is(value);
    std::string part;
    while (std::getline(is, part, ',')) {
        part = trim(part);
        if (part.empty()) bad_value(key, value, "a comma-separated integer list");
        out.push_back(parse_int(key, part));
    }
    if (out.empty()) bad_value(key, value, "a nonempty integer list");
    return out;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ConfigMap ConfigMap::parse_string(const std::string& text) {
    ConfigMap map;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key=value: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config: empty key on line " + std::to_string(lineno));
        map.kv[key] = value;
    }
    return map;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

void ConfigMap::set(const std::string& key, const std::string& value) { kv[key] = value; }

void apply_override(ConfigMap& map, const std::string& spec) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("override must be key=value, got: " + spec);
    map.kv[spec.substr(0, eq)] = spec.substr(eq + 1);
}

RunConfig run_config_from(const ConfigMap& map) {
    RunConfig cfg;
    for (const auto& [key, value] : map.kv) {
        if (key == "task.kind") {
            if (value == "format_answer") cfg.task.kind = TaskKind::format_answer;
            else if (value == "binary") cfg.task.kind = TaskKind::binary;
            else bad_value(key, value, "format_answer or binary");
        } else if (key == "task.difficulty_min") cfg.task.difficulty_min = parse_int(key, value);
        else if (key == "task.difficulty_max") cfg.task.difficulty_max = parse_int(key, value);
        else if (key == "task.bits_per_slot") cfg.task.bits_per_slot = parse_int(key, value);
        else if (key == "task.format_correct") cfg.task.reward.format_correct = parse_double(key, value);
        else if (key == "task.format_wrong") cfg.task.reward.format_wrong = parse_double(key, value);
        else if (key == "task.answer_correct") cfg.task.reward.answer_correct = parse_double(key, value);
        else if (key == "task.answer_partial") cfg.task.reward.answer_partial = parse_double(key, value);
        else if (key == "task.answer_wrong") cfg.task.reward.answer_wrong = parse_double(key, value);
        else if (key == "task.binary_correct") cfg.task.binary_correct = parse_double(key, value);
        else if (key == "task.binary_wrong") cfg.task.binary_wrong = parse_double(key, value);
        else if (key == "policy.vocab") cfg.dims.vocab = parse_int(key, value);
        else if (key == "policy.embed") cfg.dims.embed = parse_int(key, value);
        else if (key == "policy.context") cfg.dims.context = parse_int(key, value);
        else if (key == "policy.hidden") cfg.dims.hidden = parse_int_list(key, value);
        else if (key == "trainer.algorithm") {
            if (value == "grpo") cfg.trainer.algorithm = Algorithm::grpo;
            else if (value == "rpp") cfg.trainer.algorithm = Algorithm::rpp;
            else bad_value(key, value, "grpo or rpp");
        } else if (key == "trainer.eps_low") cfg.trainer.eps_low = parse_double(key, value);
        else if (key == "trainer.eps_high") cfg.trainer.eps_high = parse_double(key, value);
        else if (key == "trainer.beta") cfg.trainer.beta = parse_double(key, value);
        else if (key == "trainer.reweight") cfg.trainer.reweight_on = parse_bool(key, value);
        else if (key == "trainer.alpha") cfg.trainer.alpha = parse_double(key, value);
        else if (key == "trainer.lopti_order") {
            if (value == "off") cfg.trainer.lopti_order = LoptiOrder::off;
            else if (value == "low_first") cfg.trainer.lopti_order = LoptiOrder::low_first;
            else if (value == "high_first") cfg.trainer.lopti_order = LoptiOrder::high_first;
            else bad_value(key, value, "off, low_first or high_first");
        } else if (key == "trainer.eta") cfg.trainer.eta = parse_double(key, value);
        else if (key == "trainer.mask_high_ablation") cfg.trainer.mask_high_ablation = parse_bool(key, value);
        else if (key == "trainer.optimizer") {
            if (value == "adamw") cfg.trainer.optimizer = OptimizerKind::adamw;
            else if (value == "sgd") cfg.trainer.optimizer = OptimizerKind::sgd;
            else bad_value(key, value, "adamw or sgd");
        } else if (key == "trainer.lr") cfg.trainer.lr = parse_double(key, value);
        else if (key == "trainer.adam_beta1") cfg.trainer.adam_beta1 = parse_double(key, value);
        else if (key == "trainer.adam_beta2") cfg.trainer.adam_beta2 = parse_double(key, value);
        else if (key == "trainer.adam_eps") cfg.trainer.adam_eps = parse_double(key, value);
        else if (key == "trainer.weight_decay") cfg.trainer.weight_decay = parse_double(key, value);
        else if (key == "trainer.group_size") cfg.trainer.group_size = parse_int(key, value);
        else if (key == "trainer.prompts_per_batch") cfg.trainer.prompts_per_batch = parse_int(key, value);
        else if (key == "trainer.epochs") cfg.trainer.epochs = parse_int(key, value);
        else if (key == "trainer.minibatch_responses") cfg.trainer.minibatch_responses = parse_int(key, value);
        else if (key == "trainer.max_response_len") cfg.trainer.max_response_len = parse_int(key, value);
        else if (key == "trainer.temperature") cfg.trainer.temperature = parse_double(key, value);
        else if (key == "trainer.std_floor") cfg.trainer.std_floor = parse_double(key, value);
        else if (key == "run.seed") cfg.seed = parse_u64(key, value);
        else if (key == "run.steps") cfg.steps = parse_int(key, value);
        else if (key == "run.checkpoint_interval") cfg.checkpoint_interval = parse_int(key, value);
        else if (key == "run.record_timing") cfg.record_timing = parse_bool(key, value);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    validate(cfg.trainer);
    if (cfg.steps < 0) throw std::invalid_argument("config: key 'run.steps' must be >= 0");
    if (cfg.checkpoint_interval < 0)
        throw std::invalid_argument("config: key 'run.checkpoint_interval' must be >= 0");
    if (cfg.task.difficulty_min < 1 || cfg.task.difficulty_max < cfg.task.difficulty_min)
        throw std::invalid_argument("config: task difficulty range is invalid");
    if (cfg.dims.vocab < Vocabulary::kMinSize)
        throw std::invalid_argument("config: key 'policy.vocab' must be >= 17 for task tokens");
    return cfg;
}

ConfigMap config_map_of(const RunConfig& cfg) {
    ConfigMap m;
    m.set("task.kind", cfg.task.kind == TaskKind::format_answer ? "format_answer" : "binary");
    m.set("task.difficulty_min", std::to_string(cfg.task.difficulty_min));
    m.set("task.difficulty_max", std::to_string(cfg.task.difficulty_max));
    m.set("task.bits_per_slot", std::to_string(cfg.task.bits_per_slot));
    m.set("task.format_correct", fmt_double(cfg.task.reward.format_correct));
    m.set("task.format_wrong", fmt_double(cfg.task.reward.format_wrong));
    m.set("task.answer_correct", fmt_double(cfg.task.reward.answer_correct));
    m.set("task.answer_partial", fmt_double(cfg.task.reward.answer_partial));
    m.set("task.answer_wrong", fmt_double(cfg.task.reward.answer_wrong));
    m.set("task.binary_correct", fmt_double(cfg.task.binary_correct));
    m.set("task.binary_wrong", fmt_double(cfg.task.binary_wrong));
    m.set("policy.vocab", std::to_string(cfg.dims.vocab));
    m.set("policy.embed", std::to_string(cfg.dims.embed));
    m.set("policy.context", std::to_string(cfg.dims.context));
    std::string hidden;
    for (size_t i = 0; i < cfg.dims.hidden.size(); ++i)
        hidden += (i ? "," : "") + std::to_string(cfg.dims.hidden[i]);
    m.set("policy.hidden", hidden);
    m.set("trainer.algorithm", cfg.trainer.algorithm == Algorithm::grpo ? "grpo" : "rpp");
    m.set("trainer.eps_low", fmt_double(cfg.trainer.eps_low));
    m.set("trainer.eps_high", fmt_double(cfg.trainer.eps_high));
    m.set("trainer.beta", fmt_double(cfg.trainer.beta));
    m.set("trainer.reweight", cfg.trainer.reweight_on ? "1" : "0");
    m.set("trainer.alpha", fmt_double(cfg.trainer.alpha));
    m.set("trainer.lopti_order", cfg.trainer.lopti_order == LoptiOrder::off
                                     ? "off"
                                     : (cfg.trainer.lopti_order == LoptiOrder::low_first ? "low_first"
                                                                                         : "high_first"));
    m.set("trainer.eta", fmt_double(cfg.trainer.eta));
    m.set("trainer.mask_high_ablation", cfg.trainer.mask_high_ablation ? "1" : "0");
    m.set("trainer.optimizer", cfg.trainer.optimizer == OptimizerKind::adamw ? "adamw" : "sgd");
    m.set("trainer.lr", fmt_double(cfg.trainer.lr));
    m.set("trainer.adam_beta1", fmt_double(cfg.trainer.adam_beta1));
    m.set("trainer.adam_beta2", fmt_double(cfg.trainer.adam_beta2));
    m.set("trainer.adam_eps", fmt_double(cfg.trainer.adam_eps));
    m.set("trainer.weight_decay", fmt_double(cfg.trainer.weight_decay));
    m.set("trainer.group_size", std::to_string(cfg.trainer.group_size));
    m.set("trainer.prompts_per_batch", std::to_string(cfg.trainer.prompts_per_batch));
    m.set("trainer.epochs", std::to_string(cfg.trainer.epochs));
    m.set("trainer.minibatch_responses", std::to_string(cfg.trainer.minibatch_responses));
    m.set("trainer.max_response_len", std::to_string(cfg.trainer.max_response_len));
    m.set("trainer.temperature", fmt_double(cfg.trainer.temperature));
    m.set("trainer.std_floor", fmt_double(cfg.trainer.std_floor));
    m.set("run.seed", std::to_string(cfg.seed));
    m.set("run.steps", std::to_string(cfg.steps));
    m.set("run.checkpoint_interval", std::to_string(cfg.checkpoint_interval));
    m.set("run.record_timing", cfg.record_timing ? "1" : "0");
    return m;
}

std::string serialize(const RunConfig& cfg) {
    const ConfigMap m = config_map_of(cfg);
    std::string out;
    for (const auto& [key, value] : m.kv) out += key + " = " + value + "\n";
    return out;
}

}  // namespace tokenlab
