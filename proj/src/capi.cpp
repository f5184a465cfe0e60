#include "tokenlab.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <string>

#include "tokenlab/config.hpp"
#include "tokenlab/experiment.hpp"

using namespace tokenlab;

struct tl_config {
    ConfigMap map;
};

namespace {

thread_local std::string g_last_error;

tl_status fail(tl_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

bool mentions(const std::string& msg, const char* what) { return msg.find(what) != std::string::npos; }

// Exceptions out of the core carry no category, so the shim classifies by
// type first and by message for the runtime_error grab bag.
tl_status classify(const std::exception& e) {
    const std::string msg = e.what();
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return fail(TL_ERR_IO, msg);
    if (dynamic_cast<const std::invalid_argument*>(&e)) return fail(TL_ERR_INVALID_ARGUMENT, msg);
    if (mentions(msg, "open") || mentions(msg, "truncated") || mentions(msg, "checkpoint"))
        return fail(TL_ERR_IO, msg);
    if (mentions(msg, "finite") || mentions(msg, "diverged")) return fail(TL_ERR_NUMERIC, msg);
    return fail(TL_ERR_INTERNAL, msg);
}

template <typename Fn>
tl_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        return fn();
    } catch (const std::exception& e) {
        return classify(e);
    } catch (...) {
        return fail(TL_ERR_INTERNAL, "unknown error");
    }
}

}  // namespace

extern "C" {

const char* tl_version(void) { return "0.1.0"; }

const char* tl_last_error(void) { return g_last_error.c_str(); }

tl_config* tl_config_create(void) {
    try {
        auto* cfg = new tl_config;
        cfg->map = config_map_of(RunConfig{});
        return cfg;
    } catch (...) {
        return nullptr;
    }
}

void tl_config_destroy(tl_config* cfg) { delete cfg; }

tl_status tl_config_load(tl_config* cfg, const char* path) {
    if (!cfg || !path) return fail(TL_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        ConfigMap merged = cfg->map;
        try {
            const ConfigMap file = ConfigMap::parse_file(path);
            for (const auto& [k, v] : file.kv) merged.set(k, v);
            run_config_from(merged);
        } catch (const std::exception& e) {
            const std::string msg = e.what();
            if (mentions(msg, "open")) return fail(TL_ERR_IO, msg);
            return fail(TL_ERR_CONFIG, msg);
        }
        cfg->map = merged;
        return TL_OK;
    });
}

tl_status tl_config_set(tl_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) return fail(TL_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        ConfigMap probe = cfg->map;
        probe.set(key, value);
        try {
            run_config_from(probe);
        } catch (const std::exception& e) {
            return fail(TL_ERR_CONFIG, e.what());
        }
        cfg->map = probe;
        return TL_OK;
    });
}

tl_status tl_config_get(const tl_config* cfg, const char* key, char* buf, size_t buflen) {
    if (!cfg || !key || !buf || buflen == 0) return fail(TL_ERR_INVALID_ARGUMENT, "null argument");
    const auto it = cfg->map.kv.find(key);
    if (it == cfg->map.kv.end()) return fail(TL_ERR_INVALID_ARGUMENT, std::string("no such key: ") + key);
    if (it->second.size() + 1 > buflen)
        return fail(TL_ERR_INVALID_ARGUMENT, "buffer too small for value of " + it->first);
    std::memcpy(buf, it->second.c_str(), it->second.size() + 1);
    g_last_error.clear();
    return TL_OK;
}

tl_status tl_train(const tl_config* cfg, const char* out_dir, tl_train_summary* summary) {
    if (!cfg || !out_dir) return fail(TL_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        RunConfig rc;
        try {
            rc = run_config_from(cfg->map);
        } catch (const std::exception& e) {
            return fail(TL_ERR_CONFIG, e.what());
        }
        const TrainSummary s = cmd_train(rc, out_dir);
        if (summary) {
            summary->steps = s.steps;
            summary->baseline_mean_reward = s.baseline_mean_reward;
            summary->final_mean_reward = s.final_mean_reward;
        }
        return TL_OK;
    });
}

tl_status tl_diagnose(const tl_config* cfg, const char* checkpoint_path, const char* out_dir) {
    if (!cfg || !checkpoint_path || !out_dir) return fail(TL_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        RunConfig rc;
        try {
            rc = run_config_from(cfg->map);
        } catch (const std::exception& e) {
            return fail(TL_ERR_CONFIG, e.what());
        }
        cmd_diagnose(rc, checkpoint_path, out_dir);
        return TL_OK;
    });
}

tl_status tl_verify_bounds(int trials, unsigned long long seed, const char* csv_path, int* violations) {
    if (!violations) return fail(TL_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        *violations = cmd_verify_bounds(trials, seed, csv_path ? csv_path : std::string());
        return TL_OK;
    });
}

tl_status tl_ablate(const tl_config* cfg, const char* which, const char* out_dir) {
    if (!cfg || !which || !out_dir) return fail(TL_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        RunConfig rc;
        try {
            rc = run_config_from(cfg->map);
        } catch (const std::exception& e) {
            return fail(TL_ERR_CONFIG, e.what());
        }
        cmd_ablate(rc, which, out_dir);
        return TL_OK;
    });
}

}  // extern "C"
