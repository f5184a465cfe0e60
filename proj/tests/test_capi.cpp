#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "tokenlab.h"

namespace fs = std::filesystem;

namespace {

struct ConfigGuard {
    tl_config* cfg;
    ConfigGuard() : cfg(tl_config_create()) {}
    ~ConfigGuard() { tl_config_destroy(cfg); }
};

std::string get_value(const tl_config* cfg, const char* key) {
    char buf[256];
    REQUIRE(tl_config_get(cfg, key, buf, sizeof buf) == TL_OK);
    return buf;
}

// ~17-token net, two groups of two, a handful of steps: quick but real
void make_tiny(tl_config* cfg) {
    REQUIRE(tl_config_set(cfg, "policy.vocab", "17") == TL_OK);
    REQUIRE(tl_config_set(cfg, "policy.embed", "4") == TL_OK);
    REQUIRE(tl_config_set(cfg, "policy.context", "4") == TL_OK);
    REQUIRE(tl_config_set(cfg, "policy.hidden", "8") == TL_OK);
    REQUIRE(tl_config_set(cfg, "task.difficulty_min", "1") == TL_OK);
    REQUIRE(tl_config_set(cfg, "task.difficulty_max", "1") == TL_OK);
    REQUIRE(tl_config_set(cfg, "trainer.group_size", "2") == TL_OK);
    REQUIRE(tl_config_set(cfg, "trainer.prompts_per_batch", "2") == TL_OK);
    REQUIRE(tl_config_set(cfg, "trainer.max_response_len", "3") == TL_OK);
    REQUIRE(tl_config_set(cfg, "trainer.lr", "0.001") == TL_OK);
    REQUIRE(tl_config_set(cfg, "run.steps", "2") == TL_OK);
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

}  // namespace

TEST_CASE("version and error channel") {
    REQUIRE(tl_version() != nullptr);
    CHECK(std::strlen(tl_version()) > 0);
    // last error starts empty and is cleared by a successful call
    ConfigGuard g;
    REQUIRE(g.cfg != nullptr);
    CHECK(tl_config_set(g.cfg, "bogus.key", "1") == TL_ERR_CONFIG);
    CHECK(std::strlen(tl_last_error()) > 0);
    CHECK(tl_config_set(g.cfg, "run.steps", "3") == TL_OK);
    CHECK(std::strlen(tl_last_error()) == 0);
}

TEST_CASE("config carries defaults and validates mutations") {
    ConfigGuard g;
    REQUIRE(g.cfg != nullptr);
    CHECK(get_value(g.cfg, "trainer.group_size") == "8");
    CHECK(get_value(g.cfg, "trainer.optimizer") == "adamw");
    CHECK(get_value(g.cfg, "run.steps") == "200");

    CHECK(tl_config_set(g.cfg, "trainer.group_size", "4") == TL_OK);
    CHECK(get_value(g.cfg, "trainer.group_size") == "4");

    // rejected mutations leave the store untouched
    CHECK(tl_config_set(g.cfg, "trainer.group_size", "1") == TL_ERR_CONFIG);
    CHECK(get_value(g.cfg, "trainer.group_size") == "4");
    CHECK(tl_config_set(g.cfg, "trainer.lr", "banana") == TL_ERR_CONFIG);
    CHECK(get_value(g.cfg, "trainer.lr") == "9.9999999999999995e-07");
    CHECK(tl_config_set(g.cfg, "no.such.key", "1") == TL_ERR_CONFIG);
    CHECK(std::string(tl_last_error()).find("no.such.key") != std::string::npos);
}

TEST_CASE("config get edge cases") {
    ConfigGuard g;
    char buf[4];
    CHECK(tl_config_get(g.cfg, "missing.key", buf, sizeof buf) == TL_ERR_INVALID_ARGUMENT);
    CHECK(tl_config_get(g.cfg, "run.steps", buf, 2) == TL_ERR_INVALID_ARGUMENT);  // "200" needs 4
    CHECK(tl_config_get(g.cfg, "run.steps", buf, 4) == TL_OK);
    CHECK(std::string(buf) == "200");
    CHECK(tl_config_get(g.cfg, "run.steps", nullptr, 8) == TL_ERR_INVALID_ARGUMENT);
    CHECK(tl_config_get(nullptr, "run.steps", buf, sizeof buf) == TL_ERR_INVALID_ARGUMENT);
}

TEST_CASE("null arguments are rejected everywhere") {
    ConfigGuard g;
    tl_train_summary s;
    int v = 0;
    CHECK(tl_config_load(nullptr, "x") == TL_ERR_INVALID_ARGUMENT);
    CHECK(tl_config_load(g.cfg, nullptr) == TL_ERR_INVALID_ARGUMENT);
    CHECK(tl_config_set(g.cfg, nullptr, "1") == TL_ERR_INVALID_ARGUMENT);
    CHECK(tl_train(nullptr, "/tmp", &s) == TL_ERR_INVALID_ARGUMENT);
    CHECK(tl_train(g.cfg, nullptr, &s) == TL_ERR_INVALID_ARGUMENT);
    CHECK(tl_diagnose(g.cfg, nullptr, "/tmp") == TL_ERR_INVALID_ARGUMENT);
    CHECK(tl_verify_bounds(5, 1, nullptr, nullptr) == TL_ERR_INVALID_ARGUMENT);
    CHECK(tl_ablate(g.cfg, nullptr, "/tmp") == TL_ERR_INVALID_ARGUMENT);
    (void)v;
}

TEST_CASE("config load merges files") {
    const fs::path path = "/tmp/tokenlab_capi_load.cfg";
    {
        std::ofstream out(path);
        out << "trainer.lr = 0.5\nrun.steps = 7\n";
    }
    ConfigGuard g;
    REQUIRE(tl_config_load(g.cfg, path.string().c_str()) == TL_OK);
    CHECK(get_value(g.cfg, "trainer.lr") == "0.5");
    CHECK(get_value(g.cfg, "run.steps") == "7");
    CHECK(get_value(g.cfg, "trainer.group_size") == "8");  // untouched default
    fs::remove(path);

    CHECK(tl_config_load(g.cfg, "/tmp/definitely_missing.cfg") == TL_ERR_IO);

    const fs::path bad = "/tmp/tokenlab_capi_bad.cfg";
    {
        std::ofstream out(bad);
        out << "unknown.key = 1\n";
    }
    CHECK(tl_config_load(g.cfg, bad.string().c_str()) == TL_ERR_CONFIG);
    CHECK(get_value(g.cfg, "run.steps") == "7");  // merge rolled back
    fs::remove(bad);
}

TEST_CASE("train, diagnose, ablate round trip through the shared library") {
    const fs::path dir = "/tmp/tokenlab_capi_run";
    fs::remove_all(dir);
    ConfigGuard g;
    REQUIRE(g.cfg != nullptr);
    make_tiny(g.cfg);

    tl_train_summary summary{};
    REQUIRE(tl_train(g.cfg, dir.string().c_str(), &summary) == TL_OK);
    CHECK(summary.steps == 2);
    CHECK(fs::exists(dir / "train_log.csv"));
    CHECK(fs::exists(dir / "resolved_config.cfg"));
    CHECK(fs::exists(dir / "checkpoint_final.bin"));
    CHECK(first_line(dir / "train_log.csv") == "# schema: tokenlab.train_log v1");

    const fs::path diag = dir / "diag";
    REQUIRE(tl_diagnose(g.cfg, (dir / "checkpoint_final.bin").string().c_str(), diag.string().c_str()) ==
            TL_OK);
    CHECK(fs::exists(diag / "update_report.csv"));
    CHECK(fs::exists(diag / "direction_naive.csv"));
    CHECK(fs::exists(diag / "direction_reweight.csv"));
    CHECK(fs::exists(diag / "selective_g1.csv"));

    CHECK(tl_diagnose(g.cfg, "/tmp/no_such_checkpoint.bin", diag.string().c_str()) == TL_ERR_IO);

    const fs::path abl = dir / "abl";
    REQUIRE(tl_ablate(g.cfg, "mask_high", abl.string().c_str()) == TL_OK);
    CHECK(fs::exists(abl / "comparison.csv"));
    CHECK(first_line(abl / "comparison.csv") == "# schema: tokenlab.ablation_report v1");

    CHECK(tl_ablate(g.cfg, "no_such_matrix", abl.string().c_str()) == TL_ERR_INVALID_ARGUMENT);

    fs::remove_all(dir);
}

TEST_CASE("bound certification through the shared library") {
    int violations = -1;
    REQUIRE(tl_verify_bounds(25, 7, nullptr, &violations) == TL_OK);
    CHECK(violations == 0);

    const fs::path csv = "/tmp/tokenlab_capi_bounds.csv";
    fs::remove(csv);
    int v2 = -1;
    REQUIRE(tl_verify_bounds(10, 3, csv.string().c_str(), &v2) == TL_OK);
    CHECK(v2 == 0);
    CHECK(first_line(csv) == "# schema: tokenlab.bound_report v1");
    fs::remove(csv);
}
