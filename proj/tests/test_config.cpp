#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "tokenlab/config.hpp"

using namespace tokenlab;

TEST_CASE("key=value parsing with comments and whitespace") {
    ConfigMap m = ConfigMap::parse_string(
        "# run setup\n"
        "\n"
        "  trainer.lr =  0.5  \n"
        "run.seed=9\n"
        "policy.hidden = 16,8 # trailing comment\n");
    CHECK(m.kv.at("trainer.lr") == "0.5");
    CHECK(m.kv.at("run.seed") == "9");
    CHECK(m.kv.at("policy.hidden") == "16,8");

    CHECK_THROWS_WITH_AS(ConfigMap::parse_string("just words\n"),
                         doctest::Contains("line 1"), std::invalid_argument);
    CHECK_THROWS_AS(ConfigMap::parse_string("=1\n"), std::invalid_argument);
}

TEST_CASE("defaults survive an empty map") {
    RunConfig cfg = run_config_from(ConfigMap{});
    CHECK(cfg.trainer.eps_low == 0.2);
    CHECK(cfg.trainer.eps_high == 0.24);
    CHECK(cfg.trainer.beta == 0.001);
    CHECK(cfg.trainer.lr == 1e-6);
    CHECK(cfg.trainer.group_size == 8);
    CHECK(cfg.seed == 1);
    CHECK(cfg.steps == 200);
    CHECK(cfg.trainer.lopti_order == LoptiOrder::off);
}

TEST_CASE("unknown keys and bad values are named in the error") {
    ConfigMap unknown;
    unknown.set("trainer.learning_rate", "0.1");
    CHECK_THROWS_WITH_AS(run_config_from(unknown), doctest::Contains("trainer.learning_rate"),
                         std::invalid_argument);

    ConfigMap bad;
    bad.set("trainer.lr", "fast");
    CHECK_THROWS_WITH_AS(run_config_from(bad), doctest::Contains("trainer.lr"), std::invalid_argument);

    ConfigMap badbool;
    badbool.set("trainer.reweight", "yes");
    CHECK_THROWS_AS(run_config_from(badbool), std::invalid_argument);

    ConfigMap badenum;
    badenum.set("trainer.lopti_order", "both");
    CHECK_THROWS_WITH_AS(run_config_from(badenum), doctest::Contains("low_first"), std::invalid_argument);

    ConfigMap badlist;
    badlist.set("policy.hidden", "16,,8");
    CHECK_THROWS_AS(run_config_from(badlist), std::invalid_argument);
}

TEST_CASE("enum fields parse every spelling") {
    ConfigMap m;
    m.set("task.kind", "binary");
    m.set("trainer.algorithm", "rpp");
    m.set("trainer.lopti_order", "high_first");
    m.set("trainer.optimizer", "sgd");
    m.set("trainer.eta", "0.5");
    RunConfig cfg = run_config_from(m);
    CHECK(cfg.task.kind == TaskKind::binary);
    CHECK(cfg.trainer.algorithm == Algorithm::rpp);
    CHECK(cfg.trainer.lopti_order == LoptiOrder::high_first);
    CHECK(cfg.trainer.optimizer == OptimizerKind::sgd);
}

TEST_CASE("serialized snapshots reproduce the run exactly") {
    RunConfig cfg;
    cfg.task.kind = TaskKind::binary;
    cfg.task.difficulty_min = 2;
    cfg.task.difficulty_max = 6;
    cfg.task.binary_correct = 1.0 / 3.0;  // needs full precision
    cfg.dims.vocab = 19;
    cfg.dims.hidden = {48, 24};
    cfg.trainer.algorithm = Algorithm::rpp;
    cfg.trainer.lr = 2e-3;
    cfg.trainer.beta = 0.1 + 0.2;
    cfg.trainer.reweight_on = true;
    cfg.trainer.alpha = 0.3;
    cfg.trainer.lopti_order = LoptiOrder::low_first;
    cfg.trainer.minibatch_responses = 3;
    cfg.seed = 987654321098765ull;
    cfg.steps = 77;
    cfg.record_timing = true;

    const std::string text = serialize(cfg);
    CHECK(text == serialize(cfg));  // deterministic
    CHECK(text.rfind("policy.context = ", 0) == 0);  // sorted keys

    RunConfig back = run_config_from(ConfigMap::parse_string(text));
    CHECK(back.task.kind == cfg.task.kind);
    CHECK(back.task.difficulty_max == 6);
    CHECK(back.task.binary_correct == cfg.task.binary_correct);
    CHECK(back.dims.vocab == 19);
    CHECK(back.dims.hidden == std::vector<int>{48, 24});
    CHECK(back.trainer.algorithm == Algorithm::rpp);
    CHECK(back.trainer.lr == cfg.trainer.lr);
    CHECK(back.trainer.beta == cfg.trainer.beta);
    CHECK(back.trainer.reweight_on);
    CHECK(back.trainer.lopti_order == LoptiOrder::low_first);
    CHECK(back.trainer.minibatch_responses == 3);
    CHECK(back.seed == cfg.seed);
    CHECK(back.steps == 77);
    CHECK(back.record_timing);
    CHECK(serialize(back) == text);  // full fixed point
}

TEST_CASE("overrides replace single keys") {
    ConfigMap m;
    m.set("trainer.lr", "0.1");
    apply_override(m, "trainer.lr=0.2");
    CHECK(m.kv.at("trainer.lr") == "0.2");
    apply_override(m, "policy.hidden=32,16");
    CHECK(m.kv.at("policy.hidden") == "32,16");
    // splits at the first '='
    apply_override(m, "task.kind=binary=nope");
    CHECK(m.kv.at("task.kind") == "binary=nope");
    CHECK_THROWS_AS(apply_override(m, "no_equals_here"), std::invalid_argument);
}

TEST_CASE("config-level validation catches unrunnable setups") {
    ConfigMap steps;
    steps.set("run.steps", "-1");
    CHECK_THROWS_AS(run_config_from(steps), std::invalid_argument);

    ConfigMap vocab;
    vocab.set("policy.vocab", "16");
    CHECK_THROWS_WITH_AS(run_config_from(vocab), doctest::Contains("policy.vocab"), std::invalid_argument);

    ConfigMap diff;
    diff.set("task.difficulty_min", "5");
    diff.set("task.difficulty_max", "2");
    CHECK_THROWS_AS(run_config_from(diff), std::invalid_argument);

    ConfigMap group;
    group.set("trainer.group_size", "1");
    CHECK_THROWS_AS(run_config_from(group), std::invalid_argument);
}

TEST_CASE("file parsing") {
    const std::string path = "/tmp/tokenlab_test_config.cfg";
    {
        std::ofstream out(path);
        out << "# preset\ntrainer.lr = 0.005\nrun.steps = 12\n";
    }
    ConfigMap m = ConfigMap::parse_file(path);
    RunConfig cfg = run_config_from(m);
    CHECK(cfg.trainer.lr == 0.005);
    CHECK(cfg.steps == 12);
    std::remove(path.c_str());

    CHECK_THROWS_AS(ConfigMap::parse_file("/tmp/definitely_missing_config_file.cfg"), std::runtime_error);
}
