#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tstcc/cli_commands.hpp"
#include "tstcc/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace tstcc;

namespace {

std::string write_temp(const char* name, const std::string& body) {
    const std::string path = std::string("/tmp/tstcc_cli_") + name;
    std::ofstream out(path, std::ios::trunc);
    out << body;
    return path;
}

}  // namespace

TEST_CASE("config parser: defaults, overrides, snapshot round-trip") {
    RunConfig defaults;
    CHECK(defaults.epochs == 40);
    CHECK(defaults.batch_size == 128);
    CHECK(defaults.weights.tau == 0.2);
    CHECK(defaults.hidden_dim == 100);
    CHECK(defaults.layers == 4);
    CHECK(defaults.heads == 4);
    CHECK(defaults.dropout == 0.1);
    CHECK(defaults.augment.max_segments == 10);
    CHECK(defaults.augment.weak_scale_sigma == 2.0);

    const std::string path = write_temp("ok.ini",
                                        "[train]\n"
                                        "epochs = 7\n"
                                        "seed = 42\n"
                                        "[loss]\n"
                                        "lambda2 = 0.5\n"
                                        "[ablation]\n"
                                        "views = weak_only\n");
    RunConfig cfg = parse_config_file(path);
    CHECK(cfg.epochs == 7);
    CHECK(cfg.seed == 42);
    CHECK(cfg.weights.lambda2 == 0.5);
    CHECK(cfg.views == ViewFamily::weak_only);
    CHECK(cfg.batch_size == 128);  // untouched default

    RunConfig again = parse_config_text(cfg.snapshot());
    CHECK(again.epochs == cfg.epochs);
    CHECK(again.seed == cfg.seed);
    CHECK(again.weights.lambda2 == cfg.weights.lambda2);
    CHECK(again.views == cfg.views);
    CHECK(again.snapshot() == cfg.snapshot());
    std::remove(path.c_str());
}

TEST_CASE("config parser rejects unknown keys and malformed lines") {
    CHECK_THROWS_WITH_AS(parse_config_text("[train]\nepochz = 3\n"),
                         doctest::Contains("unknown key"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("[nosuch]\nx = 1\n"), doctest::Contains("unknown key"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("epochs = 3\n"), doctest::Contains("outside"),
                         ConfigError);
    CHECK_THROWS_AS(parse_config_text("[train]\nepochs == 3x\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[train]\nepochs = many\n"), ConfigError);
}

TEST_CASE("ablation flags map onto the switches") {
    RunConfig cfg;
    apply_ablation(cfg, "tc_only");
    CHECK(cfg.cross_view == false);
    CHECK(cfg.contextual == ContextualMode::off);

    cfg = RunConfig{};
    apply_ablation(cfg, "tc_xaug");
    CHECK(cfg.cross_view == true);
    CHECK(cfg.contextual == ContextualMode::off);

    cfg = RunConfig{};
    apply_ablation(cfg, "weak_only");
    CHECK(cfg.views == ViewFamily::weak_only);
    apply_ablation(cfg, "strong_only");
    CHECK(cfg.views == ViewFamily::strong_only);

    CHECK_THROWS_AS(apply_ablation(cfg, "bogus"), ConfigError);
}

TEST_CASE("convert: toy CSV becomes a loadable TSD1, bad rows exit nonzero") {
    const std::string csv = write_temp("toy.csv",
                                       "0.0,0.5,1.0,1.5,0\n"
                                       "1.0,1.5,2.0,2.5,1\n");
    const std::string out = "/tmp/tstcc_cli_toy.tsd";
    CHECK(cli::cmd_convert(csv, out, 1, 4, 2) == cli::kExitOk);
    Dataset d = load_dataset(out);
    CHECK(d.n() == 2);
    CHECK(d.timesteps() == 4);

    const std::string bad = write_temp("bad.csv",
                                       "0,0,0,0,0\n0,0,0,0,0\n0,0,0,0,0\n0,0,0,0,0\nx,0,0,0,0\n");
    CHECK(cli::cmd_convert(bad, out, 1, 4, 2) == cli::kExitData);
    std::remove(csv.c_str());
    std::remove(bad.c_str());
    std::remove(out.c_str());
}

TEST_CASE("synth: fixed seed gives identical files, classes as requested") {
    RunConfig cfg;
    cfg.synth_n_per_class = 3;
    cfg.synth_timesteps = 16;
    cfg.synth_classes = 4;
    cfg.synth_out_train = "/tmp/tstcc_cli_synth_train.tsd";
    cfg.synth_out_test = "/tmp/tstcc_cli_synth_test.tsd";
    CHECK(cli::cmd_synth(cfg) == cli::kExitOk);
    Dataset train1 = load_dataset(cfg.synth_out_train);
    CHECK(train1.n() == 12);
    CHECK(train1.num_classes() == 4);

    CHECK(cli::cmd_synth(cfg) == cli::kExitOk);
    Dataset train2 = load_dataset(cfg.synth_out_train);
    for (int64_t i = 0; i < train1.samples().numel(); ++i)
        CHECK(train1.samples()[i] == train2.samples()[i]);

    Dataset test = load_dataset(cfg.synth_out_test);
    bool differs = false;
    for (int64_t i = 0; i < test.samples().numel() && !differs; ++i)
        differs = test.samples()[i] != train1.samples()[i];
    CHECK(differs);  // disjoint seed stream
    std::remove(cfg.synth_out_train.c_str());
    std::remove(cfg.synth_out_test.c_str());
}

TEST_CASE("run: missing files and bad config exit before training") {
    const std::string cfg_path = write_temp("run.ini",
                                            "[data]\n"
                                            "train = /nonexistent/train.tsd\n"
                                            "test = /nonexistent/test.tsd\n");
    cli::RunOverrides ov;
    CHECK(cli::cmd_run("tstcc", cfg_path, ov) == cli::kExitData);
    CHECK(cli::cmd_run("bogus_protocol", cfg_path, ov) == cli::kExitConfig);
    CHECK(cli::cmd_run("tstcc", "/nonexistent/config.ini", ov) == cli::kExitConfig);

    const std::string bad_cfg = write_temp("bad.ini", "[train]\nbatch_size = 0\n");
    CHECK(cli::cmd_run("tstcc", bad_cfg, ov) == cli::kExitConfig);
    std::remove(cfg_path.c_str());
    std::remove(bad_cfg.c_str());
}

TEST_CASE("run: dry-run validates shapes without training") {
    RunConfig synth;
    synth.synth_n_per_class = 4;
    synth.synth_timesteps = 32;
    synth.synth_out_train = "/tmp/tstcc_cli_dr_train.tsd";
    synth.synth_out_test = "/tmp/tstcc_cli_dr_test.tsd";
    REQUIRE(cli::cmd_synth(synth) == cli::kExitOk);

    const std::string cfg_path = write_temp("dry.ini",
                                            "[data]\n"
                                            "train = /tmp/tstcc_cli_dr_train.tsd\n"
                                            "test = /tmp/tstcc_cli_dr_test.tsd\n"
                                            "[model]\n"
                                            "feature_dim = 8\n"
                                            "hidden_dim = 16\n"
                                            "layers = 1\n"
                                            "heads = 2\n");
    cli::RunOverrides ov;
    ov.dry_run = true;
    CHECK(cli::cmd_run("catcc", cfg_path, ov) == cli::kExitOk);
    std::remove(cfg_path.c_str());
    std::remove(synth.synth_out_train.c_str());
    std::remove(synth.synth_out_test.c_str());
}

TEST_CASE("report: aggregates seed directories, single dir std is 0") {
    namespace fs = std::filesystem;
    const std::string base = "/tmp/tstcc_cli_reports";
    fs::remove_all(base);
    for (int seed = 1; seed <= 3; ++seed) {
        const std::string dir = base + "/s" + std::to_string(seed);
        fs::create_directories(dir);
        RunReport rep;
        rep.protocol = Protocol::tstcc;
        rep.seed = static_cast<uint64_t>(seed);
        rep.labels_fraction = 0.1;
        rep.test.accuracy = 0.8 + 0.01 * seed;
        rep.test.mf1 = 0.75 + 0.01 * seed;
        rep.test.f1 = {0.7, 0.8};
        write_report_csv(dir + "/report.csv", rep);
    }
    CHECK(cli::cmd_report({base + "/s1", base + "/s2", base + "/s3"}, false) == cli::kExitOk);
    CHECK(cli::cmd_report({base + "/s1"}, false) == cli::kExitOk);
    CHECK(cli::cmd_report({base + "/missing"}, false) == cli::kExitData);

    // mixed protocols need --group
    RunReport other;
    other.protocol = Protocol::supervised;
    other.seed = 9;
    other.labels_fraction = 0.1;
    other.test.f1 = {0.5, 0.5};
    fs::create_directories(base + "/sup");
    write_report_csv(base + "/sup/report.csv", other);
    CHECK(cli::cmd_report({base + "/s1", base + "/sup"}, false) == cli::kExitData);
    CHECK(cli::cmd_report({base + "/s1", base + "/sup"}, true) == cli::kExitOk);
    fs::remove_all(base);
}

TEST_CASE("inspect prints header fields for valid files and fails on junk") {
    RunConfig synth;
    synth.synth_n_per_class = 2;
    synth.synth_timesteps = 16;
    synth.synth_out_train = "/tmp/tstcc_cli_ins_train.tsd";
    synth.synth_out_test = "/tmp/tstcc_cli_ins_test.tsd";
    REQUIRE(cli::cmd_synth(synth) == cli::kExitOk);
    CHECK(cli::cmd_inspect(synth.synth_out_train) == cli::kExitOk);
    const std::string junk = write_temp("junk.tsd", "not a dataset");
    CHECK(cli::cmd_inspect(junk) == cli::kExitData);
    std::remove(junk.c_str());
    std::remove(synth.synth_out_train.c_str());
    std::remove(synth.synth_out_test.c_str());
}

TEST_CASE("percent formatting rounds half to even at one decimal") {
    CHECK(cli::format_percent(0.735) == "73.5");
    CHECK(cli::format_percent(0.73349) == "73.3");
    // ties: 0.1 percent steps — 84.25% -> 84.2 (even), 84.35% -> 84.4
    CHECK(cli::format_percent(0.8425) == "84.2");
    CHECK(cli::format_percent(0.8435) == "84.4");
    CHECK(cli::format_percent(1.0) == "100.0");
    CHECK(cli::format_percent(0.0) == "0.0");
}
