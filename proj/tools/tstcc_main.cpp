#include "tstcc/cli_commands.hpp"
#include "tstcc/parallel.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    if (const char* cap = std::getenv("TSTCC_THREADS")) {
        const int n = std::atoi(cap);
        if (n > 0) tstcc::exec::set_thread_cap(n);
    }

    CLI::App app{
        "tstcc - contrastive representation learning for time series.\n"
        "Training defaults: 40 epochs, batch size 128, Adam lr 3e-4, weight decay 3e-4,\n"
        "beta1 0.9, beta2 0.99, temperature tau 0.2, lambda1 1, lambda2 0.7, lambda3 0.01,\n"
        "lambda4 0.7, transformer h 100 / 4 layers / 4 heads / dropout 0.1, segments M 10,\n"
        "scaling ratio 2, prediction horizon 40% of the latent length."};
    app.require_subcommand(1);

    // convert
    auto* convert = app.add_subcommand("convert", "Convert a CSV (C*T floats + label) to TSD1");
    std::string csv_in, tsd_out;
    int64_t conv_c = 1, conv_t = 0, conv_k = 2;
    convert->add_option("csv", csv_in, "input CSV path")->required();
    convert->add_option("out", tsd_out, "output .tsd path")->required();
    convert->add_option("--channels", conv_c, "channels per sample (default 1)");
    convert->add_option("--timesteps", conv_t, "timesteps per sample")->required();
    convert->add_option("--classes", conv_k, "number of classes (default 2)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic train/test TSD1 pair");
    std::string synth_config;
    int64_t s_np = 0, s_ch = 0, s_ts = 0, s_cl = 0;
    double s_noise = 0;
    uint64_t s_seed = 0;
    std::string s_train, s_test;
    synth->add_option("--config", synth_config, "config file with a [synth] section");
    synth->add_option("--n-per-class", s_np, "samples per class (default 200)");
    synth->add_option("--channels", s_ch, "channels (default 1)");
    synth->add_option("--timesteps", s_ts, "timesteps (default 128)");
    synth->add_option("--classes", s_cl, "classes (default 3)");
    synth->add_option("--noise", s_noise, "noise sigma (default 0.3)");
    synth->add_option("--seed", s_seed, "seed (default 1); test set uses a disjoint stream");
    synth->add_option("--out-train", s_train, "output train path (default train.tsd)");
    synth->add_option("--out-test", s_test, "output test path (default test.tsd)");

    // run
    auto* run = app.add_subcommand(
        "run",
        "Run a training protocol: tstcc (pretrain + fine-tune), catcc (4 phases + fine-tune),\n"
        "supervised (train from scratch on the labeled fraction), random_init (linear probe\n"
        "on a frozen random encoder). Config file defaults: epochs 40, batch_size 128,\n"
        "lr 3e-4, weight decay 3e-4, tau 0.2, lambda1 1, lambda2 0.7, lambda3 0.01, lambda4 0.7.");
    std::string run_protocol_name, run_config;
    tstcc::cli::RunOverrides overrides;
    uint64_t run_seed = 0;
    double run_fraction = 0;
    std::string run_ablation, run_out;
    run->add_option("protocol", run_protocol_name, "tstcc|catcc|supervised|random_init")
        ->required();
    run->add_option("--config", run_config, "run config file")->required();
    run->add_option("--seed", run_seed, "override [train] seed");
    run->add_option("--labels-fraction", run_fraction,
                    "override [train] labels_fraction, stratified so every class is present");
    run->add_option("--ablation", run_ablation,
                    "none|tc_only|tc_xaug|weak_only|strong_only (tc_only = no cross-view\n"
                    "prediction and no contextual term)");
    run->add_option("--out", run_out, "override [train] out_dir");
    run->add_flag("--dry-run", overrides.dry_run, "validate config and data shapes, skip training");

    // report
    auto* report = app.add_subcommand("report", "Aggregate run reports into mean +/- std rows");
    std::vector<std::string> report_dirs;
    bool report_group = false;
    report->add_option("dirs", report_dirs, "run directories")->required()->expected(-1);
    report->add_flag("--group", report_group, "aggregate per protocol when protocols differ");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Print a TSD1 file header");
    std::string inspect_path;
    inspect->add_option("file", inspect_path, "TSD1 path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : tstcc::cli::kExitConfig;
    }

    if (convert->parsed())
        return tstcc::cli::cmd_convert(csv_in, tsd_out, conv_c, conv_t, conv_k);

    if (synth->parsed()) {
        tstcc::RunConfig cfg;
        if (!synth_config.empty()) {
            try {
                cfg = tstcc::parse_config_file(synth_config);
            } catch (const tstcc::ConfigError& e) {
                std::fprintf(stderr, "config error: %s\n", e.what());
                return tstcc::cli::kExitConfig;
            }
        }
        if (synth->count("--n-per-class")) cfg.synth_n_per_class = s_np;
        if (synth->count("--channels")) cfg.synth_channels = s_ch;
        if (synth->count("--timesteps")) cfg.synth_timesteps = s_ts;
        if (synth->count("--classes")) cfg.synth_classes = s_cl;
        if (synth->count("--noise")) cfg.synth_noise_sigma = s_noise;
        if (synth->count("--seed")) cfg.synth_seed = s_seed;
        if (synth->count("--out-train")) cfg.synth_out_train = s_train;
        if (synth->count("--out-test")) cfg.synth_out_test = s_test;
        return tstcc::cli::cmd_synth(cfg);
    }

    if (run->parsed()) {
        if (run->count("--seed")) overrides.seed = run_seed;
        if (run->count("--labels-fraction")) overrides.labels_fraction = run_fraction;
        if (run->count("--ablation")) overrides.ablation = run_ablation;
        if (run->count("--out")) overrides.out_dir = run_out;
        return tstcc::cli::cmd_run(run_protocol_name, run_config, overrides);
    }

    if (report->parsed()) return tstcc::cli::cmd_report(report_dirs, report_group);

    if (inspect->parsed()) return tstcc::cli::cmd_inspect(inspect_path);

    return tstcc::cli::kExitConfig;
}
