#pragma once

#include "tstcc/config.hpp"
#include "tstcc/pipeline.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tstcc::cli {

// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct RunOverrides {
    std::optional<uint64_t> seed;
    std::optional<double> labels_fraction;
    std::optional<std::string> ablation;
    std::optional<std::string> out_dir;
    bool dry_run = false;
};

int cmd_convert(const std::string& csv_in, const std::string& tsd_out, int64_t channels,
                int64_t timesteps, int64_t num_classes);

int cmd_synth(const RunConfig& cfg);

int cmd_run(const std::string& protocol, const std::string& config_path,
            const RunOverrides& overrides);

int cmd_report(const std::vector<std::string>& run_dirs, bool group);

int cmd_inspect(const std::string& path);

// Percentage with one decimal, ties rounded half to even.
std::string format_percent(double value01);

}  // namespace tstcc::cli
