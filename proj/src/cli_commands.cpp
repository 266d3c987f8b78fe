#include "tstcc/cli_commands.hpp"

#include "tstcc/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace tstcc::cli {

namespace {

template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

uint64_t fnv1a(const std::string& bytes) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::string format_percent(double value01) {
    // nearbyint under the default FE_TONEAREST mode rounds ties to even
    const double tenths = std::nearbyint(value01 * 1000.0);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", tenths / 10.0);
    return buf;
}

int cmd_convert(const std::string& csv_in, const std::string& tsd_out, int64_t channels,
                int64_t timesteps, int64_t num_classes) {
    return guarded([&]() {
        Dataset d = dataset_from_csv(csv_in, channels, timesteps, num_classes);
        save_dataset(d, tsd_out);
        std::ifstream in(tsd_out, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        std::printf("rows=%lld checksum=%016llx\n", static_cast<long long>(d.n()),
                    static_cast<unsigned long long>(fnv1a(ss.str())));
        return kExitOk;
    });
}

int cmd_synth(const RunConfig& cfg) {
    return guarded([&]() {
        cfg.validate();
        Dataset train = make_synthetic(cfg.synth_n_per_class, cfg.synth_channels,
                                       cfg.synth_timesteps, cfg.synth_classes,
                                       cfg.synth_noise_sigma, cfg.synth_seed);
        Dataset test = make_synthetic(cfg.synth_n_per_class, cfg.synth_channels,
                                      cfg.synth_timesteps, cfg.synth_classes,
                                      cfg.synth_noise_sigma, cfg.synth_seed ^ 0x9E3779B97F4A7C15ULL);
        save_dataset(train, cfg.synth_out_train);
        save_dataset(test, cfg.synth_out_test);
        std::printf("wrote %s (%lld samples) and %s (%lld samples)\n", cfg.synth_out_train.c_str(),
                    static_cast<long long>(train.n()), cfg.synth_out_test.c_str(),
                    static_cast<long long>(test.n()));
        return kExitOk;
    });
}

int cmd_run(const std::string& protocol, const std::string& config_path,
            const RunOverrides& overrides) {
    return guarded([&]() {
        RunConfig cfg = parse_config_file(config_path);
        if (overrides.seed) cfg.seed = *overrides.seed;
        if (overrides.labels_fraction) cfg.labels_fraction = *overrides.labels_fraction;
        if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
        if (overrides.ablation) apply_ablation(cfg, *overrides.ablation);
        cfg.validate();

        const Protocol p = protocol_from_string(protocol);

        if (overrides.dry_run) {
            Dataset train = load_dataset(cfg.train_path);
            Dataset test = load_dataset(cfg.test_path);
            if (train.channels() != test.channels() || train.timesteps() != test.timesteps() ||
                train.num_classes() != test.num_classes())
                throw DataError("dry run: train and test datasets have different shapes");
            cfg.model_config(train.channels(), train.timesteps(), train.num_classes()).validate();
            cfg.augment.validate(train.timesteps());
            std::printf("dry run ok: %s, %lld train / %lld test samples\n",
                        protocol_name(p).c_str(), static_cast<long long>(train.n()),
                        static_cast<long long>(test.n()));
            return kExitOk;
        }

        RunReport report = run_protocol(p, cfg);
        std::printf("protocol=%s seed=%llu labels_fraction=%g\n",
                    protocol_name(report.protocol).c_str(),
                    static_cast<unsigned long long>(report.seed), report.labels_fraction);
        std::printf("accuracy = %s\n", format_percent(report.test.accuracy).c_str());
        std::printf("mf1 = %s\n", format_percent(report.test.mf1).c_str());
        return kExitOk;
    });
}

int cmd_report(const std::vector<std::string>& run_dirs, bool group) {
    return guarded([&]() {
        struct Row {
            std::string protocol;
            double fraction;
            double accuracy;
            double mf1;
        };
        std::vector<Row> rows;
        for (const std::string& dir : run_dirs) {
            const std::string path = dir + "/report.csv";
            std::ifstream in(path);
            if (!in) throw DataError(path + ": cannot open report");
            std::string header, line;
            if (!std::getline(in, header)) throw DataError(path + ": empty report");
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                std::stringstream ss(line);
                std::string cell;
                std::vector<std::string> cells;
                while (std::getline(ss, cell, ',')) cells.push_back(cell);
                if (cells.size() < 5) throw DataError(path + ": malformed report row");
                rows.push_back({cells[0], std::stod(cells[2]), std::stod(cells[3]),
                                std::stod(cells[4])});
            }
        }
        if (rows.empty()) throw DataError("report: no rows found");

        std::set<std::string> protocols;
        for (const auto& r : rows) protocols.insert(r.protocol);
        if (protocols.size() > 1 && !group)
            throw DataError("report: runs mix protocols; pass --group to aggregate per protocol");

        std::map<std::pair<std::string, double>, std::vector<Row>> groups;
        for (const auto& r : rows) groups[{r.protocol, r.fraction}].push_back(r);

        std::printf("protocol,labels_fraction,runs,accuracy_mean,accuracy_std,mf1_mean,mf1_std\n");
        for (const auto& [key, members] : groups) {
            auto stats = [&](auto getter) {
                double mean = 0;
                for (const auto& r : members) mean += getter(r);
                mean /= static_cast<double>(members.size());
                double var = 0;
                for (const auto& r : members) {
                    const double d = getter(r) - mean;
                    var += d * d;
                }
                const double std_dev =
                    members.size() > 1 ? std::sqrt(var / static_cast<double>(members.size() - 1))
                                       : 0.0;
                return std::pair<double, double>(mean, std_dev);
            };
            const auto [am, as] = stats([](const Row& r) { return r.accuracy; });
            const auto [fm, fs] = stats([](const Row& r) { return r.mf1; });
            std::printf("%s,%g,%zu,%.6f,%.6f,%.6f,%.6f\n", key.first.c_str(), key.second,
                        members.size(), am, as, fm, fs);
        }
        return kExitOk;
    });
}

int cmd_inspect(const std::string& path) {
    return guarded([&]() {
        Dataset d = load_dataset(path);
        int64_t labeled = 0;
        for (int64_t y : d.labels())
            if (y >= 0) ++labeled;
        std::printf("format=TSD1 version=1\n");
        std::printf("samples=%lld channels=%lld timesteps=%lld classes=%lld\n",
                    static_cast<long long>(d.n()), static_cast<long long>(d.channels()),
                    static_cast<long long>(d.timesteps()),
                    static_cast<long long>(d.num_classes()));
        std::printf("labeled=%lld unlabeled=%lld\n", static_cast<long long>(labeled),
                    static_cast<long long>(d.n() - labeled));
        return kExitOk;
    });
}

}  // namespace tstcc::cli
