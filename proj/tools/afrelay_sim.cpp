// Command-line driver for the relay sweep.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "afrelay/errors.hpp"
#include "afrelay/experiment.hpp"

namespace {

enum Exit { kOk = 0, kFail = 1, kUsage = 2, kTooManyFailures = 3 };

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust AF MIMO relay transceiver sweep"};
    std::string config_path;
    std::string out_path;
    std::string mode = "sweep";
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "JSON experiment config")->required();
    app.add_option("--out", out_path, "CSV output path (sweep/single)");
    auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
    app.add_option("--mode", mode, "sweep | single | selftest")
        ->check(CLI::IsMember({"sweep", "single", "selftest"}));
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    afrelay::ExperimentSpec spec;
    try {
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << "error: cannot open config '" << config_path << "'\n";
            return kUsage;
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            std::cerr << "error: config is not valid JSON: " << e.what() << '\n';
            return kUsage;
        }
        spec = afrelay::parse_spec(j);
        if (*seed_opt) spec.seed = seed;
    } catch (const afrelay::InvalidInput& e) {
        std::cerr << "error: invalid config: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (mode == "selftest") {
            return afrelay::run_selftest(spec, std::cout) ? kOk : kFail;
        }
        if (out_path.empty()) {
            std::cerr << "error: --out is required in " << mode << " mode\n";
            return kUsage;
        }
        if (mode == "single") spec.est_snr_db.resize(1);
        const auto records = afrelay::run_experiment(spec);
        afrelay::emit_csv(records, out_path, afrelay::spec_to_json(spec).dump());
        bool too_many = false;
        for (const auto& r : records) {
            const double frac = static_cast<double>(r.n_failed) / static_cast<double>(r.n_draws);
            std::printf("%-8g %-13s analytic=%.6g empirical=%.6g (+-%.2g) ber=%.4g failed=%zu/%zu\n",
                        r.est_snr_db, std::string(afrelay::algorithm_name(r.algorithm)).c_str(),
                        r.wmse_analytic, r.wmse_empirical, r.wmse_std_error, r.ber, r.n_failed,
                        r.n_draws);
            if (frac > spec.max_failed_fraction) too_many = true;
        }
        if (too_many) {
            std::cerr << "error: failed-design fraction above " << spec.max_failed_fraction << '\n';
            return kTooManyFailures;
        }
        return kOk;
    } catch (const afrelay::InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFail;
    }
}
