#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "afrelay/linalg.hpp"
#include "afrelay/system_config.hpp"

namespace afrelay {

enum class Algorithm {
    RobustFull,   // joint robust precoder + forwarding + equalizer
    RobustNoPre,  // robust forwarding + equalizer, fixed scaled-identity precoder
    Naive,        // joint design that treats the estimates as exact
};

std::string_view algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

/// One sweep over estimation SNR. Defaults reproduce the 4x4x4x4, alpha = 0.3,
/// 30 dB, W = diag{0.3, 0.3, 0.2, 0.2} configuration.
struct ExperimentSpec {
    Eigen::Index n_s = 4;
    Eigen::Index m_r = 4;
    Eigen::Index n_r = 4;
    Eigen::Index m_d = 4;
    Eigen::Index n_streams = 4;
    double alpha = 0.3;
    double p_s = 1.0;
    double p_r = 1.0;
    double source_snr_db = 30.0;  // P_s / sigma1^2
    double relay_snr_db = 30.0;   // P_r / sigma2^2
    std::vector<double> est_snr_db{0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0};  // +inf = perfect CSI
    std::vector<double> weights{0.3, 0.3, 0.2, 0.2};  // diagonal of W
    std::size_t n_channel_draws = 1000;
    std::size_t n_symbols = 100;
    std::uint64_t seed = 1;
    std::vector<Algorithm> algorithms{Algorithm::RobustFull, Algorithm::RobustNoPre,
                                      Algorithm::Naive};
    unsigned threads = 0;              // 0 = hardware concurrency
    double max_failed_fraction = 0.05;  // per record, before the run counts as failed

    // Throws InvalidInput naming the offending field.
    void validate() const;
    SystemConfig system_config() const;
};

// Unknown keys and ill-typed values throw InvalidInput naming the key.
ExperimentSpec parse_spec(const nlohmann::json& j);
nlohmann::json spec_to_json(const ExperimentSpec& spec);

struct ExperimentRecord {
    double est_snr_db = 0.0;
    Algorithm algorithm = Algorithm::RobustFull;
    double wmse_analytic = 0.0;    // mean expected weighted MSE given the estimates
    double wmse_empirical = 0.0;   // mean measured weighted MSE over transmitted symbols
    double wmse_std_error = 0.0;   // std error of the per-draw empirical - analytic difference
    double ber = 0.0;
    std::size_t n_draws = 0;
    std::size_t n_failed = 0;      // draws whose design failed; excluded from the means
    std::uint64_t seed = 0;
};

/// Runs every (est_snr, draw, algorithm) combination. Draws are distributed
/// over a worker pool; each draw's randomness comes from (seed, point, draw),
/// so results do not depend on the thread count.
std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec);

// Header plus one row per record, sorted by (est_snr_db, algorithm name).
// A nonempty `metadata` is written first as a '#' comment line.
std::string format_csv(std::vector<ExperimentRecord> records, const std::string& metadata = {});
void emit_csv(const std::vector<ExperimentRecord>& records, const std::string& path,
              const std::string& metadata = {});
std::vector<ExperimentRecord> parse_csv(std::istream& in);

/// Oracle-agreement checks on scenarios drawn from `spec` (first sweep point):
/// analytic vs Monte-Carlo MSE, equalizer identity, power constraints,
/// water-filling KKT and the eta_p fixed point. Writes one line per check.
bool run_selftest(const ExperimentSpec& spec, std::ostream& log);

}  // namespace afrelay
