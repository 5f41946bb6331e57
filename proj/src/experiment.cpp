#include "afrelay/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "afrelay/channel_model.hpp"
#include "afrelay/designer.hpp"
#include "afrelay/errors.hpp"
#include "afrelay/mse_engine.hpp"
#include "afrelay/oracle.hpp"
#include "afrelay/rng.hpp"

namespace afrelay {

std::string_view algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::RobustFull: return "robust_full";
        case Algorithm::RobustNoPre: return "robust_nopre";
        case Algorithm::Naive: return "naive";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
    if (name == "robust_full") return Algorithm::RobustFull;
    if (name == "robust_nopre") return Algorithm::RobustNoPre;
    if (name == "naive") return Algorithm::Naive;
    throw InvalidInput("algorithms: unknown algorithm '" + std::string(name) + "'");
}

namespace {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

void require(bool ok, const std::string& field, const std::string& why) {
    if (!ok) throw InvalidInput(field + ": " + why);
}

}  // namespace

void ExperimentSpec::validate() const {
    require(n_s >= 1, "n_s", "must be >= 1");
    require(m_r >= 1, "m_r", "must be >= 1");
    require(n_r >= 1, "n_r", "must be >= 1");
    require(m_d >= 1, "m_d", "must be >= 1");
    require(n_streams >= 1, "n_streams", "must be >= 1");
    require(n_streams <= std::min({n_s, m_r, n_r, m_d}), "n_streams",
            "must not exceed any antenna count");
    require(alpha >= 0.0 && alpha < 1.0, "alpha", "must lie in [0, 1)");
    require(p_s > 0.0 && std::isfinite(p_s), "p_s", "must be positive");
    require(p_r > 0.0 && std::isfinite(p_r), "p_r", "must be positive");
    require(std::isfinite(source_snr_db), "source_snr_db", "must be finite");
    require(std::isfinite(relay_snr_db), "relay_snr_db", "must be finite");
    require(!est_snr_db.empty(), "est_snr_db", "sweep must be nonempty");
    for (double v : est_snr_db) {
        require(!std::isnan(v) && v != -std::numeric_limits<double>::infinity(), "est_snr_db",
                "entries must be numbers or \"inf\"");
    }
    require(static_cast<Eigen::Index>(weights.size()) == n_streams, "weights",
            "must have n_streams entries");
    for (double w : weights) require(w >= 0.0 && std::isfinite(w), "weights", "must be >= 0");
    require(n_channel_draws >= 1, "n_channel_draws", "must be >= 1");
    require(n_symbols >= 1, "n_symbols", "must be >= 1");
    require(!algorithms.empty(), "algorithms", "must be nonempty");
    require(max_failed_fraction >= 0.0 && max_failed_fraction <= 1.0, "max_failed_fraction",
            "must lie in [0, 1]");
}

SystemConfig ExperimentSpec::system_config() const {
    SystemConfig cfg;
    cfg.n_s = n_s;
    cfg.m_r = m_r;
    cfg.n_r = n_r;
    cfg.m_d = m_d;
    cfg.n_streams = n_streams;
    cfg.p_s = p_s;
    cfg.p_r = p_r;
    cfg.sigma1_sq = p_s / db_to_linear(source_snr_db);
    cfg.sigma2_sq = p_r / db_to_linear(relay_snr_db);
    RVector w(n_streams);
    for (Eigen::Index i = 0; i < n_streams; ++i) w(i) = weights[static_cast<std::size_t>(i)];
    cfg.weight = w.cast<Complex>().asDiagonal();
    return cfg;
}

namespace {

template <typename T>
T get_field(const nlohmann::json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(key + ": " + e.what());
    }
}

double parse_snr_entry(const nlohmann::json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "Infinity")) {
        return std::numeric_limits<double>::infinity();
    }
    throw InvalidInput("est_snr_db: entries must be numbers or \"inf\"");
}

}  // namespace

ExperimentSpec parse_spec(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidInput("config: top level must be a JSON object");
    ExperimentSpec s;
    for (const auto& [key, v] : j.items()) {
        if (key == "n_s") s.n_s = get_field<Eigen::Index>(v, key);
        else if (key == "m_r") s.m_r = get_field<Eigen::Index>(v, key);
        else if (key == "n_r") s.n_r = get_field<Eigen::Index>(v, key);
        else if (key == "m_d") s.m_d = get_field<Eigen::Index>(v, key);
        else if (key == "n_streams") s.n_streams = get_field<Eigen::Index>(v, key);
        else if (key == "alpha") s.alpha = get_field<double>(v, key);
        else if (key == "p_s") s.p_s = get_field<double>(v, key);
        else if (key == "p_r") s.p_r = get_field<double>(v, key);
        else if (key == "source_snr_db") s.source_snr_db = get_field<double>(v, key);
        else if (key == "relay_snr_db") s.relay_snr_db = get_field<double>(v, key);
        else if (key == "est_snr_db") {
            if (!v.is_array()) throw InvalidInput("est_snr_db: must be an array");
            s.est_snr_db.clear();
            for (const auto& e : v) s.est_snr_db.push_back(parse_snr_entry(e));
        } else if (key == "weights") s.weights = get_field<std::vector<double>>(v, key);
        else if (key == "n_channel_draws") {
            if (!v.is_number_integer() || v.get<long long>() < 1) {
                throw InvalidInput("n_channel_draws: must be a positive integer");
            }
            s.n_channel_draws = v.get<std::size_t>();
        } else if (key == "n_symbols") {
            if (!v.is_number_integer() || v.get<long long>() < 1) {
                throw InvalidInput("n_symbols: must be a positive integer");
            }
            s.n_symbols = v.get<std::size_t>();
        } else if (key == "seed") {
            if (!v.is_number_unsigned()) throw InvalidInput("seed: must be a nonnegative integer");
            s.seed = v.get<std::uint64_t>();
        } else if (key == "algorithms") {
            if (!v.is_array()) throw InvalidInput("algorithms: must be an array");
            s.algorithms.clear();
            for (const auto& a : v) {
                if (!a.is_string()) throw InvalidInput("algorithms: entries must be strings");
                s.algorithms.push_back(parse_algorithm(a.get<std::string>()));
            }
        } else if (key == "threads") s.threads = get_field<unsigned>(v, key);
        else if (key == "max_failed_fraction") s.max_failed_fraction = get_field<double>(v, key);
        else throw InvalidInput(key + ": unknown configuration key");
    }
    s.validate();
    return s;
}

nlohmann::json spec_to_json(const ExperimentSpec& s) {
    nlohmann::json j;
    j["n_s"] = s.n_s;
    j["m_r"] = s.m_r;
    j["n_r"] = s.n_r;
    j["m_d"] = s.m_d;
    j["n_streams"] = s.n_streams;
    j["alpha"] = s.alpha;
    j["p_s"] = s.p_s;
    j["p_r"] = s.p_r;
    j["source_snr_db"] = s.source_snr_db;
    j["relay_snr_db"] = s.relay_snr_db;
    nlohmann::json sweep = nlohmann::json::array();
    for (double v : s.est_snr_db) {
        if (std::isinf(v)) sweep.push_back("inf");
        else sweep.push_back(v);
    }
    j["est_snr_db"] = sweep;
    j["weights"] = s.weights;
    j["n_channel_draws"] = s.n_channel_draws;
    j["n_symbols"] = s.n_symbols;
    j["seed"] = s.seed;
    nlohmann::json algs = nlohmann::json::array();
    for (auto a : s.algorithms) algs.push_back(std::string(algorithm_name(a)));
    j["algorithms"] = algs;
    j["threads"] = s.threads;
    j["max_failed_fraction"] = s.max_failed_fraction;
    return j;
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

struct DrawOutcome {
    bool failed = false;
    double analytic = 0.0;
    double empirical = 0.0;
    std::size_t bit_errors = 0;
};

Transceiver design_for(Algorithm alg, const SystemConfig& cfg, const ChannelKnowledge& know) {
    switch (alg) {
        case Algorithm::RobustFull: return design(cfg, know).tx;
        case Algorithm::RobustNoPre:
            return design_relay_only(cfg, know, scaled_identity_precoder(cfg)).tx;
        case Algorithm::Naive: {
            const ChannelKnowledge believed = know.perfect();
            Transceiver tx = design(cfg, believed).tx;
            // The relay meets its budget on the signal it actually receives.
            const auto stats = second_order_stats(cfg, know, tx.precoder, tx.forward);
            const double power = (tx.forward * stats.r_x * tx.forward.adjoint()).trace().real();
            tx.forward *= std::sqrt(cfg.p_r / power);
            tx.equalizer = optimal_equalizer(cfg, believed, tx.precoder, tx.forward);
            return tx;
        }
    }
    throw InvalidInput("unknown algorithm");
}

// Sends n_symbols QPSK vectors through the drawn true channels.
void transmit(const SystemConfig& cfg, const TrueChannelDraw& truth, const Transceiver& tx,
              std::size_t n_symbols, RngStream rng, DrawOutcome& out) {
    double wmse_sum = 0.0;
    std::size_t errors = 0;
    const Eigen::Index n = cfg.n_streams;
    const CMatrix link = truth.h_rd * tx.forward;
    for (std::size_t k = 0; k < n_symbols; ++k) {
        CVector s(n);
        std::vector<std::uint64_t> bits(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            bits[static_cast<std::size_t>(i)] = rng.bits() & 3U;
            const auto b = bits[static_cast<std::size_t>(i)];
            s(i) = Complex((b & 1U) ? -kInvSqrt2 : kInvSqrt2, (b & 2U) ? -kInvSqrt2 : kInvSqrt2);
        }
        CVector n1(cfg.m_r);
        for (Eigen::Index i = 0; i < cfg.m_r; ++i) n1(i) = rng.complex_gaussian(cfg.sigma1_sq);
        CVector n2(cfg.m_d);
        for (Eigen::Index i = 0; i < cfg.m_d; ++i) n2(i) = rng.complex_gaussian(cfg.sigma2_sq);

        const CVector x = truth.h_sr * (tx.precoder * s) + n1;
        const CVector y = link * x + n2;
        const CVector est = tx.equalizer * y;
        const CVector e = est - s;
        wmse_sum += (e.adjoint() * cfg.weight * e)(0, 0).real();
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto b = bits[static_cast<std::size_t>(i)];
            errors += static_cast<std::size_t>((est(i).real() < 0.0) != ((b & 1U) != 0));
            errors += static_cast<std::size_t>((est(i).imag() < 0.0) != ((b & 2U) != 0));
        }
    }
    out.empirical = wmse_sum / static_cast<double>(n_symbols);
    out.bit_errors = errors;
}

double snr_linear(double db) {
    return std::isinf(db) ? std::numeric_limits<double>::infinity() : db_to_linear(db);
}

}  // namespace

std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const SystemConfig cfg = spec.system_config();
    cfg.validate();
    const std::size_t n_alg = spec.algorithms.size();
    const std::size_t draws = spec.n_channel_draws;
    const RngStream root(spec.seed);

    std::vector<ExperimentRecord> records;
    for (std::size_t point = 0; point < spec.est_snr_db.size(); ++point) {
        const double snr_db = spec.est_snr_db[point];
        const RngStream point_rng = root.split(point);
        std::vector<DrawOutcome> outcomes(draws * n_alg);

        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        auto worker = [&]() {
            for (std::size_t d = next++; d < draws; d = next++) {
                try {
                    const RngStream draw_rng = point_rng.split(d);
                    RngStream channel_rng = draw_rng.split(0);
                    const Scenario sc =
                        sample_scenario(cfg, snr_linear(snr_db), spec.alpha, channel_rng);
                    for (std::size_t a = 0; a < n_alg; ++a) {
                        DrawOutcome& out = outcomes[d * n_alg + a];
                        Transceiver tx;
                        try {
                            tx = design_for(spec.algorithms[a], cfg, sc.knowledge);
                        } catch (const ConvergenceFailure&) {
                            out.failed = true;
                            continue;
                        }
                        out.analytic = weighted_mse(cfg, sc.knowledge, tx);
                        // Same symbols and noise for every algorithm within a draw.
                        transmit(cfg, sc.truth, tx, spec.n_symbols, draw_rng.split(1), out);
                    }
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = draws;
                }
            }
        };
        unsigned n_threads = spec.threads != 0 ? spec.threads : std::thread::hardware_concurrency();
        n_threads = std::max(1U, std::min<unsigned>(n_threads, static_cast<unsigned>(draws)));
        if (n_threads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        if (error) std::rethrow_exception(error);

        for (std::size_t a = 0; a < n_alg; ++a) {
            ExperimentRecord rec;
            rec.est_snr_db = snr_db;
            rec.algorithm = spec.algorithms[a];
            rec.n_draws = draws;
            rec.seed = spec.seed;
            double sum_a = 0.0, sum_e = 0.0, sum_d = 0.0, sum_d2 = 0.0;
            std::size_t bit_errors = 0, ok = 0;
            for (std::size_t d = 0; d < draws; ++d) {
                const DrawOutcome& o = outcomes[d * n_alg + a];
                if (o.failed) {
                    ++rec.n_failed;
                    continue;
                }
                ++ok;
                sum_a += o.analytic;
                sum_e += o.empirical;
                const double diff = o.empirical - o.analytic;
                sum_d += diff;
                sum_d2 += diff * diff;
                bit_errors += o.bit_errors;
            }
            if (ok > 0) {
                const double n = static_cast<double>(ok);
                rec.wmse_analytic = sum_a / n;
                rec.wmse_empirical = sum_e / n;
                const double var = ok > 1 ? std::max(0.0, (sum_d2 - sum_d * sum_d / n) / (n - 1.0)) : 0.0;
                rec.wmse_std_error = std::sqrt(var / n);
                rec.ber = static_cast<double>(bit_errors) /
                          (2.0 * n * static_cast<double>(cfg.n_streams) *
                           static_cast<double>(spec.n_symbols));
            } else {
                rec.wmse_analytic = rec.wmse_empirical = rec.ber =
                    std::numeric_limits<double>::quiet_NaN();
            }
            records.push_back(rec);
        }
    }
    return records;
}

namespace {

std::string fmt12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

constexpr const char* kCsvHeader =
    "est_snr_db,algorithm,wmse_analytic,wmse_empirical,ber,n_draws,n_failed,seed";

}  // namespace

std::string format_csv(std::vector<ExperimentRecord> records, const std::string& metadata) {
    std::stable_sort(records.begin(), records.end(),
                     [](const ExperimentRecord& a, const ExperimentRecord& b) {
                         if (a.est_snr_db != b.est_snr_db) return a.est_snr_db < b.est_snr_db;
                         return algorithm_name(a.algorithm) < algorithm_name(b.algorithm);
                     });
    std::ostringstream out;
    if (!metadata.empty()) out << "# " << metadata << '\n';
    out << kCsvHeader << '\n';
    for (const auto& r : records) {
        out << fmt12(r.est_snr_db) << ',' << algorithm_name(r.algorithm) << ','
            << fmt12(r.wmse_analytic) << ',' << fmt12(r.wmse_empirical) << ',' << fmt12(r.ber)
            << ',' << r.n_draws << ',' << r.n_failed << ',' << r.seed << '\n';
    }
    return out.str();
}

void emit_csv(const std::vector<ExperimentRecord>& records, const std::string& path,
              const std::string& metadata) {
    if (records.empty()) throw InvalidInput("emit_csv: no records to write");
    const std::string text = format_csv(records, metadata);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("emit_csv: cannot open '" + path + "' for writing");
    file << text;
    file.flush();
    if (!file) throw Error("emit_csv: write to '" + path + "' failed");
}

std::vector<ExperimentRecord> parse_csv(std::istream& in) {
    std::vector<ExperimentRecord> out;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != kCsvHeader) throw InvalidInput("parse_csv: unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8) throw InvalidInput("parse_csv: expected 8 columns in '" + line + "'");
        ExperimentRecord r;
        r.est_snr_db = std::stod(cells[0]);
        r.algorithm = parse_algorithm(cells[1]);
        r.wmse_analytic = std::stod(cells[2]);
        r.wmse_empirical = std::stod(cells[3]);
        r.ber = std::stod(cells[4]);
        r.n_draws = std::stoull(cells[5]);
        r.n_failed = std::stoull(cells[6]);
        r.seed = std::stoull(cells[7]);
        out.push_back(r);
    }
    return out;
}

bool run_selftest(const ExperimentSpec& spec, std::ostream& log) {
    spec.validate();
    const SystemConfig cfg = spec.system_config();
    bool all_ok = true;
    auto report = [&](const std::string& name, bool ok, const std::string& detail) {
        log << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
        all_ok = all_ok && ok;
    };

    const RngStream root(spec.seed);
    const double snr = snr_linear(spec.est_snr_db.front());
    constexpr int kScenarios = 3;
    for (int k = 0; k < kScenarios; ++k) {
        RngStream rng = root.split(static_cast<std::uint64_t>(k));
        const Scenario sc = sample_scenario(cfg, snr, spec.alpha, rng);
        const TransceiverSolution sol = design(cfg, sc.knowledge);
        const std::string tag = "[scenario " + std::to_string(k) + "] ";

        const double analytic = weighted_mse(cfg, sc.knowledge, sol.tx);
        const McEstimate mc = empirical_weighted_mse(cfg, sc.knowledge, sol.tx, 20000,
                                                     spec.seed + static_cast<std::uint64_t>(k));
        const double z = std::abs(mc.mean - analytic) / std::max(mc.std_error, 1e-300);
        report(tag + "analytic vs Monte-Carlo weighted MSE",
               std::abs(mc.mean - analytic) <= 3.0 * mc.std_error + 1e-12,
               "analytic=" + fmt12(analytic) + " empirical=" + fmt12(mc.mean) + " z=" + fmt12(z));

        const double rel = std::abs(sol.achieved_wmse - analytic) / std::max(analytic, 1e-300);
        report(tag + "residual MSE equals MSE at optimal equalizer", rel <= 1e-9,
               "rel=" + fmt12(rel));

        const auto stats = second_order_stats(cfg, sc.knowledge, sol.tx.precoder, sol.tx.forward);
        const double ps = sol.tx.precoder.squaredNorm();
        const double pr =
            (sol.tx.forward * stats.r_x * sol.tx.forward.adjoint()).trace().real();
        const double perr = std::max(std::abs(ps - cfg.p_s) / cfg.p_s, std::abs(pr - cfg.p_r) / cfg.p_r);
        report(tag + "power constraints active", perr <= 1e-9, "rel=" + fmt12(perr));

        const RVector& w = sol.weight_eig.values;
        const RVector& gs = sol.spectral.gain_sr;
        const RVector& gr = sol.spectral.gain_rd;
        const auto relay = waterfill_relay(sol.alloc.p_alloc, gs, gr, w, cfg.p_r);
        const auto source = waterfill_source(sol.alloc.f_alloc, gs, gr, w, cfg.p_s);
        const RVector a = sol.alloc.p_alloc.cwiseAbs2().cwiseProduct(gs.cwiseAbs2());
        const RVector b = sol.alloc.f_alloc.cwiseAbs2().cwiseProduct(gr.cwiseAbs2());
        const RVector qr = w.cwiseProduct(a.cwiseQuotient((a.array() + 1.0).matrix()));
        const RVector qs = w.cwiseProduct(b.cwiseQuotient((b.array() + 1.0).matrix()));
        const double kkt =
            std::max(waterfill_kkt_residual(qr, gr, relay), waterfill_kkt_residual(qs, gs, source));
        report(tag + "water-filling KKT residual", kkt <= 1e-8, "max=" + fmt12(kkt));

        const double eta_fp = (sol.tx.precoder * sol.tx.precoder.adjoint() *
                               sc.knowledge.stats_sr.col_cov).trace().real() + cfg.sigma1_sq;
        const double eta_rel = std::abs(sol.alloc.eta_p - eta_fp) / sol.alloc.eta_p;
        report(tag + "eta_p fixed point", eta_rel <= 1e-9, "rel=" + fmt12(eta_rel));
    }
    return all_ok;
}

}  // namespace afrelay
