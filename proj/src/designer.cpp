#include "afrelay/designer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "afrelay/errors.hpp"
#include "afrelay/rng.hpp"

namespace afrelay {
namespace {

// Returns c when m == c I (to 1e-10 relative); nullopt otherwise.
std::optional<double> scalar_multiple_of_identity(const CMatrix& m) {
    const double c = m.trace().real() / static_cast<double>(m.rows());
    const double dev = (m - c * CMatrix::Identity(m.rows(), m.cols())).norm();
    if (dev > 1e-10 * std::max(1.0, m.norm())) return std::nullopt;
    return c;
}

// The closed-form structure needs Sigma_sr and Psi_rd proportional to the
// identity; the scalar is folded into the other factor.
std::pair<CMatrix, CMatrix> effective_error_covariances(const ChannelKnowledge& know) {
    CMatrix psi_sr = know.stats_sr.col_cov;
    CMatrix sigma_rd = know.stats_rd.row_cov;
    if (psi_sr.norm() > 0.0) {
        const auto c = scalar_multiple_of_identity(know.stats_sr.row_cov);
        if (!c) throw InvalidInput("design: first-hop row covariance must be a multiple of I");
        psi_sr *= *c;
    }
    if (sigma_rd.norm() > 0.0) {
        const auto d = scalar_multiple_of_identity(know.stats_rd.col_cov);
        if (!d) throw InvalidInput("design: second-hop column covariance must be a multiple of I");
        sigma_rd *= *d;
    }
    return {hermitian_part(psi_sr), hermitian_part(sigma_rd)};
}

RVector squared(const RVector& v) { return v.cwiseProduct(v); }

void require_same_size(const RVector& a, const RVector& b, const RVector& c, const RVector& d,
                       const char* what) {
    const auto n = a.size();
    if (b.size() != n || c.size() != n || d.size() != n) {
        throw InvalidInput(std::string(what) + ": allocation, gain and weight sizes differ");
    }
}

bool nonincreasing(const RVector& v) {
    const double scale = v.size() > 0 ? v.cwiseAbs().maxCoeff() : 0.0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(i - 1) + 1e-9 * scale) return false;
    }
    return true;
}

}  // namespace

OrderedHermitianEig weight_eigensystem(const CMatrix& weight) {
    auto eig = eig_hermitian_ordered(weight);
    const Eigen::Index n = eig.values.size();
    if (n == 0) throw InvalidInput("weight_eigensystem: empty weight matrix");
    const double scale = std::max(std::abs(eig.values(0)), std::abs(eig.values(n - 1)));
    for (Eigen::Index i = 0; i < n; ++i) {
        if (eig.values(i) < -1e-10 * scale) {
            throw NotPositiveSemidefinite("weight_eigensystem: weight matrix is indefinite");
        }
        eig.values(i) = std::max(eig.values(i), 0.0);
    }
    return eig;
}

SpectralData spectral_decompose(const SystemConfig& cfg, const ChannelKnowledge& know) {
    cfg.validate();
    know.validate(cfg);
    const auto [psi_sr, sigma_rd] = effective_error_covariances(know);
    const Eigen::Index n = cfg.n_streams;

    SpectralData s;
    s.psi_sr = psi_sr;
    s.source_whitener =
        herm_inv_sqrt(cfg.p_s * psi_sr + cfg.sigma1_sq * CMatrix::Identity(cfg.n_s, cfg.n_s));
    s.first_hop = svd_ordered(know.est_sr * s.source_whitener);

    s.k2 = hermitian_part(cfg.p_r * sigma_rd + cfg.sigma2_sq * CMatrix::Identity(cfg.m_d, cfg.m_d));
    s.second_hop = svd_ordered(herm_inv_sqrt(s.k2) * know.est_rd);

    s.gain_sr = s.first_hop.sigma.head(n);
    s.gain_rd = s.second_hop.sigma.head(n);
    return s;
}

WaterfillResult weighted_waterfill(const RVector& coeffs, const RVector& gains, double budget) {
    if (coeffs.size() != gains.size()) throw InvalidInput("weighted_waterfill: size mismatch");
    if (!(budget > 0.0) || !std::isfinite(budget)) {
        throw InvalidInput("weighted_waterfill: budget must be positive");
    }
    const Eigen::Index n = gains.size();
    const double gmax = n > 0 ? gains.maxCoeff() : 0.0;

    // Stream i is active once t exceeds 1 / (g_i sqrt(q_i)).
    struct Candidate {
        Eigen::Index index;
        double slope;     // sqrt(q_i) / g_i
        double offset;    // 1 / g_i^2
        double threshold;
    };
    std::vector<Candidate> active;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(coeffs(i) >= 0.0) || !(gains(i) >= 0.0)) {
            throw InvalidInput("weighted_waterfill: coefficients and gains must be nonnegative");
        }
        if (gains(i) < 1e-12 * gmax || gains(i) == 0.0 || coeffs(i) == 0.0) continue;
        const double sq = std::sqrt(coeffs(i));
        active.push_back({i, sq / gains(i), 1.0 / (gains(i) * gains(i)), 1.0 / (gains(i) * sq)});
    }
    if (active.empty()) throw Infeasible("weighted_waterfill: no stream has a usable gain");
    std::stable_sort(active.begin(), active.end(),
                     [](const Candidate& a, const Candidate& b) { return a.threshold < b.threshold; });

    double slope_sum = 0.0;
    double offset_sum = 0.0;
    double level = 0.0;
    std::size_t k = 0;
    for (; k < active.size(); ++k) {
        slope_sum += active[k].slope;
        offset_sum += active[k].offset;
        level = (budget + offset_sum) / slope_sum;
        if (k + 1 == active.size() || level <= active[k + 1].threshold) break;
    }

    WaterfillResult out;
    out.alloc = RVector::Zero(n);
    for (std::size_t j = 0; j <= k && j < active.size(); ++j) {
        const auto& c = active[j];
        out.alloc(c.index) = std::sqrt(std::max(0.0, level * c.slope - c.offset));
    }
    // Remove rounding drift so the power equation holds to machine precision.
    const double total = out.alloc.squaredNorm();
    if (total > 0.0) out.alloc *= std::sqrt(budget / total);
    out.mu = 1.0 / (level * level);
    return out;
}

WaterfillResult waterfill_relay(const RVector& p_alloc, const RVector& gain_sr,
                                const RVector& gain_rd, const RVector& weights, double budget) {
    require_same_size(p_alloc, gain_sr, gain_rd, weights, "waterfill_relay");
    const RVector a = squared(p_alloc).cwiseProduct(squared(gain_sr));
    const RVector q = weights.cwiseProduct(a.cwiseQuotient((a.array() + 1.0).matrix()));
    return weighted_waterfill(q, gain_rd, budget);
}

WaterfillResult waterfill_source(const RVector& f_alloc, const RVector& gain_sr,
                                 const RVector& gain_rd, const RVector& weights, double budget) {
    require_same_size(f_alloc, gain_sr, gain_rd, weights, "waterfill_source");
    const RVector b = squared(f_alloc).cwiseProduct(squared(gain_rd));
    const RVector q = weights.cwiseProduct(b.cwiseQuotient((b.array() + 1.0).matrix()));
    return weighted_waterfill(q, gain_sr, budget);
}

double scalar_objective(const RVector& weights, const RVector& gain_sr, const RVector& gain_rd,
                        const RVector& p_alloc, const RVector& f_alloc) {
    require_same_size(weights, gain_sr, gain_rd, p_alloc, "scalar_objective");
    if (f_alloc.size() != p_alloc.size()) throw InvalidInput("scalar_objective: size mismatch");
    double total = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        const double a = p_alloc(i) * p_alloc(i) * gain_sr(i) * gain_sr(i);
        const double b = f_alloc(i) * f_alloc(i) * gain_rd(i) * gain_rd(i);
        total += weights(i) * (a + b + 1.0) / ((a + 1.0) * (b + 1.0));
    }
    return total;
}

double waterfill_kkt_residual(const RVector& coeffs, const RVector& gains,
                              const WaterfillResult& result) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < gains.size(); ++i) {
        const double g2 = gains(i) * gains(i);
        const double x = result.alloc(i) * result.alloc(i);
        const double slope = coeffs(i) * g2 / ((1.0 + g2 * x) * (1.0 + g2 * x));
        if (x > 0.0) {
            worst = std::max(worst, std::abs(slope - result.mu) / result.mu);
        } else {
            worst = std::max(worst, std::max(0.0, slope - result.mu) / result.mu);
        }
    }
    return worst;
}

namespace {

AllocationState run_alternation(const SystemConfig& cfg, const SpectralData& spectral,
                                const RVector& weights, RVector p, const DesignOptions& opts) {
    const double p_norm = p.squaredNorm();
    if (!(p_norm > 0.0)) throw InvalidInput("iterate_allocations: initial source allocation is zero");
    p *= std::sqrt(cfg.p_s / p_norm);

    const double floor = 1e-15 * std::max(weights.sum(), 1e-300);
    AllocationState st;
    st.p_alloc = p;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        const auto relay = waterfill_relay(st.p_alloc, spectral.gain_sr, spectral.gain_rd, weights,
                                           cfg.p_r);
        st.f_alloc = relay.alloc;
        st.mu_f = relay.mu;
        st.objective_trace.push_back(scalar_objective(weights, spectral.gain_sr, spectral.gain_rd,
                                                      st.p_alloc, st.f_alloc));
        const auto source = waterfill_source(st.f_alloc, spectral.gain_sr, spectral.gain_rd,
                                             weights, cfg.p_s);
        st.p_alloc = source.alloc;
        st.mu_p = source.mu;
        const double obj = scalar_objective(weights, spectral.gain_sr, spectral.gain_rd,
                                            st.p_alloc, st.f_alloc);
        st.objective_trace.push_back(obj);
        st.iterations = it;

        // Round 1 has no previous round; its relay half-step stands in.
        const auto& tr = st.objective_trace;
        const double before = tr.size() >= 3 ? tr[tr.size() - 3] : tr[tr.size() - 2];
        if (std::abs(before - obj) > opts.tolerance * std::max(std::abs(obj), floor)) continue;
        // The relay half-step saw the previous p; require it to be stationary for this one too.
        const RVector a = squared(st.p_alloc).cwiseProduct(squared(spectral.gain_sr));
        const RVector q = weights.cwiseProduct(a.cwiseQuotient((a.array() + 1.0).matrix()));
        if (waterfill_kkt_residual(q, spectral.gain_rd, relay) <= opts.kkt_tolerance) return st;
    }
    throw ConvergenceFailure("iterate_allocations: no convergence after " +
                                 std::to_string(opts.max_iterations) + " iterations",
                             st.objective_trace);
}

bool ordering_holds(const SpectralData& spectral, const AllocationState& st) {
    const RVector a = squared(st.p_alloc).cwiseProduct(squared(spectral.gain_sr));
    const RVector b = squared(st.f_alloc).cwiseProduct(squared(spectral.gain_rd));
    return nonincreasing(a) && nonincreasing(b);
}

double final_objective(const AllocationState& st) { return st.objective_trace.back(); }

}  // namespace

AllocationState iterate_allocations(const SystemConfig& cfg, const SpectralData& spectral,
                                    const RVector& weights, const RVector& initial_p,
                                    const DesignOptions& opts) {
    if (initial_p.size() != weights.size()) {
        throw InvalidInput("iterate_allocations: initial allocation has the wrong size");
    }
    AllocationState st = run_alternation(cfg, spectral, weights, initial_p, opts);
    if (ordering_holds(spectral, st)) return st;

    // Re-pair: sorted source amplitudes make p_i^2 gain_sr_i^2 nonincreasing, and
    // the alternation preserves that ordering from then on.
    RVector sorted = st.p_alloc;
    std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<>());
    AllocationState refined = run_alternation(cfg, spectral, weights, sorted, opts);
    refined.resorted = true;
    if (final_objective(refined) <= final_objective(st) + 1e-12 * std::abs(final_objective(st))) {
        return refined;
    }
    return st;
}

double solve_eta_p(const RVector& p_alloc, const SpectralData& spectral, const CMatrix& psi_sr,
                   double p_s, double sigma1_sq) {
    (void)p_s;  // enters through spectral.source_whitener
    const Eigen::Index n = p_alloc.size();
    const CMatrix v = spectral.first_hop.v.leftCols(n);
    const CMatrix leak = v.adjoint() * spectral.source_whitener * psi_sr *
                         spectral.source_whitener * v;
    double t = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) t += p_alloc(i) * p_alloc(i) * leak(i, i).real();
    const double denom = 1.0 - t;
    if (!(denom > 0.0)) {
        throw InternalError("solve_eta_p: non-positive denominator " + std::to_string(denom));
    }
    return sigma1_sq / denom;
}

TransceiverSolution assemble(const SystemConfig& cfg, const ChannelKnowledge& know,
                             const SpectralData& spectral, const OrderedHermitianEig& weight_eig,
                             AllocationState alloc) {
    const Eigen::Index n = cfg.n_streams;
    alloc.eta_p = solve_eta_p(alloc.p_alloc, spectral, spectral.psi_sr, cfg.p_s, cfg.sigma1_sq);

    TransceiverSolution sol;
    const CMatrix v_sr = spectral.first_hop.v.leftCols(n);
    const CMatrix u_sr = spectral.first_hop.u.leftCols(n);
    const CMatrix v_rd = spectral.second_hop.v.leftCols(n);
    const CMatrix lam_p = alloc.p_alloc.cast<Complex>().asDiagonal();
    const CMatrix lam_f = alloc.f_alloc.cast<Complex>().asDiagonal();

    sol.tilde_p = v_sr * lam_p * weight_eig.vectors.adjoint();
    sol.tx.precoder = std::sqrt(alloc.eta_p) * spectral.source_whitener * sol.tilde_p;
    sol.tilde_f = v_rd * lam_f * u_sr.adjoint();

    const TildeMaps maps(cfg, know, sol.tx.precoder);
    sol.tx.forward = maps.from_tilde(sol.tilde_f);
    sol.tx.equalizer = optimal_equalizer(cfg, know, sol.tx.precoder, sol.tx.forward);
    sol.achieved_wmse = residual_weighted_mse(cfg, know, sol.tx.precoder, sol.tilde_f);
    sol.alloc = std::move(alloc);
    sol.spectral = spectral;
    sol.weight_eig = weight_eig;
    return sol;
}

TransceiverSolution design(const SystemConfig& cfg, const ChannelKnowledge& know,
                           const DesignOptions& opts) {
    const OrderedHermitianEig weight_eig = weight_eigensystem(cfg.weight);
    const SpectralData spectral = spectral_decompose(cfg, know);
    const RVector& w = weight_eig.values;
    const Eigen::Index n = cfg.n_streams;

    const RVector init = opts.initial_p.value_or(
        RVector::Constant(n, std::sqrt(cfg.p_s / static_cast<double>(n))));

    std::optional<AllocationState> best;
    std::optional<ConvergenceFailure> first_failure;
    auto consider = [&](const RVector& start) {
        try {
            AllocationState st = iterate_allocations(cfg, spectral, w, start, opts);
            if (!best || final_objective(st) < final_objective(*best)) best = std::move(st);
        } catch (const ConvergenceFailure& e) {
            if (!first_failure) first_failure = e;
        }
    };
    consider(init);
    RngStream rng(opts.seed);
    for (int r = 0; r < opts.restarts; ++r) {
        RVector start(n);
        for (Eigen::Index i = 0; i < n; ++i) start(i) = std::sqrt(rng.uniform() + 1e-3);
        consider(start);
    }
    if (!best) throw *first_failure;
    return assemble(cfg, know, spectral, weight_eig, std::move(*best));
}

CMatrix scaled_identity_precoder(const SystemConfig& cfg) {
    CMatrix p = CMatrix::Zero(cfg.n_s, cfg.n_streams);
    p.topRows(cfg.n_streams).setIdentity();
    return p * std::sqrt(cfg.p_s / static_cast<double>(cfg.n_streams));
}

TransceiverSolution design_relay_only(const SystemConfig& cfg, const ChannelKnowledge& know,
                                      const CMatrix& precoder) {
    const OrderedHermitianEig weight_eig = weight_eigensystem(cfg.weight);
    const SpectralData spectral = spectral_decompose(cfg, know);
    const Eigen::Index n = cfg.n_streams;

    // With P fixed, F~ = V_rd,N diag(f) U_A,N^H where A = Pi_P^{-1/2} K1^{-1/2} Hsr P W^{1/2};
    // the weighted MSE becomes Tr(W) - sum_i sigma_A,i^2 b_i / (1 + b_i).
    const TildeMaps maps(cfg, know, precoder);
    const OrderedSVD a_svd = svd_ordered(maps.whitened_source_link() * herm_sqrt(cfg.weight));
    RVector coeffs = RVector::Zero(n);
    coeffs.head(a_svd.sigma.size()) = squared(a_svd.sigma).head(std::min(n, a_svd.sigma.size()));

    const WaterfillResult relay = weighted_waterfill(coeffs, spectral.gain_rd, cfg.p_r);

    TransceiverSolution sol;
    sol.tilde_f = spectral.second_hop.v.leftCols(n) * relay.alloc.cast<Complex>().asDiagonal() *
                  a_svd.u.leftCols(n).adjoint();
    sol.tilde_p = precoder;
    sol.tx.precoder = precoder;
    sol.tx.forward = maps.from_tilde(sol.tilde_f);
    sol.tx.equalizer = optimal_equalizer(cfg, know, precoder, sol.tx.forward);
    sol.achieved_wmse = residual_weighted_mse(cfg, know, precoder, sol.tilde_f);

    sol.alloc.f_alloc = relay.alloc;
    sol.alloc.mu_f = relay.mu;
    sol.alloc.eta_p = maps.k1().trace().real() / static_cast<double>(cfg.m_r);
    sol.alloc.iterations = 1;
    double objective = weight_eig.values.sum();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double b = relay.alloc(i) * relay.alloc(i) * spectral.gain_rd(i) * spectral.gain_rd(i);
        objective -= coeffs(i) * b / (1.0 + b);
    }
    sol.alloc.objective_trace = {objective};
    sol.spectral = spectral;
    sol.weight_eig = weight_eig;
    return sol;
}

}  // namespace afrelay
