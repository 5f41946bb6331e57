#pragma once

// Instance generators and reference computations shared by the tests.
// Nothing here calls into the library's own estimators.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "afrelay/channel_model.hpp"
#include "afrelay/mse_engine.hpp"
#include "afrelay/rng.hpp"
#include "afrelay/system_config.hpp"

namespace testsupport {

using afrelay::CMatrix;
using afrelay::Complex;
using afrelay::CVector;
using afrelay::RVector;

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

inline CMatrix random_psd(afrelay::RngStream& rng, Eigen::Index n, double floor = 0.0) {
    const CMatrix a = rng.gaussian_matrix(n, n);
    CMatrix m = a * a.adjoint() / static_cast<double>(n);
    m.diagonal().array() += floor;
    return 0.5 * (m + m.adjoint());
}

// Random unitary from a QR of a Gaussian matrix.
inline CMatrix random_unitary(afrelay::RngStream& rng, Eigen::Index n) {
    Eigen::HouseholderQR<CMatrix> qr(rng.gaussian_matrix(n, n));
    return qr.householderQ() * CMatrix::Identity(n, n);
}

inline CMatrix diag_weight(std::initializer_list<double> w) {
    RVector v(static_cast<Eigen::Index>(w.size()));
    Eigen::Index i = 0;
    for (double x : w) v(i++) = x;
    return v.cast<Complex>().asDiagonal();
}

// Weight with distinct random eigenvalues in (0.1, 1] and a random eigenbasis.
inline CMatrix random_weight(afrelay::RngStream& rng, Eigen::Index n) {
    RVector w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = 0.1 + 0.9 * rng.uniform();
    const CMatrix u = random_unitary(rng, n);
    CMatrix m = u * w.cast<Complex>().asDiagonal() * u.adjoint();
    return 0.5 * (m + m.adjoint());
}

inline double db(double x) { return std::pow(10.0, x / 10.0); }

// Knowledge with arbitrary PD error covariances on both sides of both hops.
inline afrelay::ChannelKnowledge general_knowledge(const afrelay::SystemConfig& cfg,
                                                   afrelay::RngStream& rng, double err_scale) {
    afrelay::ChannelKnowledge k;
    k.est_sr = rng.gaussian_matrix(cfg.m_r, cfg.n_s);
    k.est_rd = rng.gaussian_matrix(cfg.m_d, cfg.n_r);
    k.stats_sr.row_cov = random_psd(rng, cfg.m_r, 0.2);
    k.stats_sr.col_cov = err_scale * random_psd(rng, cfg.n_s, 0.2);
    k.stats_rd.row_cov = err_scale * random_psd(rng, cfg.m_d, 0.2);
    k.stats_rd.col_cov = random_psd(rng, cfg.n_r, 0.2);
    return k;
}

// Lower Cholesky factor, zero for a zero matrix.
inline CMatrix chol(const CMatrix& m) {
    if (m.norm() == 0.0) return CMatrix::Zero(m.rows(), m.cols());
    Eigen::LLT<CMatrix> llt(m);
    return llt.matrixL();
}

// Plain Monte-Carlo of (Gy - s)(Gy - s)^H with errors L_S Hw L_P^H
// (row covariance L_S L_S^H, column covariance L_P L_P^H) and unit-power
// 8-PSK data. Calls sink(e) per draw.
inline void simulate_errors(const afrelay::SystemConfig& cfg, const afrelay::ChannelKnowledge& k,
                            const afrelay::Transceiver& tx, std::size_t n, std::uint64_t seed,
                            const std::function<void(const CVector&)>& sink) {
    const CMatrix ls_sr = chol(k.stats_sr.row_cov), lp_sr = chol(k.stats_sr.col_cov);
    const CMatrix ls_rd = chol(k.stats_rd.row_cov), lp_rd = chol(k.stats_rd.col_cov);
    afrelay::RngStream rng(seed ^ 0x5bd1e995ULL);
    const double s1 = std::sqrt(cfg.sigma1_sq), s2 = std::sqrt(cfg.sigma2_sq);
    for (std::size_t t = 0; t < n; ++t) {
        const CMatrix hsr =
            k.est_sr + ls_sr * rng.gaussian_matrix(cfg.m_r, cfg.n_s) * lp_sr.adjoint();
        const CMatrix hrd =
            k.est_rd + ls_rd * rng.gaussian_matrix(cfg.m_d, cfg.n_r) * lp_rd.adjoint();
        CVector s(cfg.n_streams);
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const double ph = 2.0 * M_PI * static_cast<double>(rng.bits() % 8) / 8.0;
            s(i) = Complex(std::cos(ph), std::sin(ph));
        }
        const CVector x = hsr * tx.precoder * s + s1 * rng.gaussian_matrix(cfg.m_r, 1);
        const CVector y = hrd * tx.forward * x + s2 * rng.gaussian_matrix(cfg.m_d, 1);
        sink(tx.equalizer * y - s);
    }
}

struct MeanStd {
    double mean = 0.0;
    double std_error = 0.0;
};

inline MeanStd mc_weighted_mse(const afrelay::SystemConfig& cfg, const afrelay::ChannelKnowledge& k,
                               const afrelay::Transceiver& tx, std::size_t n, std::uint64_t seed) {
    double sum = 0.0, sum2 = 0.0;
    simulate_errors(cfg, k, tx, n, seed, [&](const CVector& e) {
        const double v = (e.adjoint() * cfg.weight * e)(0, 0).real();
        sum += v;
        sum2 += v * v;
    });
    const double m = sum / static_cast<double>(n);
    const double var = (sum2 - sum * m) / static_cast<double>(n - 1);
    return {m, std::sqrt(std::max(var, 0.0) / static_cast<double>(n))};
}

// Solves sum_i (t sqrt(q_i)/g_i - 1/g_i^2)^+ = budget for t by bisection.
inline RVector bisection_waterfill(const RVector& q, const RVector& g, double budget) {
    auto power = [&](double t) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < q.size(); ++i)
            s += std::max(0.0, t * std::sqrt(q(i)) / g(i) - 1.0 / (g(i) * g(i)));
        return s;
    };
    double lo = 0.0, hi = 1.0;
    while (power(hi) < budget) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (power(mid) < budget ? lo : hi) = mid;
    }
    const double t = 0.5 * (lo + hi);
    RVector x(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i)
        x(i) = std::max(0.0, t * std::sqrt(q(i)) / g(i) - 1.0 / (g(i) * g(i)));
    return x;
}

}  // namespace testsupport
