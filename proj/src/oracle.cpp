#include "afrelay/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "afrelay/errors.hpp"
#include "afrelay/rng.hpp"

namespace afrelay {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

CVector qpsk_symbols(Eigen::Index n, RngStream& rng) {
    CVector s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::uint64_t b = rng.bits();
        s(i) = Complex((b & 1U) ? -kInvSqrt2 : kInvSqrt2, (b & 2U) ? -kInvSqrt2 : kInvSqrt2);
    }
    return s;
}

CVector noise(Eigen::Index n, double variance, RngStream& rng) {
    CVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.complex_gaussian(variance);
    return v;
}

// Running mean/variance, entrywise for matrices.
class MatrixMoments {
public:
    MatrixMoments(Eigen::Index rows, Eigen::Index cols)
        : mean_(CMatrix::Zero(rows, cols)),
          m2_re_(Eigen::MatrixXd::Zero(rows, cols)),
          m2_im_(Eigen::MatrixXd::Zero(rows, cols)) {}

    void add(const CMatrix& x) {
        ++n_;
        const CMatrix delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        const CMatrix delta2 = x - mean_;
        m2_re_.array() += delta.real().array() * delta2.real().array();
        m2_im_.array() += delta.imag().array() * delta2.imag().array();
    }

    McMatrixEstimate finish(std::uint64_t seed) const {
        McMatrixEstimate out;
        out.mean = mean_;
        const double denom = static_cast<double>(n_) * static_cast<double>(n_ - 1);
        out.std_error_re = (m2_re_ / denom).cwiseSqrt();
        out.std_error_im = (m2_im_ / denom).cwiseSqrt();
        out.n_samples = n_;
        out.seed = seed;
        return out;
    }

private:
    std::size_t n_ = 0;
    CMatrix mean_;
    Eigen::MatrixXd m2_re_;
    Eigen::MatrixXd m2_im_;
};

void require_samples(std::size_t n) {
    if (n < 2) throw InvalidInput("Monte-Carlo estimators need at least 2 samples");
}

// One pass of the two-hop chain; returns the detection error Gy - s.
class LinkSimulator {
public:
    LinkSimulator(const SystemConfig& cfg, const ChannelKnowledge& know, const Transceiver& tx)
        : cfg_(cfg), know_(know), tx_(tx), err_sr_(know.stats_sr), err_rd_(know.stats_rd) {
        know.validate(cfg);
        tx.validate(cfg);
    }

    CVector error(RngStream& rng) const {
        const CVector s = qpsk_symbols(cfg_.n_streams, rng);
        const CMatrix h_sr = know_.est_sr + err_sr_.draw(rng);
        const CMatrix h_rd = know_.est_rd + err_rd_.draw(rng);
        const CVector x = h_sr * (tx_.precoder * s) + noise(cfg_.m_r, cfg_.sigma1_sq, rng);
        const CVector y = h_rd * (tx_.forward * x) + noise(cfg_.m_d, cfg_.sigma2_sq, rng);
        return tx_.equalizer * y - s;
    }

private:
    const SystemConfig& cfg_;
    const ChannelKnowledge& know_;
    const Transceiver& tx_;
    ErrorSampler err_sr_;
    ErrorSampler err_rd_;
};

}  // namespace

McEstimate empirical_weighted_mse(const SystemConfig& cfg, const ChannelKnowledge& know,
                                  const Transceiver& tx, std::size_t n_samples,
                                  std::uint64_t seed) {
    require_samples(n_samples);
    const LinkSimulator link(cfg, know, tx);
    RngStream rng(seed);
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t k = 1; k <= n_samples; ++k) {
        const CVector e = link.error(rng);
        const double v = (e.adjoint() * cfg.weight * e)(0, 0).real();
        const double delta = v - mean;
        mean += delta / static_cast<double>(k);
        m2 += delta * (v - mean);
    }
    McEstimate out;
    out.mean = mean;
    out.std_error = std::sqrt(m2 / static_cast<double>(n_samples - 1) /
                              static_cast<double>(n_samples));
    out.n_samples = n_samples;
    out.seed = seed;
    return out;
}

McMatrixEstimate empirical_mse_matrix(const SystemConfig& cfg, const ChannelKnowledge& know,
                                      const Transceiver& tx, std::size_t n_samples,
                                      std::uint64_t seed) {
    require_samples(n_samples);
    const LinkSimulator link(cfg, know, tx);
    RngStream rng(seed);
    MatrixMoments acc(cfg.n_streams, cfg.n_streams);
    for (std::size_t k = 0; k < n_samples; ++k) {
        const CVector e = link.error(rng);
        acc.add(e * e.adjoint());
    }
    return acc.finish(seed);
}

McMatrixEstimate empirical_relay_covariance(const SystemConfig& cfg, const ChannelKnowledge& know,
                                            const CMatrix& precoder, std::size_t n_samples,
                                            std::uint64_t seed) {
    require_samples(n_samples);
    know.validate(cfg);
    const ErrorSampler err_sr(know.stats_sr);
    RngStream rng(seed);
    MatrixMoments acc(cfg.m_r, cfg.m_r);
    for (std::size_t k = 0; k < n_samples; ++k) {
        const CVector s = qpsk_symbols(cfg.n_streams, rng);
        const CMatrix h_sr = know.est_sr + err_sr.draw(rng);
        const CVector x = h_sr * (precoder * s) + noise(cfg.m_r, cfg.sigma1_sq, rng);
        acc.add(x * x.adjoint());
    }
    return acc.finish(seed);
}

namespace {

// Real parameter vector <-> (P, F~).
struct Packing {
    Eigen::Index p_rows, p_cols, f_rows, f_cols;

    Eigen::Index p_size() const { return 2 * p_rows * p_cols; }
    Eigen::Index size() const { return p_size() + 2 * f_rows * f_cols; }

    RVector pack(const CMatrix& p, const CMatrix& f) const {
        RVector x(size());
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            x(k++) = p(i).real();
            x(k++) = p(i).imag();
        }
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            x(k++) = f(i).real();
            x(k++) = f(i).imag();
        }
        return x;
    }

    void unpack(const RVector& x, CMatrix& p, CMatrix& f) const {
        p.resize(p_rows, p_cols);
        f.resize(f_rows, f_cols);
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < p.size(); ++i, k += 2) p(i) = Complex(x(k), x(k + 1));
        for (Eigen::Index i = 0; i < f.size(); ++i, k += 2) f(i) = Complex(x(k), x(k + 1));
    }

    // Rescales both blocks onto their power spheres.
    void project(RVector& x, double p_s, double p_r) const {
        auto head = x.head(p_size());
        auto tail = x.tail(size() - p_size());
        head *= std::sqrt(p_s / head.squaredNorm());
        tail *= std::sqrt(p_r / tail.squaredNorm());
    }

    // Removes the radial component of each block.
    RVector tangent(const RVector& x, const RVector& g) const {
        RVector t = g;
        auto proj = [&](Eigen::Index off, Eigen::Index len) {
            const auto xs = x.segment(off, len);
            t.segment(off, len) -= (xs.dot(g.segment(off, len)) / xs.squaredNorm()) * xs;
        };
        proj(0, p_size());
        proj(p_size(), size() - p_size());
        return t;
    }
};

}  // namespace

BruteForceResult brute_force_design(const SystemConfig& cfg, const ChannelKnowledge& know,
                                    int restarts, std::uint64_t seed, int max_iterations) {
    cfg.validate();
    know.validate(cfg);
    const Packing pk{cfg.n_s, cfg.n_streams, cfg.n_r, cfg.m_r};
    auto objective = [&](const RVector& x) {
        CMatrix p, f;
        pk.unpack(x, p, f);
        return residual_weighted_mse(cfg, know, p, f);
    };
    auto gradient = [&](const RVector& x) {
        RVector g(x.size());
        RVector probe = x;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
            probe(i) = x(i) + h;
            const double up = objective(probe);
            probe(i) = x(i) - h;
            const double down = objective(probe);
            probe(i) = x(i);
            g(i) = (up - down) / (2.0 * h);
        }
        return g;
    };

    BruteForceResult best;
    best.best_objective = std::numeric_limits<double>::infinity();
    best.restarts = std::max(1, restarts);
    best.iterations_per_restart = max_iterations;
    RngStream root(seed);

    for (int r = 0; r < best.restarts; ++r) {
        RngStream rng = root.split(static_cast<std::uint64_t>(r));
        RVector x = pk.pack(rng.gaussian_matrix(cfg.n_s, cfg.n_streams),
                            rng.gaussian_matrix(cfg.n_r, cfg.m_r));
        pk.project(x, cfg.p_s, cfg.p_r);
        double value = objective(x);
        double step = 0.1 * std::sqrt(cfg.p_s + cfg.p_r);
        for (int it = 0; it < max_iterations; ++it) {
            const RVector t = pk.tangent(x, gradient(x));
            const double gnorm2 = t.squaredNorm();
            if (gnorm2 < 1e-28) break;
            bool moved = false;
            for (int bt = 0; bt < 60; ++bt) {
                RVector cand = x - step * t;
                pk.project(cand, cfg.p_s, cfg.p_r);
                const double cv = objective(cand);
                if (cv <= value - 1e-4 * step * gnorm2) {
                    x = cand;
                    value = cv;
                    moved = true;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        if (value < best.best_objective) {
            best.best_objective = value;
            pk.unpack(x, best.best_p, best.best_f_tilde);
        }
    }
    return best;
}

RVector scalar_objective_gradient(const ScalarPoint& pt) {
    const Eigen::Index n = pt.weights.size();
    RVector g(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ls = pt.gain_sr(i) * pt.gain_sr(i);
        const double lr = pt.gain_rd(i) * pt.gain_rd(i);
        const double a = pt.p_alloc(i) * pt.p_alloc(i) * ls;
        const double b = pt.f_alloc(i) * pt.f_alloc(i) * lr;
        // term = w (1 - a/(1+a) * b/(1+b))
        g(i) = -pt.weights(i) * (b / (1.0 + b)) * 2.0 * pt.p_alloc(i) * ls / ((1.0 + a) * (1.0 + a));
        g(n + i) =
            -pt.weights(i) * (a / (1.0 + a)) * 2.0 * pt.f_alloc(i) * lr / ((1.0 + b) * (1.0 + b));
    }
    return g;
}

namespace {

double objective_at(const ScalarPoint& pt) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < pt.weights.size(); ++i) {
        const double a = pt.p_alloc(i) * pt.p_alloc(i) * pt.gain_sr(i) * pt.gain_sr(i);
        const double b = pt.f_alloc(i) * pt.f_alloc(i) * pt.gain_rd(i) * pt.gain_rd(i);
        total += pt.weights(i) * (b + a + 1.0) / ((a + 1.0) * (b + 1.0));
    }
    return total;
}

}  // namespace

double gradient_check_scalar_objective(const ScalarPoint& pt, double h) {
    if (!(h >= 1e-7 && h <= 1e-4)) throw InvalidInput("gradient_check: h must lie in [1e-7, 1e-4]");
    const Eigen::Index n = pt.weights.size();
    const RVector analytic = scalar_objective_gradient(pt);
    const double floor = 1e-8 * std::max(analytic.cwiseAbs().maxCoeff(), 1e-300);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < 2 * n; ++k) {
        ScalarPoint up = pt;
        ScalarPoint down = pt;
        RVector& vu = k < n ? up.p_alloc : up.f_alloc;
        RVector& vd = k < n ? down.p_alloc : down.f_alloc;
        const Eigen::Index i = k < n ? k : k - n;
        vu(i) += h;
        vd(i) -= h;
        const double numeric = (objective_at(up) - objective_at(down)) / (2.0 * h);
        const double scale = std::max(std::abs(analytic(k)), floor);
        worst = std::max(worst, std::abs(numeric - analytic(k)) / scale);
    }
    return worst;
}

double projected_gradient_norm(const ScalarPoint& pt) {
    const Eigen::Index n = pt.weights.size();
    const RVector g = scalar_objective_gradient(pt);
    RVector gp = g.head(n);
    RVector gf = g.tail(n);
    gp -= (pt.p_alloc.dot(gp) / pt.p_alloc.squaredNorm()) * pt.p_alloc;
    gf -= (pt.f_alloc.dot(gf) / pt.f_alloc.squaredNorm()) * pt.f_alloc;
    return std::sqrt(gp.squaredNorm() + gf.squaredNorm());
}

}  // namespace afrelay
