#include "afrelay/channel_model.hpp"

#include <cmath>
#include <string>

#include "afrelay/errors.hpp"

namespace afrelay {
namespace {

void require_shape(const CMatrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw InvalidInput(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                           std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()));
    }
}

void require_training(const HopTraining& t, Eigen::Index rows, const char* what) {
    if (!(t.channel_var > 0.0) || !(t.noise_var > 0.0)) {
        throw InvalidInput(std::string(what) + ": variances must be positive");
    }
    if (t.training.rows() != rows) {
        throw InvalidInput(std::string(what) + ": training matrix must have " +
                           std::to_string(rows) + " rows");
    }
    require_finite(t.training, what);
}

// (sigma_h^{-2} I + sigma_n^{-2} D D^H)^{-1}
CMatrix posterior_cov(const HopTraining& t) {
    const Eigen::Index n = t.training.rows();
    const CMatrix info = CMatrix::Identity(n, n) / t.channel_var +
                         t.training * t.training.adjoint() / t.noise_var;
    return hermitian_part(hermitian_solve(info, CMatrix::Identity(n, n)));
}

}  // namespace

ErrorStats ErrorStats::zero(Eigen::Index rows, Eigen::Index cols) {
    return {CMatrix::Zero(rows, rows), CMatrix::Zero(cols, cols)};
}

ErrorStats ErrorStats::scaled(double factor) const { return {row_cov, col_cov * factor}; }

ChannelKnowledge ChannelKnowledge::perfect() const {
    ChannelKnowledge out = *this;
    out.stats_sr = ErrorStats::zero(est_sr.rows(), est_sr.cols());
    out.stats_rd = ErrorStats::zero(est_rd.rows(), est_rd.cols());
    return out;
}

void ChannelKnowledge::validate(const SystemConfig& cfg) const {
    require_shape(est_sr, cfg.m_r, cfg.n_s, "ChannelKnowledge.est_sr");
    require_shape(est_rd, cfg.m_d, cfg.n_r, "ChannelKnowledge.est_rd");
    require_shape(stats_sr.row_cov, cfg.m_r, cfg.m_r, "ChannelKnowledge.stats_sr.row_cov");
    require_shape(stats_sr.col_cov, cfg.n_s, cfg.n_s, "ChannelKnowledge.stats_sr.col_cov");
    require_shape(stats_rd.row_cov, cfg.m_d, cfg.m_d, "ChannelKnowledge.stats_rd.row_cov");
    require_shape(stats_rd.col_cov, cfg.n_r, cfg.n_r, "ChannelKnowledge.stats_rd.col_cov");
    require_finite(est_sr, "ChannelKnowledge.est_sr");
    require_finite(est_rd, "ChannelKnowledge.est_rd");
}

CMatrix exp_corr(double alpha, Eigen::Index n) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidInput("exp_corr: alpha must lie in [0, 1)");
    if (n < 0) throw InvalidInput("exp_corr: negative size");
    CMatrix r(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            r(i, j) = std::pow(alpha, static_cast<double>(std::abs(i - j)));
    return r;
}

ErrorStats error_stats_first_hop(const HopTraining& t, Eigen::Index n_s, Eigen::Index m_r) {
    require_training(t, n_s, "error_stats_first_hop");
    // Psi^T = (sigma_h^{-2} I + sigma_n^{-2} D^* D^T)^{-1}; transposing gives the D D^H form.
    return {CMatrix::Identity(m_r, m_r), posterior_cov(t)};
}

ErrorStats error_stats_second_hop(const HopTraining& t, Eigen::Index n_r, Eigen::Index m_d) {
    require_training(t, m_d, "error_stats_second_hop");
    return {posterior_cov(t), CMatrix::Identity(n_r, n_r)};
}

HopTraining correlated_training(double snr_est, double alpha, Eigen::Index n) {
    if (!(snr_est >= 0.0) || !std::isfinite(snr_est)) {
        throw InvalidInput("correlated_training: snr_est must be finite and nonnegative");
    }
    HopTraining t;
    t.training = std::sqrt(snr_est) * herm_sqrt(exp_corr(alpha, n));
    t.channel_var = 1.0;
    t.noise_var = 1.0;
    return t;
}

ErrorSampler::ErrorSampler(const ErrorStats& stats)
    : row_sqrt_(herm_sqrt(stats.row_cov)), col_sqrt_(herm_sqrt(stats.col_cov)) {}

CMatrix ErrorSampler::draw(RngStream& rng) const {
    return row_sqrt_ * rng.gaussian_matrix(row_sqrt_.rows(), col_sqrt_.rows()) * col_sqrt_;
}

CMatrix sample_error(const ErrorStats& stats, RngStream& rng) {
    return ErrorSampler(stats).draw(rng);
}

HopErrorStats scenario_error_stats(const SystemConfig& cfg, double snr_est, double alpha) {
    if (std::isinf(snr_est) && snr_est > 0.0) {
        return {{CMatrix::Identity(cfg.m_r, cfg.m_r), CMatrix::Zero(cfg.n_s, cfg.n_s)},
                {CMatrix::Zero(cfg.m_d, cfg.m_d), CMatrix::Identity(cfg.n_r, cfg.n_r)}};
    }
    return {error_stats_first_hop(correlated_training(snr_est, alpha, cfg.n_s), cfg.n_s, cfg.m_r),
            error_stats_second_hop(correlated_training(snr_est, alpha, cfg.m_d), cfg.n_r, cfg.m_d)};
}

Scenario sample_scenario(const SystemConfig& cfg, double snr_est, double alpha, RngStream& rng) {
    const HopErrorStats stats = scenario_error_stats(cfg, snr_est, alpha);

    // Estimate and error are independent and their covariances add up to the
    // unit i.i.d. prior: est_sr has column covariance I - Psi_sr, est_rd has row
    // covariance I - Sigma_rd.
    const CMatrix col_sr = herm_sqrt(CMatrix::Identity(cfg.n_s, cfg.n_s) - stats.sr.col_cov);
    const CMatrix row_rd = herm_sqrt(CMatrix::Identity(cfg.m_d, cfg.m_d) - stats.rd.row_cov);

    Scenario out;
    out.knowledge.est_sr = rng.gaussian_matrix(cfg.m_r, cfg.n_s) * col_sr;
    out.knowledge.est_rd = row_rd * rng.gaussian_matrix(cfg.m_d, cfg.n_r);
    out.knowledge.stats_sr = stats.sr;
    out.knowledge.stats_rd = stats.rd;

    out.truth.delta_sr = sample_error(stats.sr, rng);
    out.truth.delta_rd = sample_error(stats.rd, rng);
    out.truth.h_sr = out.knowledge.est_sr + out.truth.delta_sr;
    out.truth.h_rd = out.knowledge.est_rd + out.truth.delta_rd;
    return out;
}

}  // namespace afrelay
