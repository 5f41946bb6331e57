#pragma once

#include "afrelay/linalg.hpp"
#include "afrelay/rng.hpp"
#include "afrelay/system_config.hpp"

namespace afrelay {

/// Separable covariance of a channel-estimation error: the error matrix is
/// row_cov^{1/2} * H_w * col_cov^{1/2} with H_w i.i.d. CN(0, 1).
struct ErrorStats {
    CMatrix row_cov;  // receive side, rows x rows
    CMatrix col_cov;  // transmit side, cols x cols

    static ErrorStats zero(Eigen::Index rows, Eigen::Index cols);
    // Scales the error covariance (row_cov kron col_cov) by factor.
    ErrorStats scaled(double factor) const;
};

struct HopTraining {
    CMatrix training;          // D
    double channel_var = 1.0;  // prior per-entry channel variance
    double noise_var = 1.0;    // noise variance during training
};

/// What the transceiver designer knows: channel estimates plus the statistics
/// of their errors.
struct ChannelKnowledge {
    CMatrix est_sr;  // m_r x n_s
    CMatrix est_rd;  // m_d x n_r
    ErrorStats stats_sr;
    ErrorStats stats_rd;

    // Same estimates, error statistics zeroed (the "estimate is exact" view).
    ChannelKnowledge perfect() const;
    void validate(const SystemConfig& cfg) const;
};

struct TrueChannelDraw {
    CMatrix h_sr;
    CMatrix h_rd;
    CMatrix delta_sr;
    CMatrix delta_rd;
};

// Exponential correlation: entry (i, j) = alpha^|i - j|, 0 <= alpha < 1.
CMatrix exp_corr(double alpha, Eigen::Index n);

/// MMSE error statistics of the source->relay hop, training sent from the
/// source (D has n_s rows). Row covariance is exactly I_{m_r}.
ErrorStats error_stats_first_hop(const HopTraining& t, Eigen::Index n_s, Eigen::Index m_r);

/// MMSE error statistics of the relay->destination hop, training sent from
/// the destination (D has m_d rows). Column covariance is exactly I_{n_r}.
ErrorStats error_stats_second_hop(const HopTraining& t, Eigen::Index n_r, Eigen::Index m_d);

/// Training with D D^H = snr_est * R_alpha, unit prior and unit training noise,
/// so that the resulting error covariance is (I + snr_est * R_alpha)^{-1}.
HopTraining correlated_training(double snr_est, double alpha, Eigen::Index n);

CMatrix sample_error(const ErrorStats& stats, RngStream& rng);

// sample_error with the covariance square roots computed once.
class ErrorSampler {
public:
    explicit ErrorSampler(const ErrorStats& stats);
    CMatrix draw(RngStream& rng) const;

private:
    CMatrix row_sqrt_;
    CMatrix col_sqrt_;
};

struct Scenario {
    ChannelKnowledge knowledge;
    TrueChannelDraw truth;
};

/// Draws an estimate/true-channel pair. The estimate is drawn with covariance
/// complementary to the error covariance so every true channel entry has unit
/// variance. snr_est is linear; +inf gives perfect estimates.
Scenario sample_scenario(const SystemConfig& cfg, double snr_est, double alpha, RngStream& rng);

struct HopErrorStats {
    ErrorStats sr;
    ErrorStats rd;
};

/// Error statistics used by sample_scenario: both hops trained with
/// correlation R_alpha, giving Psi_sr = Sigma_rd = (I + snr_est * R_alpha)^{-1}.
HopErrorStats scenario_error_stats(const SystemConfig& cfg, double snr_est, double alpha);

}  // namespace afrelay
