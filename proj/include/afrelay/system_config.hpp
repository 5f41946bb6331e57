#pragma once

#include "afrelay/linalg.hpp"

namespace afrelay {

/// Dual-hop link parameters. Antenna counts follow the signal chain
/// source (n_s) -> relay receive (m_r) / relay transmit (n_r) -> destination (m_d).
/// Data symbols are unit power, so the source covariance is I_N.
struct SystemConfig {
    Eigen::Index n_s = 0;
    Eigen::Index m_r = 0;
    Eigen::Index n_r = 0;
    Eigen::Index m_d = 0;
    Eigen::Index n_streams = 0;
    double p_s = 1.0;        // source power budget
    double p_r = 1.0;        // relay power budget
    double sigma1_sq = 1.0;  // relay noise variance
    double sigma2_sq = 1.0;  // destination noise variance
    CMatrix weight;          // N x N Hermitian PSD

    // Throws InvalidInput naming the offending field.
    void validate() const;

    static SystemConfig uniform(Eigen::Index antennas, Eigen::Index streams, double p_s,
                                double p_r, double sigma1_sq, double sigma2_sq,
                                const CMatrix& weight);
};

}  // namespace afrelay
