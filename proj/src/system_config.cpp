#include "afrelay/system_config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "afrelay/errors.hpp"

namespace afrelay {

void SystemConfig::validate() const {
    auto positive_count = [](Eigen::Index v, const char* name) {
        if (v < 1) throw InvalidInput(std::string("SystemConfig.") + name + " must be >= 1");
    };
    positive_count(n_s, "n_s");
    positive_count(m_r, "m_r");
    positive_count(n_r, "n_r");
    positive_count(m_d, "m_d");
    positive_count(n_streams, "n_streams");
    if (n_streams > std::min({n_s, m_r, n_r, m_d})) {
        throw InvalidInput("SystemConfig.n_streams exceeds an antenna count");
    }
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvalidInput(std::string("SystemConfig.") + name + " must be positive and finite");
        }
    };
    positive(p_s, "p_s");
    positive(p_r, "p_r");
    positive(sigma1_sq, "sigma1_sq");
    positive(sigma2_sq, "sigma2_sq");
    if (weight.rows() != n_streams || weight.cols() != n_streams) {
        throw InvalidInput("SystemConfig.weight must be n_streams x n_streams");
    }
    require_finite(weight, "SystemConfig.weight");
    const auto eig = eig_hermitian_ordered(weight);
    if (eig.values(n_streams - 1) < -1e-10 * std::max(1e-300, std::abs(eig.values(0)))) {
        throw InvalidInput("SystemConfig.weight must be positive semidefinite");
    }
}

SystemConfig SystemConfig::uniform(Eigen::Index antennas, Eigen::Index streams, double p_s,
                                   double p_r, double sigma1_sq, double sigma2_sq,
                                   const CMatrix& weight) {
    SystemConfig cfg;
    cfg.n_s = cfg.m_r = cfg.n_r = cfg.m_d = antennas;
    cfg.n_streams = streams;
    cfg.p_s = p_s;
    cfg.p_r = p_r;
    cfg.sigma1_sq = sigma1_sq;
    cfg.sigma2_sq = sigma2_sq;
    cfg.weight = weight;
    return cfg;
}

}  // namespace afrelay
