#pragma once

#include <cstdint>

#include "afrelay/channel_model.hpp"
#include "afrelay/linalg.hpp"
#include "afrelay/mse_engine.hpp"
#include "afrelay/system_config.hpp"

namespace afrelay {

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // sample std / sqrt(n_samples)
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

struct McMatrixEstimate {
    CMatrix mean;
    Eigen::MatrixXd std_error_re;
    Eigen::MatrixXd std_error_im;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

/// Sample mean of (Gy - s)^H W (Gy - s) over fresh draws of QPSK data, both
/// estimation errors and both noises, pushed through the true channels
/// (estimate + sampled error).
McEstimate empirical_weighted_mse(const SystemConfig& cfg, const ChannelKnowledge& know,
                                  const Transceiver& tx, std::size_t n_samples,
                                  std::uint64_t seed);

// Entrywise sample mean of (Gy - s)(Gy - s)^H, same draws as above.
McMatrixEstimate empirical_mse_matrix(const SystemConfig& cfg, const ChannelKnowledge& know,
                                      const Transceiver& tx, std::size_t n_samples,
                                      std::uint64_t seed);

// Entrywise sample mean of x x^H at the relay, x = (Hsr + dHsr) P s + n1.
McMatrixEstimate empirical_relay_covariance(const SystemConfig& cfg, const ChannelKnowledge& know,
                                            const CMatrix& precoder, std::size_t n_samples,
                                            std::uint64_t seed);

struct BruteForceResult {
    CMatrix best_p;        // on the sphere ||P||_F^2 = P_s
    CMatrix best_f_tilde;  // on the sphere ||F~||_F^2 = P_r
    double best_objective = 0.0;
    int restarts = 0;
    int iterations_per_restart = 0;
};

/// Multi-start projected descent on the residual weighted MSE over (P, F~),
/// with central finite-difference gradients and backtracking steps, projecting
/// back onto both power spheres after every step. Meant for tiny instances.
BruteForceResult brute_force_design(const SystemConfig& cfg, const ChannelKnowledge& know,
                                    int restarts, std::uint64_t seed, int max_iterations = 400);

/// A point of the scalar allocation problem.
struct ScalarPoint {
    RVector weights;
    RVector gain_sr;
    RVector gain_rd;
    RVector p_alloc;
    RVector f_alloc;
};

// Analytic partials of the scalar objective, stacked as [d/dp; d/df].
RVector scalar_objective_gradient(const ScalarPoint& pt);

// Max relative error between the analytic gradient and central differences with step h.
double gradient_check_scalar_objective(const ScalarPoint& pt, double h);

/// Norm of the gradient projected onto the tangent spaces of sum p_i^2 = const
/// and sum f_i^2 = const; zero at a KKT point with all streams active.
double projected_gradient_norm(const ScalarPoint& pt);

}  // namespace afrelay
