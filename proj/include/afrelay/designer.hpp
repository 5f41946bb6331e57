#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "afrelay/channel_model.hpp"
#include "afrelay/linalg.hpp"
#include "afrelay/mse_engine.hpp"
#include "afrelay/system_config.hpp"

namespace afrelay {

/// Whitened hop decompositions shared by every stage of the design.
///
/// first_hop is the SVD of Hsr (P_s Psi_sr + s1 I)^{-1/2}; second_hop is the
/// SVD of K2^{-1/2} Hrd with K2 = P_r Sigma_rd + s2 I, which is constant once
/// the relay radiates its full budget. The error covariances here are the
/// effective ones after folding the scalar Sigma_sr / Psi_rd factors in.
struct SpectralData {
    OrderedSVD first_hop;
    OrderedSVD second_hop;
    RVector gain_sr;            // first N singular values of first_hop
    RVector gain_rd;            // first N singular values of second_hop
    CMatrix source_whitener;    // (P_s Psi_sr + s1 I)^{-1/2}
    CMatrix psi_sr;             // effective first-hop transmit-side error covariance
    CMatrix k2;                 // constant destination effective-noise covariance
};

struct WaterfillResult {
    RVector alloc;  // amplitudes; alloc.squaredNorm() equals the budget
    double mu = 0.0;
};

struct AllocationState {
    RVector p_alloc;  // source amplitudes p_i
    RVector f_alloc;  // relay amplitudes f_i
    double mu_p = 0.0;
    double mu_f = 0.0;
    double eta_p = 0.0;
    std::vector<double> objective_trace;  // one entry per half-iteration
    int iterations = 0;
    bool resorted = false;
};

struct TransceiverSolution {
    Transceiver tx;
    CMatrix tilde_f;  // F~ = V_rd,N diag(f) U_sr,N^H
    CMatrix tilde_p;  // P~ = V_sr,N diag(p) U_W^H
    AllocationState alloc;
    SpectralData spectral;
    OrderedHermitianEig weight_eig;
    double achieved_wmse = 0.0;
};

struct DesignOptions {
    int max_iterations = 500;
    double tolerance = 1e-10;  // relative objective change between rounds
    double kkt_tolerance = 1e-9;  // relay stationarity against the final source allocation
    int restarts = 0;          // extra random initializations; best result kept
    std::uint64_t seed = 0;
    std::optional<RVector> initial_p;  // source amplitudes; uniform power when absent
};

// Eigensystem of W with nonincreasing w_i; throws NotPositiveSemidefinite for indefinite W.
OrderedHermitianEig weight_eigensystem(const CMatrix& weight);

SpectralData spectral_decompose(const SystemConfig& cfg, const ChannelKnowledge& know);

/// Maximizes sum_i q_i g_i^2 x_i / (1 + g_i^2 x_i) over x >= 0 with
/// sum_i x_i = budget. Solution x_i = (t sqrt(q_i) / g_i - 1 / g_i^2)^+ with
/// mu = 1 / t^2; t is found exactly from the sorted activation thresholds.
/// Streams with g_i < 1e-12 max(g) or q_i = 0 receive nothing.
WaterfillResult weighted_waterfill(const RVector& coeffs, const RVector& gains, double budget);

// Relay update with the source fixed: q_i = w_i a_i / (1 + a_i), a_i = p_i^2 gain_sr_i^2.
WaterfillResult waterfill_relay(const RVector& p_alloc, const RVector& gain_sr,
                                const RVector& gain_rd, const RVector& weights, double budget);

// Source update with the relay fixed: q_i = w_i b_i / (1 + b_i), b_i = f_i^2 gain_rd_i^2.
WaterfillResult waterfill_source(const RVector& f_alloc, const RVector& gain_sr,
                                 const RVector& gain_rd, const RVector& weights, double budget);

/// sum_i w_i (b_i + a_i + 1) / ((a_i + 1)(b_i + 1)) with a_i = p_i^2 gain_sr_i^2
/// and b_i = f_i^2 gain_rd_i^2.
double scalar_objective(const RVector& weights, const RVector& gain_sr, const RVector& gain_rd,
                        const RVector& p_alloc, const RVector& f_alloc);

/// Largest KKT violation of a water-filling solution: relative stationarity
/// error on active streams, clamp violation on inactive ones.
double waterfill_kkt_residual(const RVector& coeffs, const RVector& gains,
                              const WaterfillResult& result);

/// Alternates source and relay water-filling until the objective changes by
/// less than `tolerance` (relative) between rounds and the relay allocation
/// satisfies its KKT conditions for the final source allocation. Throws ConvergenceFailure
/// after max_iterations rounds.
AllocationState iterate_allocations(const SystemConfig& cfg, const SpectralData& spectral,
                                    const RVector& weights, const RVector& initial_p,
                                    const DesignOptions& opts = {});

/// Closed-form eta_p = Tr(P P^H Psi_sr) + s1 for the structured precoder.
double solve_eta_p(const RVector& p_alloc, const SpectralData& spectral, const CMatrix& psi_sr,
                   double p_s, double sigma1_sq);

TransceiverSolution assemble(const SystemConfig& cfg, const ChannelKnowledge& know,
                             const SpectralData& spectral, const OrderedHermitianEig& weight_eig,
                             AllocationState alloc);

/// Joint robust design of precoder, forwarding matrix and equalizer.
TransceiverSolution design(const SystemConfig& cfg, const ChannelKnowledge& know,
                           const DesignOptions& opts = {});

/// Robust forwarding matrix and equalizer for a fixed precoder (no source design).
TransceiverSolution design_relay_only(const SystemConfig& cfg, const ChannelKnowledge& know,
                                      const CMatrix& precoder);

// sqrt(P_s / N) [I_N; 0]: the precoder used when the source does not adapt.
CMatrix scaled_identity_precoder(const SystemConfig& cfg);

}  // namespace afrelay
