#pragma once

#include "afrelay/channel_model.hpp"
#include "afrelay/linalg.hpp"
#include "afrelay/system_config.hpp"

namespace afrelay {

struct Transceiver {
    CMatrix precoder;   // P: n_s x N
    CMatrix forward;    // F: n_r x m_r
    CMatrix equalizer;  // G: N x m_d

    void validate(const SystemConfig& cfg) const;
};

/// Covariances averaged over data, estimation errors and noise.
struct SecondOrderStats {
    CMatrix r_x;  // relay received-signal covariance
    CMatrix k1;   // relay effective noise (error leakage + noise)
    CMatrix k2;   // destination effective noise
};

/// R_x = Hsr P P^H Hsr^H + K1, K1 = Tr(P P^H Psi_sr) Sigma_sr + s1 I,
/// K2 = Tr(F R_x F^H Psi_rd) Sigma_rd + s2 I, with Hsr/Hrd the estimates.
SecondOrderStats second_order_stats(const SystemConfig& cfg, const ChannelKnowledge& know,
                                    const CMatrix& precoder, const CMatrix& forward);

// E[(Gy - s)(Gy - s)^H] over data, both estimation errors and both noises.
CMatrix mse_matrix(const SystemConfig& cfg, const ChannelKnowledge& know, const Transceiver& tx);

// Tr(W * mse_matrix).
double weighted_mse(const SystemConfig& cfg, const ChannelKnowledge& know, const Transceiver& tx);

/// LMMSE equalizer for a given (P, F). K2 reflects the power actually radiated
/// by F, not the relay budget.
CMatrix optimal_equalizer(const SystemConfig& cfg, const ChannelKnowledge& know,
                          const CMatrix& precoder, const CMatrix& forward);

/// Change of variables F <-> F~ = F K1^{1/2} Pi_P^{1/2} that makes the relay
/// power Tr(F R_x F^H) equal to ||F~||_F^2 for a fixed precoder.
class TildeMaps {
public:
    TildeMaps(const SystemConfig& cfg, const ChannelKnowledge& know, const CMatrix& precoder);

    const CMatrix& pi_p() const { return pi_p_; }
    const CMatrix& k1() const { return k1_; }

    CMatrix to_tilde(const CMatrix& forward) const;
    CMatrix from_tilde(const CMatrix& forward_tilde) const;

    // Pi_P^{-1/2} K1^{-1/2} Hsr P: the whitened first-hop effective channel.
    const CMatrix& whitened_source_link() const { return whitened_link_; }

private:
    CMatrix k1_;
    CMatrix pi_p_;
    CMatrix k1_sqrt_;
    CMatrix k1_inv_sqrt_;
    CMatrix pi_sqrt_;
    CMatrix pi_inv_sqrt_;
    CMatrix whitened_link_;
};

TildeMaps tilde_maps(const SystemConfig& cfg, const ChannelKnowledge& know,
                     const CMatrix& precoder);

/// Weighted MSE after substituting the optimal equalizer, as a function of
/// (P, F~): Tr(W) - Tr[(B W^{1/2})^H (Hrd F~ F~^H Hrd^H + K2)^{-1} (B W^{1/2})]
/// with B = Hrd F~ Pi_P^{-1/2} K1^{-1/2} Hsr P.
double residual_weighted_mse(const SystemConfig& cfg, const ChannelKnowledge& know,
                             const CMatrix& precoder, const CMatrix& forward_tilde);

}  // namespace afrelay
