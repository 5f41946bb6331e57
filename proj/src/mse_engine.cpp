#include "afrelay/mse_engine.hpp"

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

double trace_real(const CMatrix& m) { return m.trace().real(); }

CMatrix k1_of(const SystemConfig& cfg, const ChannelKnowledge& know, const CMatrix& precoder) {
    const double leak = trace_real(precoder * precoder.adjoint() * know.stats_sr.col_cov);
    return leak * know.stats_sr.row_cov + cfg.sigma1_sq * CMatrix::Identity(cfg.m_r, cfg.m_r);
}

CMatrix k2_of(const SystemConfig& cfg, const ChannelKnowledge& know, const CMatrix& relay_cov) {
    // relay_cov is F R_x F^H (equivalently F~ F~^H).
    const double leak = trace_real(relay_cov * know.stats_rd.col_cov);
    return leak * know.stats_rd.row_cov + cfg.sigma2_sq * CMatrix::Identity(cfg.m_d, cfg.m_d);
}

void check_inputs(const SystemConfig& cfg, const ChannelKnowledge& know, const CMatrix& precoder,
                  const CMatrix* forward) {
    know.validate(cfg);
    require_shape(precoder, cfg.n_s, cfg.n_streams, "precoder");
    require_finite(precoder, "precoder");
    if (forward != nullptr) {
        require_shape(*forward, cfg.n_r, cfg.m_r, "forward");
        require_finite(*forward, "forward");
    }
}

}  // namespace

void Transceiver::validate(const SystemConfig& cfg) const {
    require_shape(precoder, cfg.n_s, cfg.n_streams, "Transceiver.precoder");
    require_shape(forward, cfg.n_r, cfg.m_r, "Transceiver.forward");
    require_shape(equalizer, cfg.n_streams, cfg.m_d, "Transceiver.equalizer");
    require_finite(precoder, "Transceiver.precoder");
    require_finite(forward, "Transceiver.forward");
    require_finite(equalizer, "Transceiver.equalizer");
}

SecondOrderStats second_order_stats(const SystemConfig& cfg, const ChannelKnowledge& know,
                                    const CMatrix& precoder, const CMatrix& forward) {
    check_inputs(cfg, know, precoder, &forward);
    SecondOrderStats s;
    s.k1 = k1_of(cfg, know, precoder);
    const CMatrix hp = know.est_sr * precoder;
    s.r_x = hermitian_part(hp * hp.adjoint() + s.k1);
    s.k2 = k2_of(cfg, know, forward * s.r_x * forward.adjoint());
    return s;
}

CMatrix mse_matrix(const SystemConfig& cfg, const ChannelKnowledge& know, const Transceiver& tx) {
    tx.validate(cfg);
    const SecondOrderStats s = second_order_stats(cfg, know, tx.precoder, tx.forward);
    const CMatrix hf = know.est_rd * tx.forward;
    const CMatrix ry = hf * s.r_x * hf.adjoint() + s.k2;
    const CMatrix cross = tx.equalizer * hf * know.est_sr * tx.precoder;
    const CMatrix mse = tx.equalizer * ry * tx.equalizer.adjoint() +
                        CMatrix::Identity(cfg.n_streams, cfg.n_streams) - cross - cross.adjoint();
    return hermitian_part(mse);
}

double weighted_mse(const SystemConfig& cfg, const ChannelKnowledge& know, const Transceiver& tx) {
    return trace_real(cfg.weight * mse_matrix(cfg, know, tx));
}

CMatrix optimal_equalizer(const SystemConfig& cfg, const ChannelKnowledge& know,
                          const CMatrix& precoder, const CMatrix& forward) {
    const SecondOrderStats s = second_order_stats(cfg, know, precoder, forward);
    const CMatrix hf = know.est_rd * forward;
    const CMatrix ry = hermitian_part(hf * s.r_x * hf.adjoint() + s.k2);
    const CMatrix link = hf * know.est_sr * precoder;
    // G = link^H ry^{-1}  <=>  G^H = ry^{-1} link
    return hermitian_solve(ry, link).adjoint();
}

TildeMaps::TildeMaps(const SystemConfig& cfg, const ChannelKnowledge& know,
                     const CMatrix& precoder) {
    check_inputs(cfg, know, precoder, nullptr);
    k1_ = hermitian_part(k1_of(cfg, know, precoder));
    k1_sqrt_ = herm_sqrt(k1_);
    k1_inv_sqrt_ = herm_inv_sqrt(k1_);
    const CMatrix g = k1_inv_sqrt_ * know.est_sr * precoder;
    pi_p_ = hermitian_part(g * g.adjoint() + CMatrix::Identity(cfg.m_r, cfg.m_r));
    pi_sqrt_ = herm_sqrt(pi_p_);
    pi_inv_sqrt_ = herm_inv_sqrt(pi_p_);
    whitened_link_ = pi_inv_sqrt_ * g;
}

CMatrix TildeMaps::to_tilde(const CMatrix& forward) const { return forward * k1_sqrt_ * pi_sqrt_; }

CMatrix TildeMaps::from_tilde(const CMatrix& forward_tilde) const {
    return forward_tilde * pi_inv_sqrt_ * k1_inv_sqrt_;
}

TildeMaps tilde_maps(const SystemConfig& cfg, const ChannelKnowledge& know,
                     const CMatrix& precoder) {
    return TildeMaps(cfg, know, precoder);
}

double residual_weighted_mse(const SystemConfig& cfg, const ChannelKnowledge& know,
                             const CMatrix& precoder, const CMatrix& forward_tilde) {
    require_shape(forward_tilde, cfg.n_r, cfg.m_r, "forward_tilde");
    require_finite(forward_tilde, "forward_tilde");
    const TildeMaps maps(cfg, know, precoder);
    const CMatrix hf = know.est_rd * forward_tilde;
    const CMatrix k2 = k2_of(cfg, know, forward_tilde * forward_tilde.adjoint());
    const CMatrix inner = hermitian_part(hf * hf.adjoint() + k2);
    const CMatrix b = hf * maps.whitened_source_link() * herm_sqrt(cfg.weight);
    const double gain = trace_real(b.adjoint() * hermitian_solve(inner, b));
    return trace_real(cfg.weight) - gain;
}

}  // namespace afrelay
