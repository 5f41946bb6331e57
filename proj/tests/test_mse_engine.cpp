#include <gtest/gtest.h>

#include <cmath>

#include "afrelay/channel_model.hpp"
#include "afrelay/errors.hpp"
#include "afrelay/mse_engine.hpp"
#include "support.hpp"

using namespace afrelay;
using testsupport::general_knowledge;
using testsupport::random_psd;

namespace {

SystemConfig scalar_cfg() {
    return SystemConfig::uniform(1, 1, 1.0, 1.0, 1.0, 1.0, CMatrix::Identity(1, 1));
}

ChannelKnowledge scalar_perfect() {
    ChannelKnowledge k;
    k.est_sr = CMatrix::Identity(1, 1);
    k.est_rd = CMatrix::Identity(1, 1);
    k.stats_sr = ErrorStats::zero(1, 1);
    k.stats_rd = ErrorStats::zero(1, 1);
    return k;
}

SystemConfig random_cfg(RngStream& rng) {
    SystemConfig c = SystemConfig::uniform(4, 4, 1.0, 1.0, 0.0, 0.0, CMatrix::Identity(4, 4));
    c.sigma1_sq = 0.05 + rng.uniform();
    c.sigma2_sq = 0.05 + rng.uniform();
    c.weight = random_psd(rng, 4);
    return c;
}

Transceiver random_tx(const SystemConfig& cfg, RngStream& rng) {
    Transceiver tx;
    tx.precoder = rng.gaussian_matrix(cfg.n_s, cfg.n_streams);
    tx.forward = rng.gaussian_matrix(cfg.n_r, cfg.m_r);
    tx.equalizer = rng.gaussian_matrix(cfg.n_streams, cfg.m_d);
    tx.precoder *= std::sqrt(cfg.p_s) / tx.precoder.norm();
    tx.forward *= 0.5 / tx.forward.norm();
    return tx;
}

}  // namespace

TEST(SecondOrderStats, ZeroPrecoder) {
    RngStream rng(1);
    const auto cfg = random_cfg(rng);
    const auto k = general_knowledge(cfg, rng, 0.1);
    const auto st = second_order_stats(cfg, k, CMatrix::Zero(4, 4), rng.gaussian_matrix(4, 4));
    EXPECT_LE((st.k1 - cfg.sigma1_sq * CMatrix::Identity(4, 4)).norm(), 1e-15);
    EXPECT_LE((st.r_x - cfg.sigma1_sq * CMatrix::Identity(4, 4)).norm(), 1e-15);
}

TEST(SecondOrderStats, TraceIdentity) {
    RngStream rng(2);
    auto cfg = random_cfg(rng);
    ChannelKnowledge k = general_knowledge(cfg, rng, 1.0);
    k.stats_sr.row_cov = CMatrix::Identity(4, 4);
    k.stats_sr.col_cov = CMatrix::Identity(4, 4);
    CMatrix p = rng.gaussian_matrix(4, 4);
    p *= std::sqrt(cfg.p_s) / p.norm();
    const auto st = second_order_stats(cfg, k, p, rng.gaussian_matrix(4, 4));
    EXPECT_LE((st.k1 - (cfg.p_s + cfg.sigma1_sq) * CMatrix::Identity(4, 4)).norm(), 1e-13);
}

TEST(SecondOrderStats, RelayCovarianceMatchesSimulation) {
    RngStream rng(3);
    const auto cfg = random_cfg(rng);
    const auto k = general_knowledge(cfg, rng, 0.3);
    const auto tx = random_tx(cfg, rng);
    const auto st = second_order_stats(cfg, k, tx.precoder, tx.forward);
    const CMatrix ls = testsupport::chol(k.stats_sr.row_cov), lp = testsupport::chol(k.stats_sr.col_cov);
    RngStream sim(33);
    CMatrix acc = CMatrix::Zero(4, 4);
    const int n = 100000;
    for (int t = 0; t < n; ++t) {
        const CMatrix h = k.est_sr + ls * sim.gaussian_matrix(4, 4) * lp.adjoint();
        const CVector s = sim.gaussian_matrix(4, 1);
        const CVector x = h * tx.precoder * s + std::sqrt(cfg.sigma1_sq) * sim.gaussian_matrix(4, 1);
        acc += x * x.adjoint();
    }
    acc /= n;
    EXPECT_LE((acc - st.r_x).norm() / st.r_x.norm(), 0.02);
}

TEST(SecondOrderStats, MoreErrorMoreK1) {
    RngStream rng(4);
    const auto cfg = random_cfg(rng);
    auto k = general_knowledge(cfg, rng, 0.3);
    const auto tx = random_tx(cfg, rng);
    const auto a = second_order_stats(cfg, k, tx.precoder, tx.forward);
    k.stats_sr.col_cov += 1e-3 * CMatrix::Identity(4, 4);
    const auto b = second_order_stats(cfg, k, tx.precoder, tx.forward);
    EXPECT_GT(b.k1.trace().real(), a.k1.trace().real());
    EXPECT_GT(b.r_x.trace().real(), a.r_x.trace().real());
}

TEST(MseMatrix, ZeroEqualizerIsIdentity) {
    RngStream rng(5);
    const auto cfg = random_cfg(rng);
    const auto k = general_knowledge(cfg, rng, 0.3);
    auto tx = random_tx(cfg, rng);
    tx.equalizer.setZero();
    EXPECT_LE((mse_matrix(cfg, k, tx) - CMatrix::Identity(4, 4)).norm(), 1e-15);
    SystemConfig c2 = cfg;
    c2.weight = testsupport::diag_weight({0.3, 0.3, 0.2, 0.2});
    EXPECT_NEAR(weighted_mse(c2, k, tx), 1.0, 1e-15);
}

TEST(MseMatrix, ScalarChain) {
    const auto cfg = scalar_cfg();
    const auto k = scalar_perfect();
    Transceiver tx{CMatrix::Constant(1, 1, 1.0), CMatrix::Constant(1, 1, 1.0),
                   CMatrix::Constant(1, 1, 1.0 / 3.0)};
    EXPECT_NEAR(mse_matrix(cfg, k, tx)(0, 0).real(), 2.0 / 3.0, 1e-15);
    const CMatrix g = optimal_equalizer(cfg, k, tx.precoder, tx.forward);
    EXPECT_NEAR(g(0, 0).real(), 1.0 / 3.0, 1e-15);
    // F~ = F K1^{1/2} Pi^{1/2} = sqrt(1) * sqrt(2)
    EXPECT_NEAR(residual_weighted_mse(cfg, k, tx.precoder, CMatrix::Constant(1, 1, std::sqrt(2.0))),
                2.0 / 3.0, 1e-15);
}

TEST(MseMatrix, WeightedTraceAndIdentityWeight) {
    RngStream rng(6);
    auto cfg = random_cfg(rng);
    const auto k = general_knowledge(cfg, rng, 0.3);
    const auto tx = random_tx(cfg, rng);
    const CMatrix e = mse_matrix(cfg, k, tx);
    EXPECT_NEAR(weighted_mse(cfg, k, tx), (cfg.weight * e).trace().real(), 1e-12);
    cfg.weight = CMatrix::Identity(4, 4);
    EXPECT_NEAR(weighted_mse(cfg, k, tx), e.diagonal().real().sum(), 1e-12);
    EXPECT_LE((e - e.adjoint()).norm(), 1e-12);
}

TEST(MseMatrix, MatchesSimulationPerEntry) {
    RngStream rng(7);
    const auto cfg = random_cfg(rng);
    const auto k = general_knowledge(cfg, rng, 0.3);
    auto tx = random_tx(cfg, rng);
    tx.equalizer = optimal_equalizer(cfg, k, tx.precoder, tx.forward);
    const CMatrix want = mse_matrix(cfg, k, tx);
    const std::size_t n = 100000;
    CMatrix sum = CMatrix::Zero(4, 4);
    Eigen::MatrixXd sq_re = Eigen::MatrixXd::Zero(4, 4), sq_im = Eigen::MatrixXd::Zero(4, 4);
    testsupport::simulate_errors(cfg, k, tx, n, 77, [&](const CVector& e) {
        const CMatrix x = e * e.adjoint();
        sum += x;
        sq_re += x.real().cwiseAbs2();
        sq_im += x.imag().cwiseAbs2();
    });
    const double dn = static_cast<double>(n);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const Complex m = sum(i, j) / dn;
            const double se_re = std::sqrt((sq_re(i, j) / dn - m.real() * m.real()) / dn);
            const double se_im = std::sqrt((sq_im(i, j) / dn - m.imag() * m.imag()) / dn);
            EXPECT_LE(std::abs(m.real() - want(i, j).real()), 3.0 * se_re + 1e-15) << i << j;
            EXPECT_LE(std::abs(m.imag() - want(i, j).imag()), 3.0 * se_im + 1e-15) << i << j;
        }
}

TEST(OptimalEqualizer, ZeroForwardGivesZero) {
    RngStream rng(8);
    const auto cfg = random_cfg(rng);
    const auto k = general_knowledge(cfg, rng, 0.3);
    const CMatrix g = optimal_equalizer(cfg, k, rng.gaussian_matrix(4, 4), CMatrix::Zero(4, 4));
    EXPECT_EQ(g.norm(), 0.0);
}

TEST(OptimalEqualizer, BeatsPerturbations) {
    RngStream rng(9);
    for (int inst = 0; inst < 10; ++inst) {
        const auto cfg = random_cfg(rng);
        const auto k = general_knowledge(cfg, rng, 0.3);
        auto tx = random_tx(cfg, rng);
        tx.equalizer = optimal_equalizer(cfg, k, tx.precoder, tx.forward);
        const double best = weighted_mse(cfg, k, tx);
        for (int t = 0; t < 100; ++t) {
            Transceiver pert = tx;
            const double scale = std::pow(10.0, -3.0 + 2.0 * rng.uniform());
            CMatrix d = rng.gaussian_matrix(4, 4);
            pert.equalizer += scale * tx.equalizer.norm() * d / d.norm();
            ASSERT_LE(best, weighted_mse(cfg, k, pert));
        }
    }
}

TEST(TildeMaps, ZeroPrecoderAndRoundTrip) {
    RngStream rng(10);
    const auto cfg = random_cfg(rng);
    const auto k = general_knowledge(cfg, rng, 0.3);
    const CMatrix f = rng.gaussian_matrix(4, 4);
    const TildeMaps zero(cfg, k, CMatrix::Zero(4, 4));
    EXPECT_LE((zero.pi_p() - CMatrix::Identity(4, 4)).norm(), 1e-15);
    EXPECT_LE((zero.to_tilde(f) - std::sqrt(cfg.sigma1_sq) * f).norm(), 1e-13 * f.norm());

    const auto tx = random_tx(cfg, rng);
    const TildeMaps maps = tilde_maps(cfg, k, tx.precoder);
    EXPECT_LE((maps.from_tilde(maps.to_tilde(f)) - f).norm(), 1e-10 * f.norm());
    const CMatrix ft = maps.to_tilde(f);
    const auto st = second_order_stats(cfg, k, tx.precoder, f);
    const double relay = (f * st.r_x * f.adjoint()).trace().real();
    EXPECT_LE(std::abs(relay - ft.squaredNorm()), 1e-9 * ft.squaredNorm());
}

TEST(ResidualMse, ZeroForwardAndConsistency) {
    RngStream rng(11);
    for (int inst = 0; inst < 20; ++inst) {
        const auto cfg = random_cfg(rng);
        const auto k = general_knowledge(cfg, rng, 0.3);
        const auto tx = random_tx(cfg, rng);
        EXPECT_NEAR(residual_weighted_mse(cfg, k, tx.precoder, CMatrix::Zero(4, 4)),
                    cfg.weight.trace().real(), 1e-14);
        const CMatrix ft = rng.gaussian_matrix(4, 4);
        const TildeMaps maps(cfg, k, tx.precoder);
        Transceiver full{tx.precoder, maps.from_tilde(ft), CMatrix()};
        full.equalizer = optimal_equalizer(cfg, k, full.precoder, full.forward);
        const double want = weighted_mse(cfg, k, full);
        EXPECT_LE(testsupport::rel_err(residual_weighted_mse(cfg, k, tx.precoder, ft), want), 1e-10);
    }
}

TEST(Transceiver, DimensionMismatch) {
    RngStream rng(12);
    const auto cfg = random_cfg(rng);
    const auto k = general_knowledge(cfg, rng, 0.3);
    auto tx = random_tx(cfg, rng);
    tx.forward = CMatrix::Zero(3, 4);
    EXPECT_THROW(weighted_mse(cfg, k, tx), InvalidInput);
}
