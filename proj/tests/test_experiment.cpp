#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "afrelay/errors.hpp"
#include "afrelay/experiment.hpp"

using namespace afrelay;

namespace {

ExperimentSpec tiny() {
    ExperimentSpec s;
    s.est_snr_db = {0.0, 20.0};
    s.n_channel_draws = 8;
    s.n_symbols = 20;
    s.seed = 42;
    return s;
}

}  // namespace

TEST(Spec, DefaultsValidate) { EXPECT_NO_THROW(ExperimentSpec{}.validate()); }

TEST(Spec, ParseRejectsUnknownAndBadFields) {
    try {
        parse_spec(nlohmann::json{{"n_streamz", 2}});
        FAIL();
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("n_streamz"), std::string::npos);
    }
    try {
        parse_spec(nlohmann::json{{"weights", {1.0, 2.0}}});
        FAIL();
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("weights"), std::string::npos);
    }
    EXPECT_THROW(parse_spec(nlohmann::json{{"alpha", 1.0}}), InvalidInput);
    EXPECT_THROW(parse_spec(nlohmann::json{{"n_channel_draws", 0}}), InvalidInput);
    EXPECT_THROW(parse_spec(nlohmann::json{{"algorithms", {"robust"}}}), InvalidInput);
    EXPECT_THROW(parse_spec(nlohmann::json{{"est_snr_db", nlohmann::json::array()}}), InvalidInput);
    EXPECT_THROW(parse_spec(nlohmann::json{{"n_s", "four"}}), InvalidInput);
}

TEST(Spec, JsonRoundTrip) {
    ExperimentSpec s = tiny();
    s.est_snr_db.push_back(std::numeric_limits<double>::infinity());
    s.algorithms = {Algorithm::Naive};
    const auto back = parse_spec(spec_to_json(s));
    EXPECT_EQ(back.est_snr_db.size(), 3u);
    EXPECT_TRUE(std::isinf(back.est_snr_db[2]));
    EXPECT_EQ(back.seed, 42u);
    ASSERT_EQ(back.algorithms.size(), 1u);
    EXPECT_EQ(back.algorithms[0], Algorithm::Naive);
}

TEST(Experiment, PerfectNoiselessSinglePoint) {
    ExperimentSpec s = tiny();
    s.est_snr_db = {std::numeric_limits<double>::infinity()};
    s.source_snr_db = s.relay_snr_db = 200.0;
    s.n_channel_draws = 1;
    s.algorithms = {Algorithm::RobustFull};
    const auto rec = run_experiment(s);
    ASSERT_EQ(rec.size(), 1u);
    EXPECT_EQ(rec[0].ber, 0.0);
    EXPECT_LE(rec[0].wmse_empirical, 1e-12);
    EXPECT_LE(rec[0].wmse_analytic, 1e-12);
}

TEST(Experiment, ThreadCountDoesNotChangeOutput) {
    ExperimentSpec s = tiny();
    s.threads = 1;
    const std::string a = format_csv(run_experiment(s));
    s.threads = 3;
    const std::string b = format_csv(run_experiment(s));
    EXPECT_EQ(a, b);
}

TEST(Csv, OneRecordTwoLinesSortedRoundTrip) {
    ExperimentRecord r;
    r.est_snr_db = 5.0;
    r.algorithm = Algorithm::RobustNoPre;
    r.wmse_analytic = 0.123456789012345;
    r.wmse_empirical = 1.0 / 3.0;
    r.ber = 0.01;
    r.n_draws = 10;
    r.n_failed = 1;
    r.seed = 9;
    const std::string one = format_csv({r});
    EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 2);

    const std::string path = ::testing::TempDir() + "afrelay_csv_test.csv";
    ExperimentRecord r2 = r;
    r2.algorithm = Algorithm::Naive;
    ExperimentRecord r3 = r;
    r3.est_snr_db = -5.0;
    emit_csv({r, r2, r3}, path);
    std::ifstream in(path);
    const auto back = parse_csv(in);
    ASSERT_EQ(back.size(), 3u);
    EXPECT_EQ(back[0].est_snr_db, -5.0);
    EXPECT_EQ(back[1].algorithm, Algorithm::Naive);
    EXPECT_EQ(back[2].algorithm, Algorithm::RobustNoPre);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", r.wmse_analytic);
    EXPECT_EQ(back[2].wmse_analytic, std::stod(buf));
    std::snprintf(buf, sizeof buf, "%.12g", r.wmse_empirical);
    EXPECT_EQ(back[2].wmse_empirical, std::stod(buf));
    EXPECT_EQ(back[2].n_failed, 1u);
    std::remove(path.c_str());

    EXPECT_THROW(emit_csv({}, path), InvalidInput);
    EXPECT_THROW(emit_csv({r}, "/nonexistent-dir/x.csv"), Error);
}

TEST(Selftest, PassesOnSmallSpec) {
    std::ostringstream log;
    EXPECT_TRUE(run_selftest(tiny(), log)) << log.str();
}

// Scalar chain, single point: empirical mean within its reported spread of the analytic one.
TEST(Experiment, ScalarSinglePointSelfConsistent) {
    ExperimentSpec s;
    s.n_s = s.m_r = s.n_r = s.m_d = s.n_streams = 1;
    s.alpha = 0.0;
    s.source_snr_db = s.relay_snr_db = 10.0;
    s.est_snr_db = {10.0};
    s.weights = {1.0};
    s.n_channel_draws = 200;
    s.n_symbols = 200;
    s.seed = 3;
    s.algorithms = {Algorithm::RobustFull};
    const auto rec = run_experiment(s);
    ASSERT_EQ(rec.size(), 1u);
    EXPECT_GT(rec[0].wmse_std_error, 0.0);
    EXPECT_LE(std::abs(rec[0].wmse_empirical - rec[0].wmse_analytic), 3.0 * rec[0].wmse_std_error);
}
