#include "gaitxfer/statfeat.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace gaitxfer;

namespace {

Frame constant_frame(double v)
{
    Frame f;
    f.values.assign(750, v);
    f.origin.sensors = {Placement::lumbar};
    return f;
}

} // namespace

TEST(StatFeatures, ConstantFrame)
{
    const auto f = stat_features(constant_frame(5.0));
    for (std::size_t a = 0; a < 3; ++a) {
        EXPECT_DOUBLE_EQ(f.mean(a), 5.0);
        EXPECT_DOUBLE_EQ(f.var(a), 0.0);
        EXPECT_DOUBLE_EQ(f.rms(a), 5.0);
        EXPECT_DOUBLE_EQ(f.range(a), 0.0);
    }
    EXPECT_EQ(f.rho_xy(), 0.0);
    EXPECT_EQ(f.rho_yz(), 0.0);
    EXPECT_EQ(f.rho_xz(), 0.0);
    EXPECT_EQ(f.values[18], 0.0);
}

TEST(StatFeatures, AlternatingUnitFrame)
{
    Frame fr = constant_frame(0.0);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t t = 0; t < 250; ++t) fr.values[c * 250 + t] = t % 2 ? -1.0 : 1.0;
    const auto f = stat_features(fr);
    for (std::size_t a = 0; a < 3; ++a) {
        EXPECT_NEAR(f.mean(a), 0.0, 1e-15);
        EXPECT_DOUBLE_EQ(f.var(a), 1.0);
        EXPECT_DOUBLE_EQ(f.rms(a), 1.0);
        EXPECT_DOUBLE_EQ(f.range(a), 2.0);
    }
    EXPECT_DOUBLE_EQ(f.rho_xy(), 1.0);
    EXPECT_DOUBLE_EQ(f.rho_yz(), 1.0);
    EXPECT_DOUBLE_EQ(f.rho_xz(), 1.0);
    EXPECT_DOUBLE_EQ(f.values[15], 2.0 * std::numbers::sqrt2);
    EXPECT_DOUBLE_EQ(f.values[18], 2.0 * std::numbers::sqrt3);
}

TEST(StatFeatures, MatchesEigenOracleOnRandomFrames)
{
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        nx::Rng rng(s);
        Frame fr = gxtest::random_frame(s);
        const double scale = rng.uniform(0.1, 5.0), shift = rng.uniform(-3.0, 3.0);
        for (auto& v : fr.values) v = v * scale + shift;
        const auto f = stat_features(fr);
        const auto o = gxtest::stat_oracle(fr);
        for (std::size_t i = 0; i < 19; ++i) worst = std::max(worst, std::abs(f.values[i] - o[i]));
    }
    EXPECT_LE(worst, 1e-10);
}

TEST(StatFeatures, RmsSquaredIsVariancePlusMeanSquared)
{
    for (std::uint64_t s = 0; s < 50; ++s) {
        Frame fr = gxtest::random_frame(s);
        for (auto& v : fr.values) v += 2.0;
        const auto f = stat_features(fr);
        for (std::size_t a = 0; a < 3; ++a)
            EXPECT_NEAR(f.rms(a) * f.rms(a), f.var(a) + f.mean(a) * f.mean(a), 1e-10);
    }
}

TEST(StatFeatures, CorrelationExtremes)
{
    Frame fr = gxtest::random_frame(9);
    for (std::size_t t = 0; t < 250; ++t) {
        fr.values[250 + t] = 3.0 * fr.values[t] + 1.0;
        fr.values[500 + t] = -fr.values[t];
    }
    const auto f = stat_features(fr);
    EXPECT_NEAR(f.rho_xy(), 1.0, 1e-12);
    EXPECT_NEAR(f.rho_xz(), -1.0, 1e-12);
    EXPECT_NEAR(f.rho_yz(), -1.0, 1e-12);
}

TEST(StatFeatures, NameOrder)
{
    const std::array<std::string, 19> expected = {"mean_x", "mean_y", "mean_z", "var_x", "var_y",  "var_z",  "rms_x",
                                                  "rms_y",  "rms_z",  "rho_xy", "rho_yz", "rho_xz", "dx",    "dy",
                                                  "dz",     "d_xy",   "d_yz",   "d_xz",  "d_xyz"};
    for (std::size_t i = 0; i < 19; ++i) EXPECT_EQ(StatFeatureVector::kNames[i], expected[i]);
}

TEST(StatFeatures, StackedConcatenatesPerSensor)
{
    Frame a = gxtest::random_frame(1, Placement::lumbar), b = gxtest::random_frame(2, Placement::sternum);
    const std::array order{Placement::lumbar, Placement::sternum};
    const Frame s = stack_sensors({{Placement::lumbar, a}, {Placement::sternum, b}}, order);
    const auto v = stacked_stat_features(s);
    ASSERT_EQ(v.size(), 38u);
    const auto fa = stat_features(a), fb = stat_features(b);
    for (std::size_t i = 0; i < 19; ++i) {
        EXPECT_EQ(v[i], fa.values[i]);
        EXPECT_EQ(v[19 + i], fb.values[i]);
    }
}

TEST(StatFeatures, EmptyOrUnequalAxesRejected)
{
    std::vector<double> x(10), y(9);
    EXPECT_THROW(stat_features(x, y, x), std::invalid_argument);
    EXPECT_THROW(stat_features(std::span<const double>{}, std::span<const double>{}, std::span<const double>{}),
                 std::invalid_argument);
}

TEST(JointStatistics, SingleAndDuplicateSamplesHaveZeroStd)
{
    const auto f = stat_features(gxtest::random_frame(4));
    const std::vector<StatSample> samples{{Placement::lumbar, "healthy", f},
                                          {Placement::sternum, "healthy", f},
                                          {Placement::sternum, "healthy", f}};
    const std::array placements{Placement::lumbar, Placement::sternum};
    const std::array<std::string, 1> classes{"healthy"};
    const auto rows = joint_statistics_table(samples, placements, classes);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].count, 1u);
    EXPECT_EQ(rows[1].count, 2u);
    for (const auto& r : rows)
        for (const auto& c : r.columns) EXPECT_EQ(c.std, 0.0);
    EXPECT_DOUBLE_EQ(rows[1].columns[0].mean, f.rms(0));
}

TEST(JointStatistics, MatchesTwoPassOracle)
{
    std::vector<StatSample> samples;
    for (std::uint64_t s = 0; s < 20; ++s)
        samples.push_back({Placement::left_wrist, "patient", stat_features(gxtest::random_frame(50 + s))});
    samples.push_back({Placement::left_wrist, "healthy", stat_features(gxtest::random_frame(999))});
    const std::array placements{Placement::left_wrist, Placement::right_wrist};
    const std::array<std::string, 2> classes{"healthy", "patient"};
    const auto rows = joint_statistics_table(samples, placements, classes);
    ASSERT_EQ(rows.size(), 2u);
    const auto& r = rows[1];
    EXPECT_EQ(r.class_label, "patient");
    EXPECT_EQ(r.count, 20u);
    const std::array<std::size_t, 9> idx{6, 7, 8, 9, 10, 11, 12, 13, 14};
    for (std::size_t c = 0; c < 9; ++c) {
        double m = 0.0;
        for (std::size_t i = 0; i < 20; ++i) m += samples[i].features.values[idx[c]];
        m /= 20.0;
        double v = 0.0;
        for (std::size_t i = 0; i < 20; ++i) v += std::pow(samples[i].features.values[idx[c]] - m, 2);
        EXPECT_NEAR(r.columns[c].mean, m, 1e-12);
        EXPECT_NEAR(r.columns[c].std, std::sqrt(v / 20.0), 1e-12);
    }
    std::ostringstream os;
    write_joint_statistics_tsv(os, rows);
    EXPECT_NE(os.str().find("left_wrist\tpatient\t20\t"), std::string::npos);
}
