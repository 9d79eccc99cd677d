#include "gaitxfer/reduce.hpp"
#include "pca_oracle.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gaitxfer;
using gxtest::random_matrix;

namespace {

LatentMap random_latents(std::span<const Placement> order, std::uint64_t seed)
{
    LatentMap m;
    for (std::size_t i = 0; i < order.size(); ++i)
        m.emplace(order[i], gxtest::random_tensor<float>({kLatentChannels, kFrameLength}, seed + i));
    return m;
}

bool non_increasing(const std::vector<double>& v)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[i - 1]) return false;
    return true;
}

} // namespace

TEST(Pca, RankOneDataExplainedByOneComponent)
{
    Eigen::MatrixXd x(30, 3);
    for (int i = 0; i < 30; ++i) {
        const double t = 0.37 * i - 4.0;
        x.row(i) << t, 2 * t, 3 * t;
    }
    const auto m = fit_pca(x, 2);
    EXPECT_NEAR(m.explained_ratio[0], 1.0, 1e-12);
    EXPECT_NEAR(m.explained_ratio[1], 0.0, 1e-12);
    const Eigen::Vector3d dir = Eigen::Vector3d(1, 2, 3).normalized();
    EXPECT_NEAR(std::abs(m.components.row(0).dot(dir)), 1.0, 1e-12);
}

TEST(Pca, CovarianceRouteMatchesJacobiOracle)
{
    const Eigen::MatrixXd x = random_matrix(50, 10, 11) * random_matrix(10, 10, 12);
    const auto m = fit_pca(x, 10, PcaRoute::covariance);
    const auto o = gxtest::pca_oracle_jacobi(x);
    EXPECT_LE(gxtest::max_component_error(m.components, o.vectors, 10), 1e-8);
    EXPECT_LE(gxtest::max_variance_error(m.explained_variance, o.values, 10), 1e-8);
}

TEST(Pca, GramRouteMatchesSvdOracle)
{
    const Eigen::MatrixXd x = random_matrix(20, 500, 13);
    const auto m = fit_pca(x, 19, PcaRoute::gram);
    const auto o = gxtest::pca_oracle_svd(x);
    EXPECT_LE(gxtest::max_component_error(m.components, o.vectors, 19), 1e-8);
    EXPECT_LE(gxtest::max_variance_error(m.explained_variance, o.values, 19), 1e-8);
}

TEST(Pca, GramAndCovarianceRoutesAgree)
{
    const Eigen::MatrixXd x = random_matrix(20, 60, 14);
    const auto g = fit_pca(x, 19, PcaRoute::gram);
    const auto c = fit_pca(x, 19, PcaRoute::covariance);
    EXPECT_LE((g.components - c.components).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE(gxtest::max_variance_error(g.explained_variance, c.explained_variance, 19), 1e-10);
}

TEST(Pca, AutomaticRouteIsDeterministic)
{
    const Eigen::MatrixXd x = random_matrix(25, 300, 15);
    const auto a = fit_pca(x, 10);
    const auto b = fit_pca(x, 10);
    EXPECT_EQ(a.components, b.components);
    EXPECT_EQ(a.explained_variance, b.explained_variance);
}

TEST(Pca, CanonicalSignConvention)
{
    const auto m = fit_pca(random_matrix(40, 8, 16), 8);
    for (Eigen::Index r = 0; r < m.components.rows(); ++r) {
        Eigen::Index arg;
        m.components.row(r).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(m.components(r, arg), 0.0);
    }
}

TEST(Pca, MeanProjectsToOrigin)
{
    const Eigen::MatrixXd x = random_matrix(30, 12, 17);
    const auto m = fit_pca(x, 5);
    const std::vector<double> mean(m.mean.data(), m.mean.data() + m.mean.size());
    EXPECT_LE(pca_transform(m, mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, FullRankRoundtrip)
{
    const Eigen::MatrixXd x = random_matrix(40, 8, 18);
    const auto m = fit_pca(x, 8);
    const Eigen::MatrixXd z = pca_transform(m, x);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        EXPECT_LE((pca_reconstruct(m, z.row(i).transpose()) - x.row(i).transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(m.retained_ratio(), 1.0, 1e-12);
}

TEST(Pca, ComponentsOrthonormal)
{
    const auto m = fit_pca(random_matrix(15, 200, 19), 14);
    const Eigen::MatrixXd gram = m.components * m.components.transpose();
    EXPECT_LE((gram - Eigen::MatrixXd::Identity(14, 14)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pca, ExplainedRatioMonotone)
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto m = fit_pca(random_matrix(30, 40, 100 + s), 29);
        EXPECT_TRUE(non_increasing(m.explained_ratio));
        EXPECT_LE(m.retained_ratio(), 1.0 + 1e-12);
    }
}

TEST(Pca, ComponentCountClamped)
{
    const auto m = fit_pca(random_matrix(10, 50, 20), 1600);
    EXPECT_EQ(m.k(), 9u);
    EXPECT_EQ(fit_pca(random_matrix(30, 4, 21), 10).k(), 4u);
}

TEST(Pca, BatchTransformMatchesSingle)
{
    const Eigen::MatrixXd x = random_matrix(12, 30, 22);
    const auto m = fit_pca(x, 6);
    const Eigen::MatrixXd z = pca_transform(m, x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Eigen::VectorXd row = x.row(i).transpose();
        const auto zi = pca_transform(m, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
        EXPECT_LE((zi - z.row(i).transpose()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Pca, InvalidInputsRejected)
{
    EXPECT_THROW(fit_pca(random_matrix(1, 5, 1), 1), std::invalid_argument);
    EXPECT_THROW(fit_pca(random_matrix(5, 5, 1), 0), std::invalid_argument);
    Eigen::MatrixXd bad = random_matrix(5, 5, 1);
    bad(2, 2) = std::nan("");
    EXPECT_THROW(fit_pca(bad, 2), std::invalid_argument);
    const auto m = fit_pca(random_matrix(5, 5, 2), 2);
    EXPECT_THROW(pca_transform(m, std::vector<double>(4)), nx::ShapeError);
}

TEST(Vectorize, LatentDimensions)
{
    EXPECT_EQ(vectorize_latents(random_latents(kCanonicalSensors, 1), kCanonicalSensors).size(), 48000u);
    const std::array one{Placement::lumbar};
    EXPECT_EQ(vectorize_latents(random_latents(one, 2), one).size(), 8000u);
    EXPECT_EQ(pre_reduction_dim(FeatureKind::pca_latent, 6), 48000u);
    EXPECT_EQ(pre_reduction_dim(FeatureKind::gap_latent, 6), 192u);
    EXPECT_EQ(pre_reduction_dim(FeatureKind::pca_raw, 6), 4500u);
    EXPECT_EQ(pre_reduction_dim(FeatureKind::statfeat, 1), 19u);
}

TEST(Vectorize, LatentRoundtrip)
{
    const auto lat = random_latents(kCanonicalSensors, 3);
    const auto back = devectorize_latents(vectorize_latents(lat, kCanonicalSensors), kCanonicalSensors);
    for (Placement p : kCanonicalSensors) EXPECT_EQ(back.at(p), lat.at(p));
    EXPECT_THROW(devectorize_latents(std::vector<double>(100), kCanonicalSensors), nx::ShapeError);
}

TEST(Vectorize, SensorOrderRespected)
{
    const std::array order{Placement::right_wrist, Placement::sternum};
    const auto lat = random_latents(order, 4);
    const auto v = vectorize_latents(lat, order);
    EXPECT_EQ(v[0], lat.at(Placement::right_wrist).data()[0]);
    EXPECT_EQ(v[8000], lat.at(Placement::sternum).data()[0]);
}

TEST(Gap, MatchesBlockwiseMean)
{
    const auto lat = random_latents(kCanonicalSensors, 5);
    const auto g = gap_features(lat, kCanonicalSensors);
    ASSERT_EQ(g.size(), 192u);
    const auto v = vectorize_latents(lat, kCanonicalSensors);
    for (std::size_t b = 0; b < 192; ++b) {
        double s = 0.0;
        for (std::size_t t = 0; t < 250; ++t) s += v[b * 250 + t];
        EXPECT_NEAR(g[b], s / 250.0, 1e-12);
    }
    const std::array one{Placement::left_ankle};
    EXPECT_EQ(gap_features(random_latents(one, 6), one).size(), 32u);
}

TEST(Gap, MissingSensorRejected)
{
    const std::array one{Placement::left_ankle};
    const std::array other{Placement::lumbar};
    EXPECT_THROW(gap_features(random_latents(one, 6), other), std::invalid_argument);
}

TEST(RawBaseline, DimensionsAndRoundtrip)
{
    std::map<Placement, Frame> by;
    for (std::size_t i = 0; i < 6; ++i) by[kCanonicalSensors[i]] = gxtest::random_frame(i, kCanonicalSensors[i]);
    const Frame stacked = stack_sensors(by, kCanonicalSensors);
    const auto v = raw_baseline(stacked);
    EXPECT_EQ(v.size(), 4500u);
    EXPECT_EQ(raw_devectorize(v, kCanonicalSensors).values, stacked.values);
    EXPECT_EQ(raw_baseline(gxtest::random_frame(9)).size(), 750u);
    EXPECT_THROW(raw_devectorize(std::vector<double>(749), std::array{Placement::lumbar}), nx::ShapeError);
}
