#include "gaitxfer/classify.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace gaitxfer;

namespace {

struct Blobs {
    Eigen::MatrixXd x;
    std::vector<int> labels;
};

Blobs blobs(std::size_t per_class, Eigen::Index dim, double separation, std::uint64_t seed)
{
    nx::Rng rng(seed);
    Blobs b;
    b.x.resize(static_cast<Eigen::Index>(2 * per_class), dim);
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const int y = i % 2 == 0 ? 0 : 1;
        for (Eigen::Index j = 0; j < dim; ++j)
            b.x(static_cast<Eigen::Index>(i), j) = rng.normal() + (y ? separation : -separation) * (j == 0);
        b.labels.push_back(y);
    }
    return b;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& labels)
{
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == labels[i];
    return static_cast<double>(ok) / static_cast<double>(pred.size());
}

} // namespace

TEST(Mlp, ParameterCounts)
{
    EXPECT_EQ(build_mlp(192, 2, 1).parameter_count(), 45570u);
    EXPECT_EQ(build_mlp(19, 2, 1).parameter_count(), 34498u);
    EXPECT_EQ(build_mlp(1600, 2, 1).parameter_count(), 1600u * 64 + 64 + 45570u - (192u * 64 + 64));
}

TEST(Mlp, ProbabilitiesSumToOne)
{
    const auto m = build_mlp(7, 3, 2);
    const auto p = mlp_predict_proba(m, gxtest::random_matrix(25, 7, 3));
    ASSERT_EQ(p.cols(), 3);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-6);
        EXPECT_GE(p.row(i).minCoeff(), 0.0);
    }
}

TEST(Mlp, SeparatesBlobs)
{
    const auto b = blobs(60, 5, 2.5, 4);
    MlpConfig cfg;
    cfg.max_epochs = 200;
    auto m = build_mlp(5, 2, 5, cfg);
    train_mlp(m, b.x, b.labels);
    EXPECT_LE(m.loss_history.size(), 200u);
    EXPECT_EQ(accuracy(mlp_predict(m, b.x), b.labels), 1.0);
    EXPECT_LT(m.loss_history.back(), m.loss_history.front());
}

TEST(Mlp, SingleClassLabelsPredictThatClass)
{
    const Eigen::MatrixXd x = gxtest::random_matrix(40, 4, 6);
    const std::vector<int> labels(40, 1);
    MlpConfig cfg;
    cfg.max_epochs = 50;
    auto m = build_mlp(4, 2, 7, cfg);
    train_mlp(m, x, labels);
    for (int y : mlp_predict(m, x)) EXPECT_EQ(y, 1);
}

TEST(Mlp, DeterministicRetraining)
{
    const auto b = blobs(30, 6, 1.0, 8);
    MlpConfig cfg;
    cfg.max_epochs = 20;
    auto m1 = build_mlp(6, 2, 9, cfg), m2 = build_mlp(6, 2, 9, cfg);
    train_mlp(m1, b.x, b.labels);
    train_mlp(m2, b.x, b.labels);
    EXPECT_TRUE(m1.params == m2.params);
    EXPECT_EQ(m1.loss_history, m2.loss_history);
}

TEST(Mlp, InvalidInputsRejected)
{
    EXPECT_THROW(build_mlp(0, 2, 1), std::invalid_argument);
    EXPECT_THROW(build_mlp(3, 1, 1), std::invalid_argument);
    auto m = build_mlp(3, 2, 1);
    const std::vector<int> bad{0, 2};
    EXPECT_THROW(train_mlp(m, gxtest::random_matrix(2, 3, 1), bad), std::out_of_range);
    const std::vector<int> ok{0, 1};
    EXPECT_THROW(train_mlp(m, gxtest::random_matrix(2, 4, 1), ok), std::invalid_argument);
}

TEST(Svm, SeparatesOneDimensionalData)
{
    Eigen::MatrixXd x(8, 1);
    x << -4, -3, -2, -1, 1, 2, 3, 4;
    const std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1};
    const auto m = train_linear_svm(x, labels);
    EXPECT_EQ(svm_predict(m, x), labels);
    EXPECT_GT(m.weight(0), 0.0);
}

TEST(Svm, SymmetricDataHasZeroBias)
{
    const Eigen::MatrixXd half = gxtest::random_matrix(20, 3, 10);
    Eigen::MatrixXd x(40, 3);
    x << half, -half;
    std::vector<int> labels;
    for (int i = 0; i < 20; ++i) labels.push_back(half(i, 0) > 0 ? 1 : 0);
    for (int i = 0; i < 20; ++i) labels.push_back(half(i, 0) > 0 ? 0 : 1);
    const auto m = train_linear_svm(x, labels);
    EXPECT_LE(std::abs(m.bias), 1e-6);
}

TEST(Svm, PredictionsInvariantToFeatureScaleAfterStandardizing)
{
    const auto b = blobs(40, 4, 1.5, 11);
    const Eigen::MatrixXd big = b.x * 10.0;
    const auto s1 = fit_scaler(b.x, ScaleMode::per_feature), s2 = fit_scaler(big, ScaleMode::per_feature);
    const auto m1 = train_linear_svm(s1.apply(b.x), b.labels), m2 = train_linear_svm(s2.apply(big), b.labels);
    EXPECT_EQ(svm_predict(m1, s1.apply(b.x)), svm_predict(m2, s2.apply(big)));
    EXPECT_LE((m1.weight - m2.weight).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Svm, SingleClassRejected)
{
    const std::vector<int> labels(5, 1);
    EXPECT_THROW(train_linear_svm(gxtest::random_matrix(5, 2, 1), labels), std::invalid_argument);
}

TEST(Svm, DecisionSign)
{
    SvmModel m;
    m.weight = Eigen::Vector2d(1, 0);
    Eigen::MatrixXd x(2, 2);
    x << 3, -7, -3, 7;
    EXPECT_EQ(svm_predict(m, x), (std::vector<int>{1, 0}));
    EXPECT_DOUBLE_EQ(svm_decision(m, x)(0), 3.0);
}

TEST(Svm, BatchPredictMatchesPerRow)
{
    const auto b = blobs(25, 3, 1.0, 12);
    const auto m = train_linear_svm(b.x, b.labels, SvmConfig{1e-2, 500});
    const auto all = svm_predict(m, b.x);
    for (Eigen::Index i = 0; i < b.x.rows(); ++i) EXPECT_EQ(svm_predict(m, b.x.row(i))[0], all[static_cast<std::size_t>(i)]);
}

TEST(Svm, ObjectiveDecreasesOverall)
{
    const auto b = blobs(50, 6, 0.7, 13);
    const auto m = train_linear_svm(b.x, b.labels);
    ASSERT_GE(m.objective_history.size(), 2u);
    EXPECT_LE(m.objective_history.back(), m.objective_history.front() + 1e-12);
    EXPECT_LT(m.objective_history.back(), 1.0);
}

TEST(Scaler, PerFeatureAndGlobalModes)
{
    Eigen::MatrixXd x(4, 2);
    x << 1, 10, 2, 20, 3, 30, 4, 40;
    const auto pf = fit_scaler(x, ScaleMode::per_feature).apply(x);
    for (Eigen::Index j = 0; j < 2; ++j) {
        EXPECT_NEAR(pf.col(j).mean(), 0.0, 1e-12);
        EXPECT_NEAR(pf.col(j).squaredNorm() / 4.0, 1.0, 1e-12);
    }
    const auto gl = fit_scaler(x, ScaleMode::global).apply(x);
    EXPECT_NEAR(gl.squaredNorm() / 8.0, 1.0, 1e-12);
    EXPECT_NEAR(gl(0, 1) / gl(0, 0), 10.0, 1e-12);
    Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(3, 1, 5.0);
    EXPECT_EQ(fit_scaler(constant, ScaleMode::per_feature).apply(constant).cwiseAbs().maxCoeff(), 0.0);
}
