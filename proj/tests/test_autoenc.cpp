#include "gaitxfer/autoenc.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace gaitxfer;

namespace {

// Normalized three-axis sinusoid windows with random frequency and phase.
std::vector<Frame> gait_like_frames(std::size_t n, std::uint64_t seed)
{
    nx::Rng rng(seed);
    std::vector<Frame> out;
    for (std::size_t i = 0; i < n; ++i) {
        Recording r;
        r.subject_id = "s" + std::to_string(i);
        const double f = rng.uniform(0.8, 1.2), ph = rng.uniform(0.0, 2 * std::numbers::pi);
        for (std::size_t t = 0; t < kFrameLength; ++t) {
            const double x = 2 * std::numbers::pi * f * static_cast<double>(t) / 128.0 + ph;
            r.samples.push_back({std::sin(x) + 0.05 * rng.normal(), 0.5 * std::sin(2 * x + 1.0) + 0.05 * rng.normal(),
                                 std::cos(x) + 0.3 * std::sin(3 * x) + 0.05 * rng.normal()});
        }
        out.push_back(extract_frames(normalize(r), i, 0).front());
    }
    return out;
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to)
{
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += v[i];
    return s / static_cast<double>(to - from);
}

} // namespace

TEST(Autoencoder, LatentShape)
{
    const auto m = build_autoencoder(AutoencoderConfig{}, 1);
    const auto z = encode(m, gxtest::random_frame(2));
    EXPECT_EQ(z.shape(), (nx::Shape{32, 250}));
    const std::vector<Frame> frames{gxtest::random_frame(3), gxtest::random_frame(4)};
    EXPECT_EQ(reconstruct(m, frames).shape(), (nx::Shape{3, 2, 250}));
}

TEST(Autoencoder, ParameterCountNearReference)
{
    const auto count = static_cast<double>(build_autoencoder(AutoencoderConfig{}, 1).parameter_count());
    EXPECT_LE(std::abs(count - 264265.0) / 264265.0, 0.15) << count;
    EXPECT_EQ(build_autoencoder(AutoencoderConfig{}, 1).parameter_count(), 273139u);
}

TEST(Autoencoder, SameSeedSameParameters)
{
    const auto a = build_autoencoder(AutoencoderConfig{}, 5), b = build_autoencoder(AutoencoderConfig{}, 5);
    const auto c = build_autoencoder(AutoencoderConfig{}, 6);
    EXPECT_TRUE(a.encoder() == b.encoder());
    EXPECT_TRUE(a.decoder() == b.decoder());
    EXPECT_FALSE(a.encoder() == c.encoder());
}

TEST(Autoencoder, ZeroEpochsLeavesModelUnchanged)
{
    AutoencoderConfig cfg;
    cfg.epochs = 0;
    const auto before = build_autoencoder(cfg, 7);
    auto after = before;
    const std::vector<Frame> frames{gxtest::random_frame(1)};
    train_autoencoder(after, frames);
    EXPECT_TRUE(before.encoder() == after.encoder());
    EXPECT_TRUE(before.decoder() == after.decoder());
    EXPECT_TRUE(after.loss_history().empty());
}

TEST(Autoencoder, EncodingIsDeterministicAndBatchIndependent)
{
    const auto m = build_autoencoder(AutoencoderConfig{}, 8);
    std::vector<Frame> frames;
    for (std::uint64_t s = 0; s < 5; ++s) frames.push_back(gxtest::random_frame(s));
    const auto batch = encode_frames(m, frames);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto single = encode(m, frames[i]);
        EXPECT_EQ(single, encode(m, frames[i]));
        double worst = 0.0;
        for (std::size_t k = 0; k < single.size(); ++k)
            worst = std::max(worst, static_cast<double>(std::abs(single[k] - batch[i][k])));
        EXPECT_LE(worst, 1e-5);
    }
}

TEST(Autoencoder, ZeroFrameGivesZeroLatentWithoutBatchnorm)
{
    AutoencoderConfig cfg;
    cfg.use_batchnorm = false;
    const auto m = build_autoencoder(cfg, 9);
    Frame zero = gxtest::random_frame(1);
    std::fill(zero.values.begin(), zero.values.end(), 0.0);
    const auto z = encode(m, zero);
    for (float v : z.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Autoencoder, TrainingReducesLossAndGeneralizes)
{
    AutoencoderConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 11;
    auto m = build_autoencoder(cfg, 11);
    const auto train = gait_like_frames(24, 12), held_out = gait_like_frames(8, 13);
    const double before = reconstruction_mse(m, held_out);
    train_autoencoder(m, train);
    const auto& h = m.loss_history();
    ASSERT_EQ(h.size(), 30u);
    EXPECT_LT(mean_of(h, 25, 30), 0.5 * mean_of(h, 0, 5));
    const double after = reconstruction_mse(m, held_out);
    EXPECT_LT(after, 1.0);
    EXPECT_LT(after, before);
}

TEST(Autoencoder, TrainingIsReproducible)
{
    AutoencoderConfig cfg;
    cfg.epochs = 2;
    const auto frames = gait_like_frames(6, 14);
    auto a = build_autoencoder(cfg, 15), b = build_autoencoder(cfg, 15);
    train_autoencoder(a, frames);
    train_autoencoder(b, frames);
    EXPECT_TRUE(a.encoder() == b.encoder());
    EXPECT_TRUE(a.decoder() == b.decoder());
    EXPECT_EQ(a.loss_history(), b.loss_history());
}

TEST(Autoencoder, InvalidConfigsRejected)
{
    AutoencoderConfig cfg;
    cfg.dropout_rate = 1.0;
    EXPECT_THROW(build_autoencoder(cfg, 1), std::invalid_argument);
    cfg = {};
    cfg.kernel_width = 4;
    EXPECT_THROW(build_autoencoder(cfg, 1), std::invalid_argument);
    cfg = {};
    cfg.latent_channels = 16;
    EXPECT_THROW(build_autoencoder(cfg, 1), std::invalid_argument);
    cfg.reference_architecture = false;
    EXPECT_EQ(encode(build_autoencoder(cfg, 1), gxtest::random_frame(1)).shape(), (nx::Shape{16, 250}));
    auto m = build_autoencoder(AutoencoderConfig{}, 1);
    EXPECT_THROW(train_autoencoder(m, std::vector<Frame>{}), std::invalid_argument);
}
