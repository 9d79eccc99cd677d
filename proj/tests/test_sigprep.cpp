#include "gaitxfer/sigprep.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gaitxfer;

namespace {

Recording ramp_recording(std::size_t length, Placement p = Placement::lumbar, std::string subject = "s1")
{
    Recording r;
    r.subject_id = std::move(subject);
    r.placement = p;
    for (std::size_t t = 0; t < length; ++t)
        r.samples.push_back({static_cast<double>(t), 2.0 * static_cast<double>(t) + 1.0, -static_cast<double>(t)});
    return r;
}

std::pair<double, double> axis_moments(const Recording& r, std::size_t a)
{
    double m = 0.0;
    for (const auto& s : r.samples) m += s[a];
    m /= static_cast<double>(r.length());
    double v = 0.0;
    for (const auto& s : r.samples) v += (s[a] - m) * (s[a] - m);
    return {m, std::sqrt(v / static_cast<double>(r.length()))};
}

Frame frame_for(Placement p, double fill, std::string subject = "s1", std::size_t window = 0)
{
    Frame f;
    f.values.assign(kAxes * kFrameLength, fill);
    f.origin = FrameOrigin{std::move(subject), 0, window, {p}};
    return f;
}

} // namespace

TEST(Normalize, ThreeSampleAxis)
{
    Recording r;
    r.samples = {{1, 5, 0}, {2, 5, 0}, {3, 5, 0}};
    const auto n = normalize(r);
    const double s = std::sqrt(1.5);
    EXPECT_NEAR(n.samples[0][0], -s, 1e-12);
    EXPECT_NEAR(n.samples[1][0], 0.0, 1e-12);
    EXPECT_NEAR(n.samples[2][0], s, 1e-12);
}

TEST(Normalize, ConstantChannelIsCenteredOnly)
{
    Recording r;
    r.samples = {{1, 5, 0}, {2, 5, 0}, {3, 5, 0}};
    const auto n = normalize(r);
    for (const auto& s : n.samples) {
        EXPECT_EQ(s[1], 0.0);
        EXPECT_EQ(s[2], 0.0);
    }
}

TEST(Normalize, ZeroMeanUnitStd)
{
    nx::Rng rng(3);
    Recording r;
    for (int t = 0; t < 777; ++t) r.samples.push_back({rng.normal() * 4 + 9, rng.uniform(-2, 7), rng.normal() - 30});
    const auto n = normalize(r);
    for (std::size_t a = 0; a < kAxes; ++a) {
        const auto [m, s] = axis_moments(n, a);
        EXPECT_LE(std::abs(m), 1e-9);
        EXPECT_LE(std::abs(s - 1.0), 1e-9);
    }
}

TEST(Normalize, Idempotent)
{
    const auto once = normalize(ramp_recording(300));
    const auto twice = normalize(once);
    for (std::size_t t = 0; t < once.length(); ++t)
        for (std::size_t a = 0; a < kAxes; ++a) EXPECT_NEAR(once.samples[t][a], twice.samples[t][a], 1e-12);
}

TEST(ExtractFrames, CountsWholeWindowsOnly)
{
    EXPECT_EQ(extract_frames(ramp_recording(600), 0, 0).size(), 2u);
    EXPECT_EQ(extract_frames(ramp_recording(250), 0, 0).size(), 1u);
    EXPECT_TRUE(extract_frames(ramp_recording(249), 0, 0).empty());
}

TEST(ExtractFrames, ChannelMajorLayoutAndOrigin)
{
    const auto frames = extract_frames(ramp_recording(600, Placement::sternum, "abc"), 4, 1);
    ASSERT_EQ(frames.size(), 2u);
    const Frame& f = frames[1];
    EXPECT_EQ(f.channels, 3u);
    EXPECT_EQ(f.values.size(), 750u);
    EXPECT_EQ(f.at(0, 0), 250.0);
    EXPECT_EQ(f.at(1, 10), 2.0 * 260 + 1);
    EXPECT_EQ(f.at(2, 249), -499.0);
    EXPECT_EQ(f.origin.subject_id, "abc");
    EXPECT_EQ(f.origin.recording_index, 4u);
    EXPECT_EQ(f.origin.window_index, 1u);
    ASSERT_EQ(f.origin.sensors.size(), 1u);
    EXPECT_EQ(f.origin.sensors[0], Placement::sternum);
    EXPECT_EQ(f.label, 1);
    EXPECT_NO_THROW(f.validate(2));
}

TEST(StackSensors, SixSensorsGiveEighteenChannels)
{
    std::map<Placement, Frame> by;
    for (std::size_t i = 0; i < kCanonicalSensors.size(); ++i)
        by[kCanonicalSensors[i]] = frame_for(kCanonicalSensors[i], static_cast<double>(i));
    const Frame s = stack_sensors(by, kCanonicalSensors);
    EXPECT_EQ(s.channels, 18u);
    EXPECT_EQ(s.values.size(), 18u * 250u);
    EXPECT_EQ(s.origin.sensors.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(s.at(3 * i, 0), static_cast<double>(i));
        EXPECT_EQ(s.at(3 * i + 2, 249), static_cast<double>(i));
    }
}

TEST(StackSensors, SingleSensorPassthrough)
{
    Frame f = gxtest::random_frame(5, Placement::left_ankle);
    const std::array order{Placement::left_ankle};
    const Frame s = stack_sensors({{Placement::left_ankle, f}}, order);
    EXPECT_EQ(s.values, f.values);
    EXPECT_EQ(s.channels, 3u);
}

TEST(StackSensors, SliceRoundtrip)
{
    std::map<Placement, Frame> by;
    for (std::size_t i = 0; i < kCanonicalSensors.size(); ++i) {
        Frame f = gxtest::random_frame(100 + i, kCanonicalSensors[i]);
        by[kCanonicalSensors[i]] = f;
    }
    const Frame s = stack_sensors(by, kCanonicalSensors);
    for (std::size_t i = 0; i < kCanonicalSensors.size(); ++i) {
        const Frame back = slice_sensor(s, i);
        EXPECT_EQ(back.values, by[kCanonicalSensors[i]].values);
        EXPECT_EQ(back.origin.sensors, std::vector<Placement>{kCanonicalSensors[i]});
        EXPECT_EQ(sensor_index(s, kCanonicalSensors[i]), i);
    }
    EXPECT_THROW(slice_sensor(s, 6), std::out_of_range);
}

TEST(StackSensors, MissingSensorRejected)
{
    std::map<Placement, Frame> by{{Placement::lumbar, frame_for(Placement::lumbar, 1)}};
    const std::array order{Placement::lumbar, Placement::sternum};
    EXPECT_THROW(stack_sensors(by, order), std::invalid_argument);
}

TEST(StackSensors, MismatchedWindowRejected)
{
    std::map<Placement, Frame> by{{Placement::lumbar, frame_for(Placement::lumbar, 1, "s1", 0)},
                                  {Placement::sternum, frame_for(Placement::sternum, 1, "s1", 1)}};
    const std::array order{Placement::sternum, Placement::lumbar};
    EXPECT_THROW(stack_sensors(by, order), std::invalid_argument);
}

TEST(StackSensors, ShortFrameRejected)
{
    Frame f = frame_for(Placement::lumbar, 1);
    f.values.resize(3 * 249);
    const std::array order{Placement::lumbar};
    EXPECT_THROW(stack_sensors({{Placement::lumbar, f}}, order), std::invalid_argument);
}

TEST(Placements, ParseAndCanonicalOrder)
{
    for (Placement p : kCanonicalSensors) EXPECT_EQ(parse_placement(to_string(p)), p);
    EXPECT_FALSE(parse_placement("elbow"));
    EXPECT_THROW(placement_or_throw("elbow"), std::invalid_argument);
    const auto ordered = canonical_order({Placement::right_wrist, Placement::sternum, Placement::left_ankle});
    EXPECT_EQ(ordered, (std::vector{Placement::sternum, Placement::left_ankle, Placement::right_wrist}));
    EXPECT_THROW(canonical_order({Placement::lumbar, Placement::lumbar}), std::invalid_argument);
}
