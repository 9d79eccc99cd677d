#pragma once

#include "gaitxfer/numerics/rng.hpp"
#include "gaitxfer/numerics/tensor.hpp"
#include "gaitxfer/sigprep.hpp"

#include <Eigen/Dense>

#include <cstdlib>
#include <filesystem>
#include <string>

namespace gxtest {

template <class T = double>
gaitxfer::nx::Tensor<T> random_tensor(gaitxfer::nx::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0)
{
    gaitxfer::nx::Rng rng(seed);
    gaitxfer::nx::Tensor<T> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    gaitxfer::nx::Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

inline gaitxfer::Frame random_frame(std::uint64_t seed, gaitxfer::Placement p = gaitxfer::Placement::wrist_single)
{
    gaitxfer::nx::Rng rng(seed);
    gaitxfer::Frame f;
    f.values.resize(gaitxfer::kAxes * gaitxfer::kFrameLength);
    for (auto& v : f.values) v = rng.normal();
    f.origin.subject_id = "s";
    f.origin.sensors = {p};
    return f;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("gaitxfer_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace gxtest
