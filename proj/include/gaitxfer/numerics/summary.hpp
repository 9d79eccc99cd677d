#pragma once

#include <cmath>
#include <span>

namespace gaitxfer {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

/// Mean and population standard deviation (two-pass).
inline MeanStd mean_std(std::span<const double> v)
{
    if (v.empty()) return {};
    double s = 0.0;
    for (double x : v) s += x;
    const double m = s / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size()))};
}

} // namespace gaitxfer
