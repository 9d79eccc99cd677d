#pragma once

#include "gaitxfer/reduce.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace gxtest {

struct EigenPairs {
    std::vector<double> values;
    Eigen::MatrixXd vectors; // one eigenvector per row, descending eigenvalue
};

/// Cyclic Jacobi rotations on a symmetric matrix.
inline EigenPairs jacobi_eigen(Eigen::MatrixXd a, int sweeps = 100)
{
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    for (int s = 0; s < sweeps; ++s) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), sn = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) > a(j, j); });
    EigenPairs out;
    out.vectors.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        out.values.push_back(a(order[static_cast<std::size_t>(r)], order[static_cast<std::size_t>(r)]));
        out.vectors.row(r) = v.col(order[static_cast<std::size_t>(r)]).transpose();
    }
    return out;
}

/// Principal axes from the covariance matrix through Jacobi rotations.
inline EigenPairs pca_oracle_jacobi(const Eigen::MatrixXd& x)
{
    const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
    return jacobi_eigen(xc.transpose() * xc / static_cast<double>(x.rows() - 1));
}

/// Principal axes from the thin SVD of the centered data.
inline EigenPairs pca_oracle_svd(const Eigen::MatrixXd& x)
{
    const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinV);
    EigenPairs out;
    const auto s = svd.singularValues();
    for (Eigen::Index i = 0; i < s.size(); ++i) out.values.push_back(s(i) * s(i) / static_cast<double>(x.rows() - 1));
    out.vectors = svd.matrixV().transpose();
    return out;
}

/// Largest coordinate difference between the first k rows, each compared up to sign.
inline double max_component_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::Index k)
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        const double plus = (a.row(i) - b.row(i)).cwiseAbs().maxCoeff();
        const double minus = (a.row(i) + b.row(i)).cwiseAbs().maxCoeff();
        worst = std::max(worst, std::min(plus, minus));
    }
    return worst;
}

inline double max_variance_error(const std::vector<double>& a, const std::vector<double>& b, std::size_t k)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

} // namespace gxtest
