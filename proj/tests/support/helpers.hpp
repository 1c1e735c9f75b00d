#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "lgpc/rng.hpp"

namespace lgpc::testing {

/// n draws from N(0, R) via the Cholesky factor of R.
inline Eigen::MatrixXd gaussian_sample(const Eigen::MatrixXd& r, Eigen::Index n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    const Eigen::MatrixXd l = r.llt().matrixL();
    Eigen::MatrixXd e(n, r.rows());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < r.rows(); ++j) e(i, j) = g(rng);
    }
    return e * l.transpose();
}

inline Eigen::MatrixXd equicorrelated(Eigen::Index p, double rho) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Constant(p, p, rho);
    r.diagonal().setOnes();
    return r;
}

/// Random correlation matrix: normalized Gram matrix of a random p x (p+k) factor.
inline Eigen::MatrixXd random_correlation(Eigen::Index p, Rng& rng, Eigen::Index extra = 2) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd a(p, p + extra);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = g(rng);
    }
    Eigen::MatrixXd s = a * a.transpose();
    const Eigen::VectorXd d = s.diagonal().cwiseSqrt().cwiseInverse();
    return d.asDiagonal() * s * d.asDiagonal();
}

/// X2 = X1^2 + X3 with independent standard normal X1, X3; columns (X1, X2, X3).
inline Eigen::MatrixXd structural_sample(Eigen::Index n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd x(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x1 = g(rng);
        const double x3 = g(rng);
        x(i, 0) = x1;
        x(i, 1) = x1 * x1 + x3;
        x(i, 2) = x3;
    }
    return x;
}

/// Central difference of a scalar function along coordinate k.
inline double central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                  Eigen::Index k, double h) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const double up = f(x);
    x[k] = x0 - h;
    const double down = f(x);
    return (up - down) / (2.0 * h);
}

inline double sample_sd(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace lgpc::testing
