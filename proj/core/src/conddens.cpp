#include "lgpc/conddens.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lgpc/error.hpp"

namespace lgpc {

std::pair<double, double> conditional_params(const Eigen::MatrixXd& r, Eigen::Index target,
                                             const Eigen::VectorXd& conditioning_values) {
    const Eigen::Index p = r.rows();
    if (r.cols() != p || target < 0 || target >= p) throw InvalidInput("conditional_params: bad matrix or target");
    if (conditioning_values.size() != p - 1) throw InvalidInput("conditional_params: need one value per conditioner");
    if (p == 1) return {0.0, 1.0};
    std::vector<Eigen::Index> rest;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (j != target) rest.push_back(j);
    }
    const auto m = static_cast<Eigen::Index>(rest.size());
    Eigen::MatrixXd r22(m, m);
    Eigen::VectorXd r21(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        r21[a] = r(rest[a], target);
        for (Eigen::Index c = 0; c < m; ++c) r22(a, c) = r(rest[a], rest[c]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(r22);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() < 1e-12) {
        throw SingularConditioning("conditional_params: conditioning block is singular");
    }
    const Eigen::VectorXd coef = ldlt.solve(r21);
    const double mu = coef.dot(conditioning_values);
    const double sigma2 = r(target, target) - r21.dot(coef);
    if (!(sigma2 > 0.0)) throw SingularConditioning("conditional_params: non-positive conditional variance");
    return {mu, sigma2};
}

namespace {

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return s;
}

}  // namespace

ConditionalDensity::ConditionalDensity(Eigen::Index target, Eigen::VectorXd conditioning_values,
                                       std::vector<double> grid, std::vector<double> raw_values,
                                       const DensityGridOptions& options)
    : target_(target), conditioning_(std::move(conditioning_values)), grid_(std::move(grid)) {
    if (grid_.size() < 4 || grid_.size() != raw_values.size()) {
        throw InvalidInput("ConditionalDensity: need at least 4 grid points with one value each");
    }
    const double step = grid_[1] - grid_[0];
    for (std::size_t i = 1; i < grid_.size(); ++i) {
        if (!(grid_[i] > grid_[i - 1]) || std::abs((grid_[i] - grid_[i - 1]) - step) > 1e-9 * std::abs(step)) {
            throw InvalidInput("ConditionalDensity: grid must be strictly increasing and equispaced");
        }
    }
    for (double& v : raw_values) {
        if (!std::isfinite(v)) throw NumericalError("ConditionalDensity: non-finite density value");
        v = std::max(v, 0.0);
    }
    raw_integral_ = trapezoid(grid_, raw_values);
    if (!(raw_integral_ > 0.0)) throw NumericalError("ConditionalDensity: density vanishes on the grid");
    values_ = std::move(raw_values);
    for (double& v : values_) v /= raw_integral_;
    spline_ = boost::math::interpolators::cardinal_cubic_b_spline<double>(values_.begin(), values_.end(), grid_.front(),
                                                                          step);
    double peak = *std::max_element(values_.begin(), values_.end());
    const std::size_t sub = std::max<std::size_t>(options.envelope_oversampling, 1);
    for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
        for (std::size_t s = 1; s < sub; ++s) {
            peak = std::max(peak, (*this)(grid_[i] + step * static_cast<double>(s) / static_cast<double>(sub)));
        }
    }
    envelope_ = options.envelope_factor * peak;
}

double ConditionalDensity::operator()(double z) const {
    if (z < grid_.front() || z > grid_.back()) return 0.0;
    return std::max(spline_(z), 0.0);
}

ConditionalDensity estimate_conditional_density(const LocalCorrelationEstimator& est, Eigen::Index target,
                                                std::span<const Eigen::Index> conditioners,
                                                const Eigen::VectorXd& values, const DensityGridOptions& options) {
    const auto p = static_cast<Eigen::Index>(est.p());
    const auto m = static_cast<Eigen::Index>(conditioners.size());
    if (m < 1) throw InvalidInput("estimate_conditional_density: at least one conditioner is required");
    if (values.size() != m) throw InvalidInput("estimate_conditional_density: one value per conditioner");
    if (target < 0 || target >= p) throw InvalidInput("estimate_conditional_density: target out of range");
    for (Eigen::Index c : conditioners) {
        if (c < 0 || c >= p || c == target) throw InvalidInput("estimate_conditional_density: bad conditioner");
    }
    if (est.data().rows() < 50) throw InvalidInput("estimate_conditional_density: requires n >= 50");
    if (options.points < 4 || !(options.hi > options.lo)) throw InvalidInput("estimate_conditional_density: bad grid");

    std::vector<double> grid(options.points);
    const double step = (options.hi - options.lo) / static_cast<double>(options.points - 1);
    for (std::size_t g = 0; g < options.points; ++g) grid[g] = options.lo + step * static_cast<double>(g);

    // Local matrix over (target, conditioners...). The conditioner block does
    // not move with the target abscissa, so it is fitted once.
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(m + 1, m + 1);
    std::size_t fallback_block = 0;
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index c = a + 1; c < m; ++c) {
            auto j = static_cast<std::size_t>(conditioners[a]);
            auto k = static_cast<std::size_t>(conditioners[c]);
            double zj = values[a];
            double zk = values[c];
            if (j > k) {
                std::swap(j, k);
                std::swap(zj, zk);
            }
            const auto [rho, flags] = est.fit_pair(j, k, zj, zk);
            r(a + 1, c + 1) = r(c + 1, a + 1) = rho;
            if (flags.fell_back_to_global || flags.degenerate) ++fallback_block;
        }
    }

    std::vector<double> dens(options.points);
    std::vector<double> warm(static_cast<std::size_t>(m), 0.0);
    std::vector<bool> have_warm(static_cast<std::size_t>(m), false);
    std::size_t fallback = 0;
    for (std::size_t g = 0; g < options.points; ++g) {
        bool fell_back = fallback_block > 0;
        for (Eigen::Index a = 0; a < m; ++a) {
            const auto t = static_cast<std::size_t>(target);
            const auto c = static_cast<std::size_t>(conditioners[a]);
            const double* w = have_warm[static_cast<std::size_t>(a)] ? &warm[static_cast<std::size_t>(a)] : nullptr;
            const auto [rho, flags] = t < c ? est.fit_pair(t, c, grid[g], values[a], w)
                                            : est.fit_pair(c, t, values[a], grid[g], w);
            r(0, a + 1) = r(a + 1, 0) = rho;
            if (flags.fell_back_to_global || flags.degenerate) {
                fell_back = true;
            } else {
                warm[static_cast<std::size_t>(a)] = rho;
                have_warm[static_cast<std::size_t>(a)] = true;
            }
        }
        Eigen::MatrixXd rr = r;
        if (m > 1 && !is_positive_definite(rr)) repair_positive_definite(rr);
        const auto [mu, s2] = conditional_params(rr, 0, values);
        const double d = grid[g] - mu;
        dens[g] = std::exp(-0.5 * d * d / s2) / std::sqrt(2.0 * std::numbers::pi * s2);
        if (fell_back) ++fallback;
    }
    ConditionalDensity out(target, values, std::move(grid), std::move(dens), options);
    out.fallback_points = fallback;
    return out;
}

ConditionalDensity estimate_conditional_density(const PseudoSample& sample, Eigen::Index target,
                                                std::span<const Eigen::Index> conditioners,
                                                const Eigen::VectorXd& values, const Bandwidth& b,
                                                const DensityGridOptions& options) {
    const LocalCorrelationEstimator est(sample.z, b);
    return estimate_conditional_density(est, target, conditioners, values, options);
}

std::vector<double> sample_accept_reject(const ConditionalDensity& density, std::size_t count, Rng& rng,
                                         double envelope_scale) {
    if (!(envelope_scale >= 1.0)) throw InvalidInput("sample_accept_reject: envelope scale must be >= 1");
    const double lo = density.grid().front();
    const double hi = density.grid().back();
    const double env = envelope_scale * density.envelope_constant();
    std::uniform_real_distribution<double> proposal(lo, hi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> out;
    out.reserve(count);
    const std::size_t max_attempts = 1000 * std::max<std::size_t>(count, 1);
    std::size_t attempts = 0;
    while (out.size() < count) {
        if (++attempts > max_attempts) throw EnvelopeFailure("sample_accept_reject: acceptance rate below 1e-3");
        const double x = proposal(rng);
        const double fx = density(x);
        if (fx > env) throw EnvelopeFailure("sample_accept_reject: density exceeds the envelope");
        if (unit(rng) * env < fx) out.push_back(x);
    }
    return out;
}

}  // namespace lgpc
