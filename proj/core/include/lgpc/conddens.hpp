#pragma once

#include <Eigen/Dense>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lgpc/loccor.hpp"
#include "lgpc/rng.hpp"
#include "lgpc/transform.hpp"

namespace lgpc {

/// Mean and variance of coordinate `target` of a N(0, R) vector given the
/// remaining coordinates equal `conditioning_values` (in ascending index order).
[[nodiscard]] std::pair<double, double> conditional_params(const Eigen::MatrixXd& r, Eigen::Index target,
                                                           const Eigen::VectorXd& conditioning_values);

struct DensityGridOptions {
    std::size_t points = 101;
    double lo = -4.5;
    double hi = 4.5;
    double envelope_factor = 1.05;
    std::size_t envelope_oversampling = 16;  // spline samples per grid interval when bounding the maximum
};

/// Tabulated univariate conditional density with a cubic interpolant.
class ConditionalDensity {
public:
    ConditionalDensity(Eigen::Index target, Eigen::VectorXd conditioning_values, std::vector<double> grid,
                       std::vector<double> raw_values, const DensityGridOptions& options = {});

    [[nodiscard]] Eigen::Index target_index() const noexcept { return target_; }
    [[nodiscard]] const Eigen::VectorXd& conditioning_values() const noexcept { return conditioning_; }
    [[nodiscard]] const std::vector<double>& grid() const noexcept { return grid_; }
    /// Normalized densities at the grid abscissae.
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
    [[nodiscard]] double envelope_constant() const noexcept { return envelope_; }
    /// Trapezoid integral of the densities before normalization.
    [[nodiscard]] double raw_integral() const noexcept { return raw_integral_; }
    /// Set when raw_integral() falls outside [0.9, 1.1].
    [[nodiscard]] bool normalization_flag() const noexcept { return raw_integral_ < 0.9 || raw_integral_ > 1.1; }

    /// Interpolated density clipped at 0; zero outside the grid range.
    [[nodiscard]] double operator()(double z) const;

    /// Grid points where the local fit fell back to the global one.
    std::size_t fallback_points = 0;

private:
    Eigen::Index target_;
    Eigen::VectorXd conditioning_;
    std::vector<double> grid_;
    std::vector<double> values_;
    double raw_integral_ = 0.0;
    double envelope_ = 0.0;
    boost::math::interpolators::cardinal_cubic_b_spline<double> spline_;
};

/// f(z_target | z_conditioners = values) on the configured grid. Every grid
/// abscissa gets its own locally Gaussian conditional: one bivariate fit for a
/// single conditioner, pairwise fits otherwise. The estimator's bandwidth is
/// used as is (bivariate rule expected).
[[nodiscard]] ConditionalDensity estimate_conditional_density(const LocalCorrelationEstimator& est, Eigen::Index target,
                                                              std::span<const Eigen::Index> conditioners,
                                                              const Eigen::VectorXd& values,
                                                              const DensityGridOptions& options = {});

/// Convenience overload building the estimator from a pseudo-sample.
[[nodiscard]] ConditionalDensity estimate_conditional_density(const PseudoSample& sample, Eigen::Index target,
                                                              std::span<const Eigen::Index> conditioners,
                                                              const Eigen::VectorXd& values, const Bandwidth& b,
                                                              const DensityGridOptions& options = {});

/// Accept-reject draws with a uniform proposal on the grid range and envelope
/// envelope_scale * envelope_constant(). Throws EnvelopeFailure when a proposal
/// exceeds the envelope or the acceptance rate drops below 1e-3.
[[nodiscard]] std::vector<double> sample_accept_reject(const ConditionalDensity& density, std::size_t count, Rng& rng,
                                                       double envelope_scale = 1.0);

}  // namespace lgpc
