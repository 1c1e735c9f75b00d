#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lgpc/loccor.hpp"

namespace lgpc {

/// Which two variables are correlated; every other variable is conditioned on.
struct Partition {
    int first = 0;
    int second = 1;
};

/// Schur complement R11 - R12 R22^-1 R21 for the two target variables.
[[nodiscard]] Eigen::Matrix2d partial_cov(const Eigen::MatrixXd& r, Partition part = {});

/// Partial correlation Sigma12 / sqrt(Sigma11 Sigma22) of the partial covariance.
[[nodiscard]] double lgpc_from_R(const Eigen::MatrixXd& r, Partition part = {});

/// d alpha / d rho_k for every correlation in pair order (0,1),(0,2),...
[[nodiscard]] Eigen::VectorXd lgpc_gradient(const Eigen::VectorXd& rho, std::size_t p, Partition part = {});

/// 1/(4 pi): integral of the squared bivariate standard Gaussian product kernel.
inline constexpr double kSquaredKernelIntegral2 = 0.07957747154594767;

/// Delta-method standard error for a pairwise fit. Each pair contributes
/// Omega_l = f_l(z_l) int K^2 / (u_l^2 psi_l^2) with f_l plugged in as psi_l,
/// so var = sum_l g_l^2 Omega_l / (n b_j b_k). Returns nullopt where a local
/// score vanishes.
[[nodiscard]] std::optional<double> variance_pairwise(const Eigen::VectorXd& point, const Eigen::MatrixXd& r,
                                                      const Eigen::VectorXd& gradient, const Bandwidth& b,
                                                      std::size_t n);

/// Sandwich standard error for the full trivariate fit: J from the Hessian of
/// the local likelihood, M from kernel-weighted empirical moments of the local
/// score. Returns nullopt when J is singular or not positive definite.
[[nodiscard]] std::optional<double> variance_trivariate(const Eigen::MatrixXd& z, const Eigen::VectorXd& point,
                                                        const Eigen::Vector3d& rho, const Eigen::Vector3d& gradient,
                                                        const Bandwidth& b, KernelType kernel = KernelType::gaussian);

/// alpha -/+ Phi^-1(1 - (1-level)/2) * std_err, clipped to [-1, 1].
[[nodiscard]] std::pair<double, double> confidence_band(double alpha, double std_err, double level = 0.95);

struct PartialCorrelationEstimate {
    double alpha = 0.0;
    Eigen::VectorXd point;    // z-scale
    Eigen::VectorXd x_point;  // x-scale
    std::optional<double> std_err;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    Eigen::VectorXd gradient;
    Method method = Method::trivariate;
    bool converged = false;
    bool fallback = false;
    bool pd_repaired = false;
};

/// Local fit, alpha, gradient and (optionally) standard error at one z-point.
[[nodiscard]] PartialCorrelationEstimate estimate_lgpc(const LocalCorrelationEstimator& est, const Eigen::VectorXd& point,
                                                       Method method, bool with_variance, double level = 0.95);

/// Evaluation points for a map of alpha over the two target coordinates with
/// the conditioners held fixed. z-coordinates; the first two vary, target 2 fastest.
[[nodiscard]] std::vector<Eigen::VectorXd> map_grid(const std::vector<double>& z1_levels,
                                                    const std::vector<double>& z2_levels,
                                                    const Eigen::VectorXd& z_conditioners);

/// Equispaced probability levels in [lo, hi] mapped through Phi^-1.
[[nodiscard]] std::vector<double> quantile_levels(std::size_t count, double lo = 0.02, double hi = 0.98);

/// alpha, gradient and band at every point. Columns 0 and 1 of the sample are
/// the targets. Points are independent, so the result is thread-count invariant.
[[nodiscard]] std::vector<PartialCorrelationEstimate> estimate_lgpc_map(const PseudoSample& sample,
                                                                       const std::vector<Eigen::VectorXd>& points,
                                                                       Method method, const Bandwidth& b,
                                                                       bool with_variance = true,
                                                                       double level = 0.95);

/// Delimited export: x- and z-coordinates, alpha, std_err, ci bounds, flags.
void write_lgpc_map_csv(std::ostream& os, const std::vector<PartialCorrelationEstimate>& map,
                        const std::vector<std::string>& column_names, const std::vector<std::string>& comments = {});

}  // namespace lgpc
