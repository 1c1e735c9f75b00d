#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace lgpc {

enum class BandwidthRule { trivariate_n19, pairwise_n16, explicit_values };
enum class FitMode { trivariate, pairwise };
enum class KernelType { gaussian, truncated_gaussian };

/// Per-dimension kernel bandwidths. Rule-derived bandwidths are identical in
/// every dimension: c*n^(-1/9) for full trivariate fits, c*n^(-1/6) for
/// bivariate (pairwise) fits.
struct Bandwidth {
    std::vector<double> b;
    double c = 0.0;
    BandwidthRule rule = BandwidthRule::explicit_values;

    /// Bandwidths of the given coordinates, in order.
    [[nodiscard]] Eigen::VectorXd select(std::span<const Eigen::Index> dims) const;
    [[nodiscard]] double scalar() const { return b.front(); }
};

[[nodiscard]] Bandwidth plugin_bandwidth(std::size_t n, double c, FitMode mode, std::size_t dims);
[[nodiscard]] Bandwidth explicit_bandwidth(std::vector<double> b);

/// Product kernel K_b(z_obs - z_eval) = prod_i phi((z_obs_i - z_eval_i)/b_i)/b_i.
/// The truncated variant cuts every coordinate at 5 bandwidths and renormalizes.
[[nodiscard]] double kernel_weight(std::span<const double> z_obs, std::span<const double> z_eval,
                                   std::span<const double> b, KernelType kernel = KernelType::gaussian);

/// Number of free correlations in a d x d correlation matrix.
[[nodiscard]] constexpr std::size_t pair_count(std::size_t d) noexcept { return d * (d - 1) / 2; }

/// Builds the correlation matrix from correlations ordered (0,1),(0,2),..,(0,d-1),(1,2),...
[[nodiscard]] Eigen::MatrixXd correlation_matrix(const Eigen::VectorXd& rho, std::size_t d);
/// Inverse of correlation_matrix(): upper-triangle entries in pair order.
[[nodiscard]] Eigen::VectorXd upper_triangle(const Eigen::MatrixXd& r);

/// Kernel-weighted moments of the data around one evaluation point. The local
/// log-likelihood only touches the data through these, so one pass over the
/// sample suffices for an entire optimization.
struct LocalMoments {
    std::size_t dim = 0;
    std::size_t n = 0;
    double total_weight = 0.0;  // sum_i K_b(Z_i - z)
    double mass = 0.0;          // total_weight / n
    Eigen::MatrixXd second;     // n^-1 sum_i K_b(Z_i - z) Z_i Z_i^T
    Eigen::VectorXd point;
    Eigen::VectorXd bandwidth;
    KernelType kernel = KernelType::gaussian;
    double kernel_scale = 1.0;  // renormalization of the truncated kernel
};

/// `columns` picks the coordinates of `z` (n x p) that enter the fit and
/// `point` gives the evaluation point in those coordinates.
[[nodiscard]] LocalMoments local_moments(const Eigen::MatrixXd& z, std::span<const Eigen::Index> columns,
                                         const Eigen::VectorXd& point, const Eigen::VectorXd& bandwidth,
                                         KernelType kernel = KernelType::gaussian);

struct ObjectiveValue {
    double value = 0.0;
    Eigen::VectorXd gradient;
};

/// n^-1 sum_i K_b(Z_i - z) log psi(Z_i, R) - N(z; 0, R + diag(b^2)) and its
/// gradient with respect to the correlations. Throws DomainError when rho is
/// not a positive-definite correlation matrix.
[[nodiscard]] ObjectiveValue local_likelihood_objective(const Eigen::VectorXd& rho, const LocalMoments& m);

/// Same objective computed from raw inputs.
[[nodiscard]] ObjectiveValue local_likelihood_objective(const Eigen::VectorXd& rho, const Eigen::MatrixXd& z,
                                                        std::span<const Eigen::Index> columns,
                                                        const Eigen::VectorXd& point,
                                                        const Eigen::VectorXd& bandwidth);

/// Hessian of the objective in rho (central differences of the analytic gradient).
[[nodiscard]] Eigen::MatrixXd local_likelihood_hessian(const Eigen::VectorXd& rho, const LocalMoments& m);

/// Local score u(y, R) = d log psi(y, R) / d rho in pair order.
[[nodiscard]] Eigen::VectorXd log_density_score(const Eigen::VectorXd& y, const Eigen::MatrixXd& r);

/// Zero-mean, unit-variance Gaussian density psi(y, R).
[[nodiscard]] double gaussian_density(const Eigen::VectorXd& y, const Eigen::MatrixXd& r);

/// Correlations maximizing the global Gaussian likelihood with means fixed at 0
/// and variances at 1 (the model the local fits collapse to as b grows).
[[nodiscard]] Eigen::VectorXd global_mle_correlation(const Eigen::MatrixXd& z, std::span<const Eigen::Index> columns);

struct LocalFit {
    Eigen::VectorXd rho;
    Eigen::VectorXd point;
    bool converged = false;
    int iterations = 0;
    double objective_value = 0.0;
    bool fell_back_to_global = false;
};

struct FitOptions {
    std::optional<Eigen::VectorXd> init;    // warm start
    std::optional<Eigen::VectorXd> global;  // precomputed global MLE; computed on demand otherwise
    KernelType kernel = KernelType::gaussian;
    int max_iterations = 200;
    double gradient_tolerance = 1e-6;
    double step_tolerance = 1e-9;
};

inline constexpr double kRhoBound = 0.999;
inline constexpr double kInitBound = 0.95;
inline constexpr double kMinKernelMass = 1e-8;

/// Maximizes the local likelihood at `point`. Throws DegenerateNeighborhood when
/// the kernel mass is below kMinKernelMass; falls back to the global MLE (with
/// the flag set) when the optimizer does not converge.
[[nodiscard]] LocalFit fit_local(const Eigen::MatrixXd& z, std::span<const Eigen::Index> columns,
                                 const Eigen::VectorXd& point, const Eigen::VectorXd& bandwidth,
                                 const FitOptions& options = {});

/// Optimizer on precomputed moments.
[[nodiscard]] LocalFit fit_local(const LocalMoments& moments, const Eigen::VectorXd& global,
                                 const FitOptions& options = {});

[[nodiscard]] bool is_positive_definite(const Eigen::MatrixXd& r);

}  // namespace lgpc
