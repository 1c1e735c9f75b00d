#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <utility>
#include <vector>

#include "lgpc/locallik.hpp"
#include "lgpc/transform.hpp"

namespace lgpc {

enum class Method { trivariate, pairwise };

[[nodiscard]] const char* to_string(Method m) noexcept;
[[nodiscard]] Method method_from_string(const std::string& s);

/// Diagnostics of one local fit (one pair, or the single trivariate fit).
struct FitFlags {
    bool converged = false;
    bool fell_back_to_global = false;
    bool degenerate = false;
    int iterations = 0;
};

/// Local correlation matrix at one evaluation point.
struct PointCorrelation {
    Eigen::MatrixXd r;
    std::vector<FitFlags> fits;  // one per pair (pairwise) or a single entry (trivariate)
    bool pd_repaired = false;

    [[nodiscard]] bool all_converged() const noexcept;
    [[nodiscard]] bool any_fallback() const noexcept;
};

/// Reusable estimator bound to one pseudo-sample. Caches the global MLE
/// correlations used for initialization and fallback.
class LocalCorrelationEstimator {
public:
    LocalCorrelationEstimator(const Eigen::MatrixXd& z, Bandwidth bandwidth, KernelType kernel = KernelType::gaussian);

    [[nodiscard]] const Eigen::MatrixXd& data() const noexcept { return *z_; }
    [[nodiscard]] std::size_t p() const noexcept { return static_cast<std::size_t>(z_->cols()); }
    [[nodiscard]] const Bandwidth& bandwidth() const noexcept { return bandwidth_; }
    [[nodiscard]] KernelType kernel() const noexcept { return kernel_; }

    /// Global MLE correlation of the pair (j,k), j < k.
    [[nodiscard]] double global_pair(std::size_t j, std::size_t k) const;

    /// Single 1-parameter fit of pair (j,k) at (zj, zk).
    [[nodiscard]] std::pair<double, FitFlags> fit_pair(std::size_t j, std::size_t k, double zj, double zk,
                                                       const double* warm = nullptr) const;

    /// Full 3-parameter fit; requires p == 3. Degenerate neighborhoods
    /// propagate as DegenerateNeighborhood.
    [[nodiscard]] PointCorrelation trivariate(const Eigen::VectorXd& point, const Eigen::VectorXd* warm = nullptr) const;

    /// p(p-1)/2 bivariate fits assembled into a matrix; repaired to positive
    /// definiteness when needed.
    [[nodiscard]] PointCorrelation pairwise(const Eigen::VectorXd& point, const Eigen::MatrixXd* warm = nullptr) const;

    /// Dispatch on method. Trivariate degenerate neighborhoods fall back to
    /// the global fit with the `degenerate` flag set.
    [[nodiscard]] PointCorrelation estimate(const Eigen::VectorXd& point, Method method,
                                            const Eigen::MatrixXd* warm = nullptr) const;

private:
    const Eigen::MatrixXd* z_;
    Bandwidth bandwidth_;
    KernelType kernel_;
    Eigen::MatrixXd global_pairs_;
    Eigen::VectorXd global_triple_;
};

[[nodiscard]] PointCorrelation estimate_R_trivariate(const PseudoSample& sample, const Eigen::VectorXd& z_eval,
                                                     const Bandwidth& b);
[[nodiscard]] PointCorrelation estimate_R_pairwise(const PseudoSample& sample, const Eigen::VectorXd& z_eval,
                                                   const Bandwidth& b);

/// Eigenvalue clipping at `floor` followed by rescaling to unit diagonal.
/// Returns true when the input needed repair.
bool repair_positive_definite(Eigen::MatrixXd& r, double floor = 1e-4);

struct LocalCorrelationField {
    std::vector<Eigen::VectorXd> points;
    Method method = Method::trivariate;
    std::vector<Eigen::MatrixXd> rho_matrices;
    std::vector<PointCorrelation> fit_flags;
    Bandwidth bandwidth;
    std::vector<std::pair<int, int>> pair_index;  // matrix entry (j,k) of each correlation column
};

/// Tensor grid of standard-normal quantiles at the given levels in p dimensions.
[[nodiscard]] std::vector<Eigen::VectorXd> quantile_grid(std::size_t p, const std::vector<double>& levels);
/// Levels 0.1, 0.2, ..., 0.9.
[[nodiscard]] std::vector<Eigen::VectorXd> default_grid(std::size_t p);

/// Estimates R at every grid point. Points are swept in fixed blocks, each
/// block row-major with warm starts from the nearest converged point of the
/// same block, so the result does not depend on the thread count.
[[nodiscard]] LocalCorrelationField estimate_field(const PseudoSample& sample, const std::vector<Eigen::VectorXd>& grid,
                                                   Method method, const Bandwidth& b,
                                                   KernelType kernel = KernelType::gaussian);

/// Delimited export: z-coordinates, x-coordinates, correlations, flags.
void write_field_csv(std::ostream& os, const LocalCorrelationField& field, const PseudoSample& sample);

}  // namespace lgpc
