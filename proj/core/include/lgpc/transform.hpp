#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lgpc {

/// Sorted copy of one sample column. Supports the empirical cdf (rank/(n+1))
/// and its piecewise-linear inverse between adjacent order statistics.
class MarginTable {
public:
    MarginTable() = default;
    explicit MarginTable(std::span<const double> column);

    [[nodiscard]] std::size_t size() const noexcept { return sorted_.size(); }
    [[nodiscard]] const std::vector<double>& sorted_values() const noexcept { return sorted_; }

    /// #{x_i <= q} / (n+1).
    [[nodiscard]] double cdf(double q) const;

    /// Continuous version of cdf(): linear between order statistics, so that
    /// quantile(cdf_interpolated(x)) == x on the sample range. Outside the
    /// range the probability is clamped to [1/(n+1), n/(n+1)] and *clamped is set.
    [[nodiscard]] double cdf_interpolated(double q, bool* clamped = nullptr) const;

    /// Inverse of cdf_interpolated(). Probabilities outside [1/(n+1), n/(n+1)]
    /// map to the extreme order statistics and set *clamped.
    [[nodiscard]] double quantile(double prob, bool* clamped = nullptr) const;

private:
    std::vector<double> sorted_;
};

/// Marginally standard-normal pseudo-observations z_ij = Phi^-1(rank_ij/(n+1))
/// plus the margins needed to move points between the x- and z-scale.
struct PseudoSample {
    Eigen::MatrixXd z;  // n x p
    std::vector<MarginTable> margins;
    std::vector<std::string> column_names;

    [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(z.rows()); }
    [[nodiscard]] std::size_t p() const noexcept { return static_cast<std::size_t>(z.cols()); }
};

/// Empirical cdf of `column` at `query` under the rank/(n+1) convention.
[[nodiscard]] double empirical_cdf(std::span<const double> column, double query);

/// Column-wise normal scores. Ties share the largest rank of their group.
[[nodiscard]] PseudoSample to_pseudo_normal(const Eigen::MatrixXd& x,
                                            std::vector<std::string> column_names = {});

/// Result of a point conversion; `clamped[j]` is set when coordinate j fell
/// outside the invertible range of its margin.
struct PointConversion {
    Eigen::VectorXd value;
    std::vector<bool> clamped;

    [[nodiscard]] bool any_clamped() const noexcept;
};

[[nodiscard]] PointConversion x_to_z_point(const std::vector<MarginTable>& margins,
                                           const Eigen::VectorXd& x_point);
[[nodiscard]] PointConversion z_to_x_point(const std::vector<MarginTable>& margins,
                                           const Eigen::VectorXd& z_point);

}  // namespace lgpc
