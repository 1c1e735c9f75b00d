#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lgpc/conddens.hpp"
#include "lgpc/loccor.hpp"

namespace lgpc {

enum class HFunction { square, absolute, identity };

[[nodiscard]] const char* to_string(HFunction h) noexcept;
[[nodiscard]] HFunction h_from_string(const std::string& s);
[[nodiscard]] double apply_h(HFunction h, double alpha) noexcept;

/// Observations enter the statistic when Phi(z_ij) lies in [lo, hi] for every j.
struct Region {
    bool all_points = true;
    double lo = 0.0;
    double hi = 1.0;

    [[nodiscard]] static Region quantile_box(double lo, double hi);
    [[nodiscard]] bool contains(const Eigen::VectorXd& z) const;
    [[nodiscard]] std::string describe() const;
};

struct TestConfig {
    HFunction h = HFunction::square;
    Region region;
    std::size_t B = 500;
    double c = 1.0;
    std::optional<Method> method;  // trivariate for p == 3, pairwise otherwise
    std::uint64_t seed = 1;
    KernelType kernel = KernelType::gaussian;
    DensityGridOptions density;
    /// Bandwidth of the conditional-density fits; c*n^(-1/6) when absent.
    std::optional<double> density_bandwidth;
    /// Re-rank resampled targets to normal scores before computing t*.
    bool rerank_replicates = true;

    void validate() const;
};

struct TestDiagnostics {
    std::size_t fallback_points = 0;      // observed statistic: points with a fallback fit
    std::size_t nonconverged_points = 0;  // observed statistic: points with a non-converged fit
    std::size_t pd_repaired_points = 0;
    std::size_t density_fallback_points = 0;
    std::size_t density_normalization_flags = 0;
    std::size_t retried_replicates = 0;
    std::size_t failed_replicates = 0;
};

struct TestResult {
    double t_observed = 0.0;
    std::vector<double> t_replicates;  // failed replicates are omitted
    double p_value = 1.0;
    TestConfig config;
    Method method = Method::trivariate;
    std::size_t n = 0;
    std::size_t p = 0;
    std::size_t n_points_used = 0;
    double bandwidth_statistic = 0.0;
    double bandwidth_density = 0.0;
    TestDiagnostics diagnostics;
    std::string label;  // free-form, e.g. Granger direction
};

/// Method actually used for a p-dimensional sample under `config`.
[[nodiscard]] Method resolve_method(const TestConfig& config, std::size_t p);

/// Statistic bandwidth: c*n^(-1/9) for the trivariate method, c*n^(-1/6) for pairwise.
[[nodiscard]] Bandwidth statistic_bandwidth(std::size_t n, std::size_t p, double c, Method method);

/// t = n^-1 sum over observations in the region of h(alpha_hat(Z_i)).
/// Columns 0 and 1 are the targets, the rest are conditioners.
[[nodiscard]] double test_statistic(const Eigen::MatrixXd& z, const TestConfig& config, const Bandwidth& b,
                                    Method method, TestDiagnostics* diagnostics = nullptr,
                                    std::size_t* points_used = nullptr);

/// Statistic with alpha supplied by the caller; exposed for testing.
[[nodiscard]] double statistic_from_alpha(const Eigen::MatrixXd& z, std::span<const double> alpha, HFunction h,
                                          const Region& region, std::size_t* points_used = nullptr);

/// Per-row conditional densities of both targets given the row's conditioners.
struct NullModel {
    std::vector<ConditionalDensity> first;
    std::vector<ConditionalDensity> second;
    double bandwidth = 0.0;
};

[[nodiscard]] NullModel fit_null_model(const Eigen::MatrixXd& z, const TestConfig& config);

/// One resampled data set under the null: targets drawn from the row-wise
/// conditional densities, conditioners kept, then re-ranked to normal scores.
[[nodiscard]] Eigen::MatrixXd null_replicate(const Eigen::MatrixXd& z, const NullModel& model, Rng& rng,
                                             double envelope_scale = 1.0, bool rerank = true);

/// B replicate statistics. A replicate hitting an envelope failure is retried
/// once with a doubled envelope; more than 5% failures aborts.
[[nodiscard]] std::vector<double> bootstrap_null(const Eigen::MatrixXd& z, const TestConfig& config,
                                                 const Bandwidth& b, Method method,
                                                 TestDiagnostics* diagnostics = nullptr);

/// (1 + #{t* >= t}) / (B + 1).
[[nodiscard]] double bootstrap_p_value(double t_observed, std::span<const double> replicates);

/// Full test of column 0 independent of column 1 given the remaining columns.
[[nodiscard]] TestResult ci_test(const Eigen::MatrixXd& x, const TestConfig& config);

/// H0: effect_t independent of cause_{t-1} given effect_{t-1}.
[[nodiscard]] TestResult granger_test(std::span<const double> cause, std::span<const double> effect,
                                      const TestConfig& config);

/// JSON document of a result (resolved configuration included).
[[nodiscard]] std::string to_json(const TestResult& result, int indent = 2);

}  // namespace lgpc
