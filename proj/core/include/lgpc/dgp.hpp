#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lgpc/citest.hpp"

namespace lgpc {

/// base: (X1, X2, X3 = X1_{t-1}); primed: two lags of X1 as conditioners;
/// double_primed: three lags.
enum class DgpFamily { base, primed, double_primed };

struct DgpId {
    DgpFamily family = DgpFamily::base;
    int id = 1;

    [[nodiscard]] std::string name() const;  // "5", "5'", "5''"
    [[nodiscard]] bool null_holds() const noexcept { return id <= 4; }
    [[nodiscard]] std::size_t dimension() const noexcept;
    friend bool operator==(const DgpId&, const DgpId&) = default;
};

/// Accepts "5", "5'", "5''", "5p", "5pp" (also the prime characters U+2032/U+2033).
[[nodiscard]] DgpId parse_dgp(const std::string& text);
/// Comma-separated list of parse_dgp() tokens.
[[nodiscard]] std::vector<DgpId> parse_dgp_list(const std::string& text);

struct DgpSpec {
    DgpId dgp;
    std::size_t n = 100;
    std::uint64_t seed = 1;
    std::size_t burn_in = 200;
    /// Weight of X2_{t-1}^2 in the second volatility recursion of DGP 10.
    double dgp10_h2_coefficient = 0.05;

    void validate() const;
};

/// n x (2 + conditioners) sample; columns X1, X2, X3, ...
[[nodiscard]] Eigen::MatrixXd generate(const DgpSpec& spec);
[[nodiscard]] std::vector<std::string> dgp_column_names(const DgpId& dgp);

struct BenchmarkRow {
    DgpId dgp;
    std::size_t n = 0;
    double c = 0.0;
    std::size_t reps = 0;
    std::size_t B = 0;
    std::size_t rejections = 0;
    std::size_t failures = 0;
    double rejection_rate = 0.0;  // rejections / successful replications
    double elapsed_seconds = 0.0;
    std::vector<double> p_values;  // NaN for failed replications
    std::vector<std::string> failure_messages;
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;
    TestConfig config;
    std::uint64_t seed = 1;
    double level = 0.05;
    std::size_t burn_in = 200;
};

struct BenchmarkOptions {
    std::vector<DgpId> dgps;
    std::size_t n = 100;
    std::size_t reps = 100;
    TestConfig test;  // B, c, h, region, method; the seed is taken from `seed`
    std::uint64_t seed = 1;
    double level = 0.05;
    std::size_t burn_in = 200;
    double dgp10_h2_coefficient = 0.05;
};

/// Replication r of DGP d draws its data from derive_seed(seed, ...) counters,
/// so results are identical for any thread count.
[[nodiscard]] BenchmarkReport benchmark(const BenchmarkOptions& options);

/// Delimited table: one row per DGP with the rejection rate and counts.
void write_benchmark_table(std::ostream& os, const BenchmarkReport& report);
/// JSON sidecar with the configuration and per-replication p-values.
[[nodiscard]] std::string benchmark_json(const BenchmarkReport& report, int indent = 2);

}  // namespace lgpc
