#include "lgpc/loccor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "lgpc/error.hpp"
#include "lgpc/normal.hpp"
#include "lgpc/parallel.hpp"

namespace lgpc {

namespace {
constexpr std::size_t kBlockSize = 16;
}

const char* to_string(Method m) noexcept { return m == Method::trivariate ? "trivariate" : "pairwise"; }

Method method_from_string(const std::string& s) {
    if (s == "trivariate") return Method::trivariate;
    if (s == "pairwise") return Method::pairwise;
    throw InvalidInput("unknown method '" + s + "' (expected trivariate|pairwise)");
}

bool PointCorrelation::all_converged() const noexcept {
    return std::all_of(fits.begin(), fits.end(), [](const FitFlags& f) { return f.converged; });
}

bool PointCorrelation::any_fallback() const noexcept {
    return std::any_of(fits.begin(), fits.end(), [](const FitFlags& f) { return f.fell_back_to_global || f.degenerate; });
}

LocalCorrelationEstimator::LocalCorrelationEstimator(const Eigen::MatrixXd& z, Bandwidth bandwidth, KernelType kernel)
    : z_(&z), bandwidth_(std::move(bandwidth)), kernel_(kernel) {
    const auto p = static_cast<std::size_t>(z.cols());
    if (p < 2) throw InvalidInput("local correlation: need at least 2 columns");
    if (z.rows() < 10) throw InvalidInput("local correlation: need at least 10 observations");
    if (bandwidth_.b.empty()) throw InvalidInput("local correlation: empty bandwidth");
    global_pairs_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = j + 1; k < p; ++k) {
            const std::array<Eigen::Index, 2> cols{static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)};
            const double r = global_mle_correlation(z, cols)[0];
            global_pairs_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = r;
            global_pairs_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = r;
        }
    }
    if (p == 3) {
        const std::array<Eigen::Index, 3> cols{0, 1, 2};
        global_triple_ = global_mle_correlation(z, cols);
    }
}

double LocalCorrelationEstimator::global_pair(std::size_t j, std::size_t k) const {
    return global_pairs_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
}

std::pair<double, FitFlags> LocalCorrelationEstimator::fit_pair(std::size_t j, std::size_t k, double zj, double zk,
                                                                const double* warm) const {
    const std::array<Eigen::Index, 2> cols{static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)};
    const Eigen::Vector2d point(zj, zk);
    const Eigen::VectorXd bw = bandwidth_.select(cols);
    const Eigen::VectorXd global = Eigen::VectorXd::Constant(1, global_pair(j, k));
    FitOptions opt;
    opt.kernel = kernel_;
    if (warm) opt.init = Eigen::VectorXd::Constant(1, *warm);
    FitFlags flags;
    try {
        const LocalMoments m = local_moments(*z_, cols, point, bw, kernel_);
        const LocalFit fit = fit_local(m, global, opt);
        flags.converged = fit.converged;
        flags.fell_back_to_global = fit.fell_back_to_global;
        flags.iterations = fit.iterations;
        return {fit.rho[0], flags};
    } catch (const DegenerateNeighborhood&) {
        flags.degenerate = true;
        flags.fell_back_to_global = true;
        return {std::clamp(global[0], -kRhoBound, kRhoBound), flags};
    }
}

PointCorrelation LocalCorrelationEstimator::trivariate(const Eigen::VectorXd& point, const Eigen::VectorXd* warm) const {
    if (p() != 3) throw InvalidInput("trivariate estimation requires exactly 3 variables");
    if (point.size() != 3) throw InvalidInput("trivariate estimation: evaluation point must have 3 coordinates");
    const std::array<Eigen::Index, 3> cols{0, 1, 2};
    FitOptions opt;
    opt.kernel = kernel_;
    if (warm) opt.init = *warm;
    const LocalMoments m = local_moments(*z_, cols, point, bandwidth_.select(cols), kernel_);
    const LocalFit fit = fit_local(m, global_triple_, opt);
    PointCorrelation out;
    out.r = correlation_matrix(fit.rho, 3);
    out.fits.push_back({fit.converged, fit.fell_back_to_global, false, fit.iterations});
    return out;
}

PointCorrelation LocalCorrelationEstimator::pairwise(const Eigen::VectorXd& point, const Eigen::MatrixXd* warm) const {
    const std::size_t dim = p();
    if (static_cast<std::size_t>(point.size()) != dim) throw InvalidInput("pairwise estimation: point dimension mismatch");
    PointCorrelation out;
    out.r = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    bool all_degenerate = true;
    for (std::size_t j = 0; j < dim; ++j) {
        for (std::size_t k = j + 1; k < dim; ++k) {
            const auto ej = static_cast<Eigen::Index>(j);
            const auto ek = static_cast<Eigen::Index>(k);
            const double* w = warm ? &(*warm)(ej, ek) : nullptr;
            const auto [rho, flags] = fit_pair(j, k, point[ej], point[ek], w);
            out.r(ej, ek) = out.r(ek, ej) = rho;
            out.fits.push_back(flags);
            all_degenerate = all_degenerate && flags.degenerate;
        }
    }
    if (all_degenerate) throw DegenerateNeighborhood("pairwise estimation: every pair has a degenerate neighborhood");
    out.pd_repaired = repair_positive_definite(out.r);
    return out;
}

PointCorrelation LocalCorrelationEstimator::estimate(const Eigen::VectorXd& point, Method method,
                                                     const Eigen::MatrixXd* warm) const {
    if (method == Method::pairwise) return pairwise(point, warm);
    Eigen::VectorXd init;
    if (warm) init = upper_triangle(*warm);
    try {
        return trivariate(point, warm ? &init : nullptr);
    } catch (const DegenerateNeighborhood&) {
        PointCorrelation out;
        out.r = correlation_matrix(global_triple_.cwiseMax(-kRhoBound).cwiseMin(kRhoBound), 3);
        out.fits.push_back({false, true, true, 0});
        return out;
    }
}

PointCorrelation estimate_R_trivariate(const PseudoSample& sample, const Eigen::VectorXd& z_eval, const Bandwidth& b) {
    const LocalCorrelationEstimator est(sample.z, b);
    return est.trivariate(z_eval);
}

PointCorrelation estimate_R_pairwise(const PseudoSample& sample, const Eigen::VectorXd& z_eval, const Bandwidth& b) {
    if (sample.p() < 3) throw InvalidInput("pairwise estimation requires at least 3 variables");
    const LocalCorrelationEstimator est(sample.z, b);
    return est.pairwise(z_eval);
}

bool repair_positive_definite(Eigen::MatrixXd& r, double floor) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
    if (eig.info() != Eigen::Success) throw NumericalError("eigen decomposition failed during PD repair");
    if (eig.eigenvalues().minCoeff() >= floor) return false;
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(floor);
    Eigen::MatrixXd fixed = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    const Eigen::VectorXd s = fixed.diagonal().cwiseSqrt().cwiseInverse();
    fixed = s.asDiagonal() * fixed * s.asDiagonal();
    fixed = 0.5 * (fixed + fixed.transpose()).eval();
    fixed.diagonal().setOnes();
    r = fixed.cwiseMax(-kRhoBound).cwiseMin(kRhoBound);
    r.diagonal().setOnes();
    return true;
}

std::vector<Eigen::VectorXd> quantile_grid(std::size_t p, const std::vector<double>& levels) {
    if (p == 0 || levels.empty()) throw InvalidInput("quantile_grid: empty");
    std::vector<double> q;
    q.reserve(levels.size());
    for (double l : levels) q.push_back(norm_quantile(l));
    std::size_t total = 1;
    for (std::size_t d = 0; d < p; ++d) total *= q.size();
    std::vector<Eigen::VectorXd> grid;
    grid.reserve(total);
    std::vector<std::size_t> idx(p, 0);
    for (std::size_t t = 0; t < total; ++t) {
        Eigen::VectorXd pt(static_cast<Eigen::Index>(p));
        for (std::size_t d = 0; d < p; ++d) pt[static_cast<Eigen::Index>(d)] = q[idx[d]];
        grid.push_back(std::move(pt));
        // last coordinate varies fastest (row-major)
        for (std::size_t d = p; d-- > 0;) {
            if (++idx[d] < q.size()) break;
            idx[d] = 0;
        }
    }
    return grid;
}

std::vector<Eigen::VectorXd> default_grid(std::size_t p) {
    return quantile_grid(p, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
}

LocalCorrelationField estimate_field(const PseudoSample& sample, const std::vector<Eigen::VectorXd>& grid,
                                     Method method, const Bandwidth& b, KernelType kernel) {
    if (grid.empty()) throw InvalidInput("estimate_field: empty grid");
    if (method == Method::trivariate && sample.p() != 3) {
        throw InvalidInput("estimate_field: trivariate method requires exactly 3 variables");
    }
    for (const auto& pt : grid) {
        if (static_cast<std::size_t>(pt.size()) != sample.p()) throw InvalidInput("estimate_field: point dimension mismatch");
    }
    const LocalCorrelationEstimator est(sample.z, b, kernel);

    LocalCorrelationField field;
    field.points = grid;
    field.method = method;
    field.bandwidth = b;
    field.fit_flags.resize(grid.size());
    field.rho_matrices.resize(grid.size());
    for (std::size_t j = 0; j < sample.p(); ++j) {
        for (std::size_t k = j + 1; k < sample.p(); ++k) field.pair_index.emplace_back(int(j), int(k));
    }

    const std::size_t blocks = (grid.size() + kBlockSize - 1) / kBlockSize;
    parallel_for(blocks, [&](std::size_t blk) {
        const std::size_t begin = blk * kBlockSize;
        const std::size_t end = std::min(grid.size(), begin + kBlockSize);
        for (std::size_t i = begin; i < end; ++i) {
            const Eigen::MatrixXd* warm = nullptr;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t prev = begin; prev < i; ++prev) {
                if (!field.fit_flags[prev].all_converged()) continue;
                const double d = (grid[prev] - grid[i]).squaredNorm();
                if (d < best) {
                    best = d;
                    warm = &field.rho_matrices[prev];
                }
            }
            field.fit_flags[i] = est.estimate(grid[i], method, warm);
            field.rho_matrices[i] = field.fit_flags[i].r;
        }
    });
    return field;
}

void write_field_csv(std::ostream& os, const LocalCorrelationField& field, const PseudoSample& sample) {
    const std::size_t p = sample.p();
    os << std::setprecision(15);
    for (std::size_t j = 0; j < p; ++j) os << "z_" << sample.column_names[j] << ',';
    for (std::size_t j = 0; j < p; ++j) os << "x_" << sample.column_names[j] << ',';
    for (const auto& [j, k] : field.pair_index) {
        os << "rho_" << sample.column_names[std::size_t(j)] << '_' << sample.column_names[std::size_t(k)] << ',';
    }
    os << "converged,fallback,pd_repaired,x_clamped\n";
    for (std::size_t i = 0; i < field.points.size(); ++i) {
        const auto x = z_to_x_point(sample.margins, field.points[i]);
        for (std::size_t j = 0; j < p; ++j) os << field.points[i][Eigen::Index(j)] << ',';
        for (std::size_t j = 0; j < p; ++j) os << x.value[Eigen::Index(j)] << ',';
        for (const auto& [j, k] : field.pair_index) os << field.rho_matrices[i](j, k) << ',';
        const auto& f = field.fit_flags[i];
        os << int(f.all_converged()) << ',' << int(f.any_fallback()) << ',' << int(f.pd_repaired) << ','
           << int(x.any_clamped()) << '\n';
    }
}

}  // namespace lgpc
