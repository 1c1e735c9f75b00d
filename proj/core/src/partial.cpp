#include "lgpc/partial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <vector>

#include "lgpc/error.hpp"
#include "lgpc/normal.hpp"
#include "lgpc/parallel.hpp"

namespace lgpc {

namespace {

// Targets first, conditioners after, in ascending original order.
std::vector<Eigen::Index> ordering(Eigen::Index p, Partition part) {
    if (part.first == part.second || part.first < 0 || part.second < 0 || part.first >= p || part.second >= p) {
        throw InvalidInput("partition: target indices must be distinct and inside the matrix");
    }
    std::vector<Eigen::Index> order{part.first, part.second};
    for (Eigen::Index j = 0; j < p; ++j) {
        if (j != part.first && j != part.second) order.push_back(j);
    }
    return order;
}

struct Blocks {
    Eigen::Matrix2d r11;
    Eigen::MatrixXd r12;  // 2 x m
    Eigen::MatrixXd r22;  // m x m
};

Blocks split(const Eigen::MatrixXd& r, Partition part) {
    if (r.rows() != r.cols() || r.rows() < 2) throw InvalidInput("partial correlation: R must be square, p >= 2");
    const auto order = ordering(r.rows(), part);
    const Eigen::Index m = r.rows() - 2;
    Blocks b;
    b.r12.resize(2, m);
    b.r22.resize(m, m);
    for (Eigen::Index a = 0; a < 2; ++a) {
        for (Eigen::Index c = 0; c < 2; ++c) b.r11(a, c) = r(order[a], order[c]);
        for (Eigen::Index c = 0; c < m; ++c) b.r12(a, c) = r(order[a], order[c + 2]);
    }
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index c = 0; c < m; ++c) b.r22(a, c) = r(order[a + 2], order[c + 2]);
    }
    return b;
}

// C = R22^-1 R21 (m x 2).
Eigen::MatrixXd conditioning_coefficients(const Blocks& b) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(b.r22);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().cwiseAbs().minCoeff() < 1e-12 * std::max(1.0, ldlt.vectorD().cwiseAbs().maxCoeff())) {
        throw SingularConditioning("partial correlation: conditioning block is singular");
    }
    return ldlt.solve(b.r12.transpose());
}

double alpha_of(const Eigen::Matrix2d& s) {
    const double denom = std::sqrt(s(0, 0) * s(1, 1));
    if (!(denom > 0.0)) throw SingularConditioning("partial correlation: non-positive partial variance");
    return std::clamp(s(0, 1) / denom, -1.0, 1.0);
}

}  // namespace

Eigen::Matrix2d partial_cov(const Eigen::MatrixXd& r, Partition part) {
    const Blocks b = split(r, part);
    if (b.r22.size() == 0) return b.r11;
    const Eigen::MatrixXd c = conditioning_coefficients(b);
    Eigen::Matrix2d s = b.r11 - b.r12 * c;
    s(1, 0) = s(0, 1) = 0.5 * (s(0, 1) + s(1, 0));
    return s;
}

double lgpc_from_R(const Eigen::MatrixXd& r, Partition part) { return alpha_of(partial_cov(r, part)); }

Eigen::VectorXd lgpc_gradient(const Eigen::VectorXd& rho, std::size_t p, Partition part) {
    const Eigen::MatrixXd r = correlation_matrix(rho, p);
    const Blocks b = split(r, part);
    const Eigen::Index m = static_cast<Eigen::Index>(p) - 2;
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, 2);
    Eigen::Matrix2d s = b.r11;
    if (m > 0) {
        c = conditioning_coefficients(b);
        s = b.r11 - b.r12 * c;
    }
    const double s11 = s(0, 0);
    const double s22 = s(1, 1);
    const double s12 = 0.5 * (s(0, 1) + s(1, 0));
    const double root = std::sqrt(s11 * s22);
    if (!(root > 0.0)) throw SingularConditioning("lgpc_gradient: non-positive partial variance");
    const double alpha = s12 / root;

    // Position of each original variable inside the (targets, conditioners) ordering.
    const auto order = ordering(static_cast<Eigen::Index>(p), part);
    std::vector<Eigen::Index> slot(p);
    for (std::size_t t = 0; t < order.size(); ++t) slot[static_cast<std::size_t>(order[t])] = static_cast<Eigen::Index>(t);

    Eigen::VectorXd grad(rho.size());
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = i + 1; j < p; ++j, ++k) {
            Eigen::Index a = slot[i];
            Eigen::Index e = slot[j];
            if (a > e) std::swap(a, e);
            Eigen::Matrix2d ds = Eigen::Matrix2d::Zero();
            if (a < 2 && e < 2) {
                // correlation between the two targets
                ds(0, 1) = ds(1, 0) = 1.0;
            } else if (a < 2) {
                // target a against conditioner e: d(-R12 C) = -(E C + C^T E^T)
                const Eigen::Index q = e - 2;
                for (Eigen::Index u = 0; u < 2; ++u) {
                    for (Eigen::Index v = 0; v < 2; ++v) {
                        ds(u, v) = -((u == a ? c(q, v) : 0.0) + (v == a ? c(q, u) : 0.0));
                    }
                }
            } else {
                // two conditioners: d(-R12 R22^-1 R21) = C^T E C
                const Eigen::Index qa = a - 2;
                const Eigen::Index qe = e - 2;
                for (Eigen::Index u = 0; u < 2; ++u) {
                    for (Eigen::Index v = 0; v < 2; ++v) ds(u, v) = c(qa, u) * c(qe, v) + c(qe, u) * c(qa, v);
                }
            }
            grad[k] = ds(0, 1) / root - 0.5 * alpha * (ds(0, 0) / s11 + ds(1, 1) / s22);
        }
    }
    return grad;
}

std::optional<double> variance_pairwise(const Eigen::VectorXd& point, const Eigen::MatrixXd& r,
                                        const Eigen::VectorXd& gradient, const Bandwidth& b, std::size_t n) {
    const Eigen::Index p = r.rows();
    if (point.size() != p) throw InvalidInput("variance_pairwise: point dimension mismatch");
    if (gradient.size() != static_cast<Eigen::Index>(pair_count(static_cast<std::size_t>(p)))) {
        throw InvalidInput("variance_pairwise: gradient length mismatch");
    }
    if (n == 0) throw InvalidInput("variance_pairwise: n must be positive");
    double var = 0.0;
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index l = j + 1; l < p; ++l, ++k) {
            Eigen::Matrix2d r2;
            r2 << 1.0, r(j, l), r(j, l), 1.0;
            const Eigen::VectorXd zl = Eigen::Vector2d(point[j], point[l]);
            const double psi = gaussian_density(zl, r2);
            const double u = log_density_score(zl, r2)[0];
            if (std::abs(u) < 1e-8 || !(psi > 0.0)) return std::nullopt;
            const std::array<Eigen::Index, 2> dims{j, l};
            const Eigen::VectorXd bw = b.select(dims);
            const double omega = psi * kSquaredKernelIntegral2 / (u * u * psi * psi);
            var += gradient[k] * gradient[k] * omega / (static_cast<double>(n) * bw[0] * bw[1]);
        }
    }
    return std::sqrt(var);
}

std::optional<double> variance_trivariate(const Eigen::MatrixXd& z, const Eigen::VectorXd& point,
                                          const Eigen::Vector3d& rho, const Eigen::Vector3d& gradient,
                                          const Bandwidth& b, KernelType kernel) {
    if (z.cols() != 3 || point.size() != 3) throw InvalidInput("variance_trivariate: requires 3 variables");
    const std::array<Eigen::Index, 3> cols{0, 1, 2};
    const Eigen::VectorXd bw = b.select(cols);
    const LocalMoments m = local_moments(z, cols, point, bw, kernel);
    const Eigen::VectorXd rv = rho;
    const Eigen::Matrix3d j = -local_likelihood_hessian(rv, m);
    Eigen::LLT<Eigen::Matrix3d> jllt(j);
    if (jllt.info() != Eigen::Success) return std::nullopt;

    // Score at each observation; P = R^-1 shared.
    const Eigen::Matrix3d r = correlation_matrix(rv, 3);
    const Eigen::Matrix3d prec = r.inverse();
    const auto n = static_cast<double>(z.rows());
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
    const std::array<double, 3> bs{bw[0], bw[1], bw[2]};
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const Eigen::Vector3d y = z.row(i).transpose();
        const std::array<double, 3> yo{y[0], y[1], y[2]};
        const std::array<double, 3> pe{point[0], point[1], point[2]};
        const double w = kernel_weight(yo, pe, bs, kernel);
        if (w == 0.0) continue;
        const Eigen::Vector3d py = prec * y;
        const Eigen::Vector3d u(-prec(0, 1) + py[0] * py[1], -prec(0, 2) + py[0] * py[2], -prec(1, 2) + py[1] * py[2]);
        mean += w * u;
        outer += (w * w) * u * u.transpose();
    }
    mean /= n;
    outer /= n;
    const Eigen::Matrix3d v = outer - mean * mean.transpose();
    const Eigen::Matrix3d jinv = jllt.solve(Eigen::Matrix3d::Identity());
    const Eigen::Matrix3d cov = jinv * v * jinv.transpose() / n;
    const double var = gradient.dot(cov * gradient);
    if (!(var >= 0.0) || !std::isfinite(var)) return std::nullopt;
    return std::sqrt(var);
}

std::pair<double, double> confidence_band(double alpha, double std_err, double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidInput("confidence_band: level must lie in (0,1)");
    if (!(std_err >= 0.0)) throw InvalidInput("confidence_band: negative standard error");
    const double q = norm_quantile(1.0 - (1.0 - level) / 2.0);
    return {std::clamp(alpha - q * std_err, -1.0, 1.0), std::clamp(alpha + q * std_err, -1.0, 1.0)};
}

PartialCorrelationEstimate estimate_lgpc(const LocalCorrelationEstimator& est, const Eigen::VectorXd& point,
                                         Method method, bool with_variance, double level) {
    PartialCorrelationEstimate out;
    out.point = point;
    out.method = method;
    const PointCorrelation pc = est.estimate(point, method);
    out.converged = pc.all_converged();
    out.fallback = pc.any_fallback();
    out.pd_repaired = pc.pd_repaired;
    out.alpha = lgpc_from_R(pc.r);
    const Eigen::VectorXd rho = upper_triangle(pc.r);
    out.gradient = lgpc_gradient(rho, est.p());
    if (!with_variance) return out;
    if (method == Method::pairwise) {
        out.std_err = variance_pairwise(point, pc.r, out.gradient, est.bandwidth(), static_cast<std::size_t>(est.data().rows()));
    } else if (out.converged) {
        out.std_err = variance_trivariate(est.data(), point, Eigen::Vector3d(rho), Eigen::Vector3d(out.gradient),
                                          est.bandwidth(), est.kernel());
    }
    if (out.std_err) {
        const auto [lo, hi] = confidence_band(out.alpha, *out.std_err, level);
        out.ci_low = lo;
        out.ci_high = hi;
    }
    return out;
}

std::vector<Eigen::VectorXd> map_grid(const std::vector<double>& z1_levels, const std::vector<double>& z2_levels,
                                      const Eigen::VectorXd& z_conditioners) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(z1_levels.size() * z2_levels.size());
    for (double a : z1_levels) {
        for (double b : z2_levels) {
            Eigen::VectorXd pt(2 + z_conditioners.size());
            pt << a, b, z_conditioners;
            out.push_back(std::move(pt));
        }
    }
    return out;
}

std::vector<double> quantile_levels(std::size_t count, double lo, double hi) {
    if (count < 1) throw InvalidInput("quantile_levels: count must be positive");
    if (!(lo > 0.0 && lo <= hi && hi < 1.0)) throw InvalidInput("quantile_levels: need 0 < lo <= hi < 1");
    std::vector<double> z(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double u = count == 1 ? 0.5 * (lo + hi)
                                    : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        z[i] = norm_quantile(u);
    }
    return z;
}

std::vector<PartialCorrelationEstimate> estimate_lgpc_map(const PseudoSample& sample,
                                                          const std::vector<Eigen::VectorXd>& points, Method method,
                                                          const Bandwidth& b, bool with_variance, double level) {
    if (sample.p() < 3) throw InvalidInput("lgpc map: need at least 3 columns");
    if (method == Method::trivariate && sample.p() != 3) throw InvalidInput("lgpc map: trivariate requires 3 columns");
    const LocalCorrelationEstimator est(sample.z, b);
    std::vector<PartialCorrelationEstimate> out(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        out[i] = estimate_lgpc(est, points[i], method, with_variance, level);
        out[i].x_point = z_to_x_point(sample.margins, points[i]).value;
    });
    return out;
}

void write_lgpc_map_csv(std::ostream& os, const std::vector<PartialCorrelationEstimate>& map,
                        const std::vector<std::string>& column_names, const std::vector<std::string>& comments) {
    for (const auto& c : comments) os << "# " << c << '\n';
    for (const auto& n : column_names) os << "x_" << n << ',';
    for (const auto& n : column_names) os << "z_" << n << ',';
    os << "alpha,std_err,ci_low,ci_high,converged,fallback,pd_repaired\n";
    os << std::setprecision(12);
    const auto opt = [&](const std::optional<double>& v) {
        if (v) {
            os << *v;
        } else {
            os << "NA";
        }
        os << ',';
    };
    for (const auto& e : map) {
        for (Eigen::Index j = 0; j < e.x_point.size(); ++j) os << e.x_point[j] << ',';
        for (Eigen::Index j = 0; j < e.point.size(); ++j) os << e.point[j] << ',';
        os << e.alpha << ',';
        opt(e.std_err);
        opt(e.ci_low);
        opt(e.ci_high);
        os << e.converged << ',' << e.fallback << ',' << e.pd_repaired << '\n';
    }
}

}  // namespace lgpc
