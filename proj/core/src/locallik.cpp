#include "lgpc/locallik.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lgpc/error.hpp"
#include "lgpc/normal.hpp"

namespace lgpc {

namespace {

constexpr double kTruncation = 5.0;
constexpr double kLog2Pi = 1.8378770664093453;

double truncated_kernel_scale(std::size_t dims) {
    const double inside = 1.0 - 2.0 * norm_cdf(-kTruncation);
    return std::pow(inside, -static_cast<double>(dims));
}

template <int D>
struct Pairs;
template <>
struct Pairs<2> {
    static constexpr int count = 1;
    static constexpr int i[1] = {0};
    static constexpr int j[1] = {1};
};
template <>
struct Pairs<3> {
    static constexpr int count = 3;
    static constexpr int i[3] = {0, 0, 1};
    static constexpr int j[3] = {1, 2, 2};
};

// Objective on fixed-size matrices. `penalty` switches the integral term off
// for the global (unlocalized) likelihood.
template <int D>
struct Problem {
    static constexpr int K = Pairs<D>::count;
    using Mat = Eigen::Matrix<double, D, D>;
    using Vec = Eigen::Matrix<double, D, 1>;
    using Par = Eigen::Matrix<double, K, 1>;

    double mass = 0.0;
    Mat second = Mat::Zero();
    Vec point = Vec::Zero();
    Vec b2 = Vec::Ones();
    bool penalty = true;
    double kernel_scale = 1.0;

    static Mat matrix(const Par& rho) {
        Mat r = Mat::Identity();
        for (int k = 0; k < K; ++k) {
            r(Pairs<D>::i[k], Pairs<D>::j[k]) = rho[k];
            r(Pairs<D>::j[k], Pairs<D>::i[k]) = rho[k];
        }
        return r;
    }

    // Returns false when R (or R + B) is not positive definite.
    bool eval(const Par& rho, double& f, Par& g) const {
        const Mat r = matrix(rho);
        Eigen::LLT<Mat> llt(r);
        if (llt.info() != Eigen::Success) return false;
        const Mat l = llt.matrixL();
        double logdet = 0.0;
        for (int d = 0; d < D; ++d) {
            if (!(l(d, d) > 0.0)) return false;
            logdet += 2.0 * std::log(l(d, d));
        }
        const Mat p = llt.solve(Mat::Identity());
        const Mat psp = p * second * p;
        f = mass * (-0.5 * D * kLog2Pi - 0.5 * logdet) - 0.5 * (p.cwiseProduct(second)).sum();
        for (int k = 0; k < K; ++k) {
            const int a = Pairs<D>::i[k];
            const int b = Pairs<D>::j[k];
            g[k] = -mass * p(a, b) + psp(a, b);
        }
        if (penalty) {
            Mat c = r;
            c.diagonal() += b2;
            Eigen::LLT<Mat> cllt(c);
            if (cllt.info() != Eigen::Success) return false;
            const Mat cl = cllt.matrixL();
            double clogdet = 0.0;
            for (int d = 0; d < D; ++d) clogdet += 2.0 * std::log(cl(d, d));
            const Mat q = cllt.solve(Mat::Identity());
            const Vec v = q * point;
            const double dens =
                kernel_scale * std::exp(-0.5 * point.dot(v) - 0.5 * D * kLog2Pi - 0.5 * clogdet);
            f -= dens;
            for (int k = 0; k < K; ++k) {
                const int a = Pairs<D>::i[k];
                const int b = Pairs<D>::j[k];
                g[k] -= dens * (-q(a, b) + v[a] * v[b]);
            }
        }
        return std::isfinite(f);
    }
};

template <int D>
Problem<D> make_problem(const LocalMoments& m) {
    Problem<D> pr;
    pr.mass = m.mass;
    pr.second = m.second;
    pr.point = m.point;
    pr.b2 = m.bandwidth.array().square().matrix();
    pr.kernel_scale = m.kernel_scale;
    return pr;
}

template <int D>
typename Problem<D>::Par to_par(const Eigen::VectorXd& v) {
    if (v.size() != Problem<D>::K) throw InvalidInput("correlation vector has the wrong length");
    return v;
}

// Moves a start vector inside the box and the positive-definite cone.
template <int D>
typename Problem<D>::Par admissible_start(typename Problem<D>::Par rho) {
    using P = Problem<D>;
    for (int k = 0; k < P::K; ++k) {
        if (!std::isfinite(rho[k])) rho[k] = 0.0;
        rho[k] = std::clamp(rho[k], -kInitBound, kInitBound);
    }
    for (int shrink = 0; shrink < 60; ++shrink) {
        Eigen::LLT<typename P::Mat> llt(P::matrix(rho));
        if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 1e-6) break;
        rho *= 0.9;
    }
    return rho;
}

struct OptimResult {
    Eigen::VectorXd rho;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Projected BFGS on theta = atanh(rho), |theta| <= atanh(kRhoBound).
// Maximizes f / scale.
template <int D>
OptimResult maximize(const Problem<D>& pr, typename Problem<D>::Par start, double scale, const FitOptions& opt) {
    using P = Problem<D>;
    using Par = typename P::Par;
    constexpr int K = P::K;
    using Hess = Eigen::Matrix<double, K, K>;
    const double bound = std::atanh(kRhoBound);

    auto evaluate = [&](const Par& theta, double& fmin, Par& gmin, Par& grho) {
        const Par rho = theta.array().tanh().matrix();
        double f = 0.0;
        Par g;
        if (!pr.eval(rho, f, g)) return false;
        grho = g / scale;
        fmin = -f / scale;
        gmin = -(grho.array() * (1.0 - rho.array().square())).matrix();
        return true;
    };

    Par theta = admissible_start<D>(start).array().atanh().matrix();
    double fval = 0.0;
    Par grad, grho;
    if (!evaluate(theta, fval, grad, grho)) {
        theta.setZero();
        if (!evaluate(theta, fval, grad, grho)) throw NumericalError("local likelihood not finite at rho = 0");
    }

    Hess h = Hess::Identity();
    OptimResult out;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        Eigen::Array<bool, K, 1> fixed;
        for (int k = 0; k < K; ++k) {
            fixed[k] = (theta[k] <= -bound + 1e-12 && grad[k] > 0.0) || (theta[k] >= bound - 1e-12 && grad[k] < 0.0);
        }
        double gnorm = 0.0;
        for (int k = 0; k < K; ++k) {
            if (!fixed[k]) gnorm = std::max(gnorm, std::abs(grho[k]));
        }
        if (gnorm < opt.gradient_tolerance) {
            out.converged = true;
            break;
        }
        Par gfree = grad;
        for (int k = 0; k < K; ++k) {
            if (fixed[k]) gfree[k] = 0.0;
        }
        Par dir = -(h * gfree);
        for (int k = 0; k < K; ++k) {
            if (fixed[k]) dir[k] = 0.0;
        }
        if (dir.dot(gfree) >= 0.0) {
            h.setIdentity();
            dir = -gfree;
        }
        const double longest = dir.cwiseAbs().maxCoeff();
        if (longest > 2.0) dir *= 2.0 / longest;

        double t = 1.0;
        bool accepted = false;
        Par theta_new, grad_new, grho_new;
        double f_new = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            theta_new = (theta + t * dir).cwiseMax(-bound).cwiseMin(bound);
            if (evaluate(theta_new, f_new, grad_new, grho_new) &&
                f_new <= fval + 1e-4 * grad.dot(theta_new - theta)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // The line search shrank the step below any meaningful size.
            out.converged = true;
            break;
        }
        const Par s = theta_new - theta;
        const Par y = grad_new - grad;
        theta = theta_new;
        fval = f_new;
        grad = grad_new;
        grho = grho_new;
        if (s.cwiseAbs().maxCoeff() < opt.step_tolerance) {
            out.converged = true;
            ++it;
            break;
        }
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            const double inv = 1.0 / sy;
            const Hess left = Hess::Identity() - inv * s * y.transpose();
            h = left * h * left.transpose() + inv * s * s.transpose();
        }
    }
    out.iterations = it;
    out.rho = theta.array().tanh().matrix().cwiseMax(-kRhoBound).cwiseMin(kRhoBound);
    out.value = -fval * scale;
    return out;
}

template <int D>
LocalMoments moments_impl(const Eigen::MatrixXd& z, std::span<const Eigen::Index> columns,
                          const Eigen::VectorXd& point, const Eigen::VectorXd& bandwidth, KernelType kernel) {
    const Eigen::Index n = z.rows();
    const double* col[D];
    double e[D], inv_b[D];
    double norm = 1.0;
    for (int d = 0; d < D; ++d) {
        col[d] = z.col(columns[static_cast<std::size_t>(d)]).data();
        e[d] = point[d];
        inv_b[d] = 1.0 / bandwidth[d];
        norm *= kInvSqrt2Pi * inv_b[d];
    }
    const bool truncated = kernel == KernelType::truncated_gaussian;
    const double cut = kTruncation * kTruncation;

    double w_sum = 0.0;
    double s[D][D] = {};
    for (Eigen::Index i = 0; i < n; ++i) {
        double q = 0.0;
        bool outside = false;
        for (int d = 0; d < D; ++d) {
            const double u = (col[d][i] - e[d]) * inv_b[d];
            if (truncated && u * u > cut) outside = true;
            q += u * u;
        }
        if (outside) continue;
        const double w = std::exp(-0.5 * q);
        w_sum += w;
        for (int a = 0; a < D; ++a) {
            const double wa = w * col[a][i];
            for (int b = a; b < D; ++b) s[a][b] += wa * col[b][i];
        }
    }

    LocalMoments m;
    m.dim = D;
    m.n = static_cast<std::size_t>(n);
    m.kernel = kernel;
    m.kernel_scale = truncated ? truncated_kernel_scale(D) : 1.0;
    const double scale = norm * m.kernel_scale;
    m.total_weight = w_sum * scale;
    m.mass = m.total_weight / static_cast<double>(n);
    m.second.resize(D, D);
    for (int a = 0; a < D; ++a) {
        for (int b = a; b < D; ++b) {
            m.second(a, b) = m.second(b, a) = s[a][b] * scale / static_cast<double>(n);
        }
    }
    m.point = point;
    m.bandwidth = bandwidth;
    return m;
}

template <int D>
LocalFit fit_impl(const LocalMoments& m, const Eigen::VectorXd& global, const FitOptions& options) {
    LocalFit fit;
    fit.point = m.point;
    if (!(m.total_weight >= kMinKernelMass)) {
        throw DegenerateNeighborhood("kernel mass below threshold at evaluation point");
    }
    const Problem<D> pr = make_problem<D>(m);
    const auto start = to_par<D>(options.init ? *options.init : global);
    const OptimResult res = maximize<D>(pr, start, m.mass, options);
    fit.iterations = res.iterations;
    if (res.converged) {
        fit.rho = res.rho;
        fit.converged = true;
        fit.objective_value = res.value;
    } else {
        fit.rho = global.cwiseMax(-kRhoBound).cwiseMin(kRhoBound);
        fit.fell_back_to_global = true;
        double f = 0.0;
        typename Problem<D>::Par g;
        fit.objective_value = pr.eval(to_par<D>(fit.rho), f, g) ? f : res.value;
    }
    return fit;
}

template <int D>
Eigen::VectorXd global_impl(const Eigen::MatrixXd& z, std::span<const Eigen::Index> columns) {
    using P = Problem<D>;
    P pr;
    pr.penalty = false;
    pr.mass = 1.0;
    const double inv_n = 1.0 / static_cast<double>(z.rows());
    for (int a = 0; a < D; ++a) {
        for (int b = a; b < D; ++b) {
            const double v = z.col(columns[static_cast<std::size_t>(a)])
                                 .dot(z.col(columns[static_cast<std::size_t>(b)])) * inv_n;
            pr.second(a, b) = pr.second(b, a) = v;
        }
    }
    typename P::Par start;
    for (int k = 0; k < P::K; ++k) {
        const int a = Pairs<D>::i[k];
        const int b = Pairs<D>::j[k];
        start[k] = pr.second(a, b) / std::sqrt(pr.second(a, a) * pr.second(b, b));
    }
    FitOptions opt;
    opt.gradient_tolerance = 1e-10;
    opt.step_tolerance = 1e-12;
    opt.max_iterations = 500;
    return maximize<D>(pr, start, 1.0, opt).rho;
}

void check_dim(std::size_t d) {
    if (d != 2 && d != 3) throw InvalidInput("local fits support 2 or 3 dimensions");
}

}  // namespace

Eigen::VectorXd Bandwidth::select(std::span<const Eigen::Index> dims) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(dims.size()));
    for (std::size_t k = 0; k < dims.size(); ++k) {
        const auto d = static_cast<std::size_t>(dims[k]);
        out[static_cast<Eigen::Index>(k)] = d < b.size() ? b[d] : b.back();
    }
    return out;
}

Bandwidth plugin_bandwidth(std::size_t n, double c, FitMode mode, std::size_t dims) {
    if (n < 2) throw InvalidInput("plugin_bandwidth: n must be at least 2");
    if (!(c > 0.0) || !std::isfinite(c)) throw InvalidInput("plugin_bandwidth: c must be positive");
    if (dims == 0) throw InvalidInput("plugin_bandwidth: dims must be positive");
    const double exponent = mode == FitMode::trivariate ? -1.0 / 9.0 : -1.0 / 6.0;
    Bandwidth bw;
    bw.c = c;
    bw.rule = mode == FitMode::trivariate ? BandwidthRule::trivariate_n19 : BandwidthRule::pairwise_n16;
    bw.b.assign(dims, c * std::pow(static_cast<double>(n), exponent));
    return bw;
}

Bandwidth explicit_bandwidth(std::vector<double> b) {
    if (b.empty()) throw InvalidInput("bandwidth: empty");
    for (double v : b) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("bandwidth: entries must be positive");
    }
    Bandwidth bw;
    bw.b = std::move(b);
    bw.rule = BandwidthRule::explicit_values;
    return bw;
}

double kernel_weight(std::span<const double> z_obs, std::span<const double> z_eval, std::span<const double> b,
                     KernelType kernel) {
    if (z_obs.size() != z_eval.size() || z_obs.size() != b.size()) {
        throw InvalidInput("kernel_weight: dimension mismatch");
    }
    double w = 1.0;
    for (std::size_t i = 0; i < z_obs.size(); ++i) {
        if (!(b[i] > 0.0)) throw InvalidInput("kernel_weight: bandwidth must be positive");
        const double u = (z_obs[i] - z_eval[i]) / b[i];
        if (kernel == KernelType::truncated_gaussian && std::abs(u) > kTruncation) return 0.0;
        w *= norm_pdf(u) / b[i];
    }
    if (kernel == KernelType::truncated_gaussian) w *= truncated_kernel_scale(z_obs.size());
    return w;
}

Eigen::MatrixXd correlation_matrix(const Eigen::VectorXd& rho, std::size_t d) {
    if (static_cast<std::size_t>(rho.size()) != pair_count(d)) {
        throw InvalidInput("correlation_matrix: expected " + std::to_string(pair_count(d)) + " correlations");
    }
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < r.cols(); ++j, ++k) r(i, j) = r(j, i) = rho[k];
    }
    return r;
}

Eigen::VectorXd upper_triangle(const Eigen::MatrixXd& r) {
    const auto d = static_cast<std::size_t>(r.rows());
    Eigen::VectorXd rho(static_cast<Eigen::Index>(pair_count(d)));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < r.cols(); ++j, ++k) rho[k] = r(i, j);
    }
    return rho;
}

bool is_positive_definite(const Eigen::MatrixXd& r) {
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    return llt.info() == Eigen::Success;
}

LocalMoments local_moments(const Eigen::MatrixXd& z, std::span<const Eigen::Index> columns,
                           const Eigen::VectorXd& point, const Eigen::VectorXd& bandwidth, KernelType kernel) {
    check_dim(columns.size());
    if (static_cast<std::size_t>(point.size()) != columns.size() ||
        static_cast<std::size_t>(bandwidth.size()) != columns.size()) {
        throw InvalidInput("local_moments: point/bandwidth dimension mismatch");
    }
    for (Eigen::Index k = 0; k < bandwidth.size(); ++k) {
        if (!(bandwidth[k] > 0.0)) throw InvalidInput("local_moments: bandwidth must be positive");
    }
    for (auto c : columns) {
        if (c < 0 || c >= z.cols()) throw InvalidInput("local_moments: column index out of range");
    }
    return columns.size() == 2 ? moments_impl<2>(z, columns, point, bandwidth, kernel)
                               : moments_impl<3>(z, columns, point, bandwidth, kernel);
}

ObjectiveValue local_likelihood_objective(const Eigen::VectorXd& rho, const LocalMoments& m) {
    check_dim(m.dim);
    ObjectiveValue out;
    bool ok = false;
    if (m.dim == 2) {
        const auto pr = make_problem<2>(m);
        Problem<2>::Par g;
        ok = pr.eval(to_par<2>(rho), out.value, g);
        out.gradient = g;
    } else {
        const auto pr = make_problem<3>(m);
        Problem<3>::Par g;
        ok = pr.eval(to_par<3>(rho), out.value, g);
        out.gradient = g;
    }
    if (!ok) throw DomainError("local likelihood: correlations do not form a positive-definite matrix");
    return out;
}

ObjectiveValue local_likelihood_objective(const Eigen::VectorXd& rho, const Eigen::MatrixXd& z,
                                          std::span<const Eigen::Index> columns, const Eigen::VectorXd& point,
                                          const Eigen::VectorXd& bandwidth) {
    return local_likelihood_objective(rho, local_moments(z, columns, point, bandwidth));
}

Eigen::MatrixXd local_likelihood_hessian(const Eigen::VectorXd& rho, const LocalMoments& m) {
    const Eigen::Index k = rho.size();
    Eigen::MatrixXd h(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double step = 1e-5 * std::max(1.0, std::abs(rho[j]));
        Eigen::VectorXd up = rho, down = rho;
        up[j] += step;
        down[j] -= step;
        h.col(j) = (local_likelihood_objective(up, m).gradient - local_likelihood_objective(down, m).gradient) /
                   (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

Eigen::VectorXd log_density_score(const Eigen::VectorXd& y, const Eigen::MatrixXd& r) {
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    if (llt.info() != Eigen::Success) throw DomainError("score: correlation matrix not positive definite");
    const Eigen::MatrixXd p = llt.solve(Eigen::MatrixXd::Identity(r.rows(), r.cols()));
    const Eigen::VectorXd py = p * y;
    Eigen::VectorXd u(static_cast<Eigen::Index>(pair_count(static_cast<std::size_t>(r.rows()))));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < r.cols(); ++j, ++k) u[k] = -p(i, j) + py[i] * py[j];
    }
    return u;
}

double gaussian_density(const Eigen::VectorXd& y, const Eigen::MatrixXd& r) {
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    if (llt.info() != Eigen::Success) throw DomainError("density: correlation matrix not positive definite");
    const Eigen::MatrixXd l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    const double quad = y.dot(llt.solve(y));
    return std::exp(-0.5 * quad - 0.5 * static_cast<double>(y.size()) * kLog2Pi - 0.5 * logdet);
}

Eigen::VectorXd global_mle_correlation(const Eigen::MatrixXd& z, std::span<const Eigen::Index> columns) {
    check_dim(columns.size());
    if (z.rows() < 2) throw InvalidInput("global_mle_correlation: need at least 2 rows");
    return columns.size() == 2 ? global_impl<2>(z, columns) : global_impl<3>(z, columns);
}

LocalFit fit_local(const LocalMoments& moments, const Eigen::VectorXd& global, const FitOptions& options) {
    check_dim(moments.dim);
    return moments.dim == 2 ? fit_impl<2>(moments, global, options) : fit_impl<3>(moments, global, options);
}

LocalFit fit_local(const Eigen::MatrixXd& z, std::span<const Eigen::Index> columns, const Eigen::VectorXd& point,
                   const Eigen::VectorXd& bandwidth, const FitOptions& options) {
    if (z.rows() < 10) throw InvalidInput("fit_local: need at least 10 observations");
    const LocalMoments m = local_moments(z, columns, point, bandwidth, options.kernel);
    const Eigen::VectorXd global = options.global ? *options.global : global_mle_correlation(z, columns);
    return fit_local(m, global, options);
}

}  // namespace lgpc
