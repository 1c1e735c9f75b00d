#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "../support/helpers.hpp"
#include "lgpc/error.hpp"
#include "lgpc/locallik.hpp"
#include "lgpc/transform.hpp"

using namespace lgpc;
using lgpc::testing::gaussian_sample;

namespace {

// Direct evaluation of n^-1 sum K log psi - N(z; 0, R + B) with explicit loops.
double brute_objective(const Eigen::VectorXd& rho, const Eigen::MatrixXd& z, const Eigen::VectorXd& point,
                       const Eigen::VectorXd& b) {
    const auto d = static_cast<std::size_t>(point.size());
    const Eigen::MatrixXd r = correlation_matrix(rho, d);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        double k = 1.0;
        for (Eigen::Index j = 0; j < point.size(); ++j) {
            const double u = (z(i, j) - point[j]) / b[j];
            k *= std::exp(-0.5 * u * u) / (std::sqrt(2.0 * std::numbers::pi) * b[j]);
        }
        const Eigen::VectorXd y = z.row(i).transpose();
        sum += k * std::log(gaussian_density(y, r));
    }
    Eigen::MatrixXd rb = r;
    rb.diagonal() += b.array().square().matrix();
    const double quad = point.dot(rb.ldlt().solve(point));
    const double pen = std::exp(-0.5 * quad) /
                       std::sqrt(std::pow(2.0 * std::numbers::pi, static_cast<double>(d)) * rb.determinant());
    return sum / static_cast<double>(z.rows()) - pen;
}

}  // namespace

TEST_SUITE("locallik") {
    TEST_CASE("kernel weights") {
        const std::array<double, 2> o2{0.0, 0.0};
        const std::array<double, 2> b2{1.0, 1.0};
        CHECK(kernel_weight(o2, o2, b2) == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-14));
        const std::array<double, 2> far{40.0, -40.0};
        CHECK(kernel_weight(far, o2, b2) < 1e-300);
        const std::array<double, 3> obs{0.5, 0.0, 0.0};
        const std::array<double, 3> ev{0.0, 0.0, 0.0};
        const std::array<double, 3> b3{0.5, 0.5, 0.5};
        const double phi1 = std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi);
        const double phi0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        CHECK(kernel_weight(obs, ev, b3) == doctest::Approx(phi1 * phi0 * phi0 / 0.125).epsilon(1e-13));
        CHECK(kernel_weight(obs, ev, b3) == doctest::Approx(0.3080).epsilon(1e-3));
    }

    TEST_CASE("truncated kernel vanishes beyond five bandwidths and renormalizes inside") {
        const std::array<double, 2> ev{0.0, 0.0};
        const std::array<double, 2> b{0.5, 0.5};
        const std::array<double, 2> out{2.6, 0.0};
        const std::array<double, 2> in{1.0, 0.0};
        CHECK(kernel_weight(out, ev, b, KernelType::truncated_gaussian) == 0.0);
        const double g = kernel_weight(in, ev, b, KernelType::gaussian);
        const double t = kernel_weight(in, ev, b, KernelType::truncated_gaussian);
        CHECK(t > g);
        CHECK(t == doctest::Approx(g).epsilon(1e-5));
    }

    TEST_CASE("plug-in bandwidths") {
        CHECK(plugin_bandwidth(512, 1.75, FitMode::trivariate, 3).scalar() == doctest::Approx(0.875).epsilon(1e-14));
        CHECK(plugin_bandwidth(64, 1.75, FitMode::pairwise, 2).scalar() == doctest::Approx(0.875).epsilon(1e-14));
        const Bandwidth b = plugin_bandwidth(1000, 4.0, FitMode::trivariate, 3);
        CHECK(b.b.size() == 3);
        CHECK(b.b[0] == b.b[2]);
        CHECK(b.rule == BandwidthRule::trivariate_n19);
    }

    TEST_CASE("penalty term equals the Gaussian convolution identity") {
        LocalMoments m;
        m.dim = 2;
        m.n = 1;
        m.second = Eigen::MatrixXd::Zero(2, 2);
        m.point = Eigen::VectorXd::Zero(2);
        m.bandwidth = Eigen::VectorXd::Ones(2);
        const ObjectiveValue v = local_likelihood_objective(Eigen::VectorXd::Zero(1), m);
        CHECK(v.value == doctest::Approx(-1.0 / (4.0 * std::numbers::pi)).epsilon(1e-14));
    }

    TEST_CASE("moment-based objective equals the per-observation sum") {
        Rng rng(21);
        const Eigen::MatrixXd z = gaussian_sample(lgpc::testing::equicorrelated(3, 0.3), 300, 4);
        const std::array<Eigen::Index, 3> cols{0, 1, 2};
        const Eigen::Vector3d point(0.3, -0.5, 1.1);
        const Eigen::Vector3d b(0.6, 0.7, 0.8);
        const Eigen::Vector3d rho(0.2, -0.4, 0.5);
        const double moment = local_likelihood_objective(rho, z, cols, point, b).value;
        CHECK(moment == doctest::Approx(brute_objective(rho, z, point, b)).epsilon(1e-11));
    }

    TEST_CASE("analytic gradient matches central differences") {
        Rng rng(17);
        std::uniform_real_distribution<double> u(-0.6, 0.6);
        const Eigen::MatrixXd z = gaussian_sample(lgpc::testing::random_correlation(3, rng), 400, 5);
        int checked = 0;
        for (int rep = 0; rep < 100; ++rep) {
            const bool tri = rep % 2 == 0;
            const Eigen::Index d = tri ? 3 : 2;
            std::vector<Eigen::Index> cols(static_cast<std::size_t>(d));
            std::iota(cols.begin(), cols.end(), 0);
            Eigen::VectorXd point(d);
            for (Eigen::Index j = 0; j < d; ++j) point[j] = 2.0 * u(rng);
            const Eigen::VectorXd b = Eigen::VectorXd::Constant(d, 0.5 + std::abs(u(rng)));
            Eigen::VectorXd rho(static_cast<Eigen::Index>(pair_count(static_cast<std::size_t>(d))));
            for (Eigen::Index k = 0; k < rho.size(); ++k) rho[k] = u(rng);
            if (!is_positive_definite(correlation_matrix(rho, static_cast<std::size_t>(d)))) continue;
            const LocalMoments m = local_moments(z, cols, point, b);
            const Eigen::VectorXd g = local_likelihood_objective(rho, m).gradient;
            const auto f = [&](const Eigen::VectorXd& r) { return local_likelihood_objective(r, m).value; };
            for (Eigen::Index k = 0; k < rho.size(); ++k) {
                const double fd = lgpc::testing::central_difference(f, rho, k, 1e-6);
                CHECK(std::abs(fd - g[k]) <= 1e-5 * std::max(1.0, std::abs(g[k])));
            }
            ++checked;
        }
        CHECK(checked > 80);
    }

    TEST_CASE("non positive definite parameters are a domain error") {
        LocalMoments m;
        m.dim = 3;
        m.n = 1;
        m.mass = 1.0;
        m.second = Eigen::MatrixXd::Identity(3, 3);
        m.point = Eigen::VectorXd::Zero(3);
        m.bandwidth = Eigen::VectorXd::Ones(3);
        CHECK_THROWS_AS((void)local_likelihood_objective(Eigen::Vector3d(0.9, 0.9, -0.9), m), DomainError);
    }

    TEST_CASE("gradient at the true correlation vanishes for Gaussian data") {
        const Eigen::MatrixXd z = gaussian_sample(lgpc::testing::equicorrelated(2, 0.5), 100000, 8);
        const std::array<Eigen::Index, 2> cols{0, 1};
        const Eigen::Vector2d b(0.5, 0.5);
        const Eigen::VectorXd rho = Eigen::VectorXd::Constant(1, 0.5);
        for (const Eigen::Vector2d point : {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 0.5)}) {
            const LocalMoments big = local_moments(z, cols, point, b);
            const LocalMoments small = local_moments(z.topRows(1000), cols, point, b);
            const double gb = std::abs(local_likelihood_objective(rho, big).gradient[0]);
            const double gs = std::abs(local_likelihood_objective(rho, small).gradient[0]);
            CHECK(gb < 4e-3);
            CHECK(gb < gs + 1e-3);
        }
    }

    TEST_CASE("bivariate Gaussian data: local fit recovers the constant correlation") {
        const Eigen::MatrixXd x = gaussian_sample(lgpc::testing::equicorrelated(2, 0.5), 2000, 12);
        const PseudoSample s = to_pseudo_normal(x);
        const std::array<Eigen::Index, 2> cols{0, 1};
        const Eigen::VectorXd b = plugin_bandwidth(2000, 1.75, FitMode::pairwise, 2).select(cols);
        for (const Eigen::Vector2d p : {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), Eigen::Vector2d(-1, 0.5)}) {
            const LocalFit fit = fit_local(s.z, cols, p, b);
            CHECK(fit.converged);
            CHECK(std::abs(fit.rho[0] - 0.5) < 0.1);
        }
    }

    TEST_CASE("large bandwidth limit equals the global fit") {
        const Eigen::MatrixXd x = gaussian_sample(lgpc::testing::equicorrelated(3, 0.4), 500, 13);
        const PseudoSample s = to_pseudo_normal(x);
        const std::array<Eigen::Index, 2> pair{0, 2};
        const double glob2 = global_mle_correlation(s.z, pair)[0];
        const Eigen::VectorXd b2 = plugin_bandwidth(500, 100.0, FitMode::pairwise, 2).select(pair);
        CHECK(std::abs(fit_local(s.z, pair, Eigen::Vector2d(0.4, -0.2), b2).rho[0] - glob2) < 1e-3);

        const std::array<Eigen::Index, 3> all{0, 1, 2};
        const Eigen::VectorXd glob3 = global_mle_correlation(s.z, all);
        const Eigen::VectorXd b3 = plugin_bandwidth(500, 100.0, FitMode::trivariate, 3).select(all);
        const LocalFit fit = fit_local(s.z, all, Eigen::Vector3d(0.1, 0.5, -0.3), b3);
        CHECK((fit.rho - glob3).cwiseAbs().maxCoeff() < 1e-3);
    }

    TEST_CASE("independent trivariate data: local correlations near zero at the origin") {
        const Eigen::MatrixXd x = gaussian_sample(Eigen::MatrixXd::Identity(3, 3), 2000, 14);
        const PseudoSample s = to_pseudo_normal(x);
        const std::array<Eigen::Index, 3> all{0, 1, 2};
        const Eigen::VectorXd b = plugin_bandwidth(2000, 4.0, FitMode::trivariate, 3).select(all);
        const LocalFit fit = fit_local(s.z, all, Eigen::Vector3d::Zero(), b);
        CHECK(fit.converged);
        CHECK(fit.rho.cwiseAbs().maxCoeff() < 0.1);
    }

    TEST_CASE("fits stay in bounds and positive definite") {
        Rng rng(31);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        const Eigen::MatrixXd z = lgpc::testing::structural_sample(300, 15);
        const PseudoSample s = to_pseudo_normal(z);
        const std::array<Eigen::Index, 3> all{0, 1, 2};
        const Eigen::VectorXd b = plugin_bandwidth(300, 0.8, FitMode::trivariate, 3).select(all);
        for (int rep = 0; rep < 40; ++rep) {
            const Eigen::Vector3d p(u(rng), u(rng), u(rng));
            const LocalFit fit = fit_local(s.z, all, p, b);
            CHECK(fit.rho.cwiseAbs().maxCoeff() <= kRhoBound);
            CHECK(is_positive_definite(correlation_matrix(fit.rho, 3)));
        }
    }

    TEST_CASE("objective is invariant to permuting observations") {
        Eigen::MatrixXd z = gaussian_sample(lgpc::testing::equicorrelated(3, 0.2), 250, 16);
        const std::array<Eigen::Index, 3> all{0, 1, 2};
        const Eigen::Vector3d p(0.2, 0.1, -0.4);
        const Eigen::Vector3d b(0.7, 0.7, 0.7);
        const Eigen::Vector3d rho(0.1, 0.3, -0.2);
        const double before = local_likelihood_objective(rho, z, all, p, b).value;
        std::vector<int> perm(250);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), std::mt19937_64(2));
        Eigen::MatrixXd shuffled(250, 3);
        for (int i = 0; i < 250; ++i) shuffled.row(i) = z.row(perm[static_cast<std::size_t>(i)]);
        CHECK(local_likelihood_objective(rho, shuffled, all, p, b).value == doctest::Approx(before).epsilon(1e-12));
    }

    TEST_CASE("degenerate neighborhoods and tiny samples are reported") {
        const Eigen::MatrixXd z = gaussian_sample(Eigen::MatrixXd::Identity(2, 2), 100, 18);
        const std::array<Eigen::Index, 2> cols{0, 1};
        CHECK_THROWS_AS((void)fit_local(z, cols, Eigen::Vector2d(40.0, 40.0), Eigen::Vector2d(0.3, 0.3)),
                        DegenerateNeighborhood);
        CHECK_THROWS_AS((void)fit_local(z.topRows(5), cols, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.3, 0.3)),
                        InvalidInput);
    }

    TEST_CASE("warm starts reach the same optimum") {
        const Eigen::MatrixXd z = gaussian_sample(lgpc::testing::equicorrelated(3, 0.3), 800, 19);
        const std::array<Eigen::Index, 3> all{0, 1, 2};
        const Eigen::Vector3d p(0.5, 0.0, -0.5);
        const Eigen::Vector3d b(0.6, 0.6, 0.6);
        const LocalFit cold = fit_local(z, all, p, b);
        FitOptions opt;
        opt.init = Eigen::Vector3d(-0.5, 0.6, 0.2);
        const LocalFit warm = fit_local(z, all, p, b, opt);
        CHECK(cold.converged);
        CHECK(warm.converged);
        CHECK((cold.rho - warm.rho).cwiseAbs().maxCoeff() < 1e-4);
    }
}
