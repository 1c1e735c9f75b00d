#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "lgpc/error.hpp"
#include "lgpc/normal.hpp"
#include "lgpc/transform.hpp"

using namespace lgpc;

TEST_SUITE("transform") {
    TEST_CASE("empirical cdf uses rank over n+1 with weak inequality") {
        const std::vector<double> col{3, 1, 4, 2};
        CHECK(empirical_cdf(col, 2.0) == doctest::Approx(0.4).epsilon(1e-15));
        const std::vector<double> ties{5, 5, 5};
        CHECK(empirical_cdf(ties, 5.0) == doctest::Approx(0.75).epsilon(1e-15));
    }

    TEST_CASE("empirical cdf of uniforms matches a direct count") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> col(1000);
        for (double& v : col) v = u(rng);
        const auto count = std::count_if(col.begin(), col.end(), [](double v) { return v <= 0.5; });
        const double f = empirical_cdf(col, 0.5);
        CHECK(f == doctest::Approx(static_cast<double>(count) / 1001.0));
        CHECK(std::abs(f - 0.5) < 0.05);
    }

    TEST_CASE("empirical cdf is non-decreasing and rejects bad input") {
        const std::vector<double> col{0.3, -1.0, 2.5, 0.3, 7.0};
        double prev = 0.0;
        for (double q = -3.0; q <= 8.0; q += 0.01) {
            const double f = empirical_cdf(col, q);
            CHECK(f >= prev);
            prev = f;
        }
        CHECK_THROWS_AS((void)empirical_cdf(col, std::nan("")), InvalidInput);
        CHECK_THROWS_AS((void)empirical_cdf(std::vector<double>{}, 0.0), InvalidInput);
    }

    TEST_CASE("three-point column maps to quartile scores") {
        Eigen::MatrixXd x(3, 1);
        x << 10, 20, 30;
        const PseudoSample s = to_pseudo_normal(x);
        CHECK(s.z(0, 0) == doctest::Approx(-0.6744897501960817).epsilon(1e-12));
        CHECK(s.z(1, 0) == 0.0);
        CHECK(s.z(2, 0) == doctest::Approx(0.6744897501960817).epsilon(1e-12));
    }

    TEST_CASE("strictly increasing maps leave the scores bitwise unchanged") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::MatrixXd x(200, 2);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            x(i, 0) = g(rng);
            x(i, 1) = g(rng);
        }
        Eigen::MatrixXd y = x;
        y.col(0) = x.col(0).array().exp();
        y.col(1) = x.col(1).array().cube();
        const PseudoSample a = to_pseudo_normal(x);
        const PseudoSample b = to_pseudo_normal(y);
        CHECK((a.z.array() == b.z.array()).all());
    }

    TEST_CASE("large normal sample: scores track the original values") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::MatrixXd x(5000, 1);
        for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = g(rng);
        const PseudoSample s = to_pseudo_normal(x);
        const double lo = norm_quantile(0.05);
        const double hi = norm_quantile(0.95);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (x(i, 0) > lo && x(i, 0) < hi) worst = std::max(worst, std::abs(s.z(i, 0) - x(i, 0)));
        }
        CHECK(worst < 0.05);
    }

    TEST_CASE("scores stay in the attainable range and ties share the largest rank") {
        Eigen::MatrixXd x(6, 1);
        x << 1, 2, 2, 2, 3, 4;
        const PseudoSample s = to_pseudo_normal(x);
        CHECK(s.z(1, 0) == s.z(2, 0));
        CHECK(s.z(2, 0) == s.z(3, 0));
        CHECK(s.z(1, 0) == doctest::Approx(norm_quantile(4.0 / 7.0)));
        for (Eigen::Index i = 0; i < 6; ++i) {
            CHECK(s.z(i, 0) >= norm_quantile(1.0 / 7.0) - 1e-15);
            CHECK(s.z(i, 0) <= norm_quantile(6.0 / 7.0) + 1e-15);
        }
    }

    TEST_CASE("malformed samples are rejected") {
        Eigen::MatrixXd one(1, 2);
        one << 1, 2;
        CHECK_THROWS_AS((void)to_pseudo_normal(one), InvalidInput);
        Eigen::MatrixXd bad(3, 2);
        bad << 1, 2, 3, std::numeric_limits<double>::infinity(), 5, 6;
        try {
            (void)to_pseudo_normal(bad, {"a", "b"});
            FAIL("expected InvalidInput");
        } catch (const InvalidInput& e) {
            CHECK(std::string(e.what()).find('b') != std::string::npos);
        }
    }

    TEST_CASE("point conversions: medians, round trips and upper quantiles") {
        std::mt19937_64 rng(9);
        std::gamma_distribution<double> gam(2.0, 1.0);
        Eigen::MatrixXd x(401, 2);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            x(i, 0) = gam(rng);
            x(i, 1) = -gam(rng);
        }
        const PseudoSample s = to_pseudo_normal(x);

        Eigen::VectorXd med(2);
        for (Eigen::Index j = 0; j < 2; ++j) {
            std::vector<double> c(x.col(j).data(), x.col(j).data() + x.rows());
            std::nth_element(c.begin(), c.begin() + 200, c.end());
            med[j] = c[200];
        }
        const PointConversion zm = x_to_z_point(s.margins, med);
        CHECK(std::abs(zm.value[0]) < 1e-12);
        CHECK(std::abs(zm.value[1]) < 1e-12);
        CHECK_FALSE(zm.any_clamped());

        for (Eigen::Index i = 0; i < x.rows(); i += 17) {
            const Eigen::VectorXd q = x.row(i).transpose();
            const Eigen::VectorXd back = z_to_x_point(s.margins, x_to_z_point(s.margins, q).value).value;
            CHECK(back[0] == doctest::Approx(q[0]).epsilon(1e-12));
            CHECK(back[1] == doctest::Approx(q[1]).epsilon(1e-12));
        }

        const Eigen::VectorXd hi = z_to_x_point(s.margins, Eigen::Vector2d(1.96, 1.96)).value;
        for (Eigen::Index j = 0; j < 2; ++j) {
            std::vector<double> c(x.col(j).data(), x.col(j).data() + x.rows());
            std::sort(c.begin(), c.end());
            // Order statistics bracketing the 97.5% point under rank/(n+1).
            const double pos = 0.975 * 402.0;
            CHECK(hi[j] >= c[static_cast<std::size_t>(std::floor(pos)) - 2]);
            CHECK(hi[j] <= c[static_cast<std::size_t>(std::ceil(pos))]);
        }
    }

    TEST_CASE("conversions outside the sample range clamp and flag") {
        Eigen::MatrixXd x(4, 1);
        x << 1, 2, 3, 4;
        const PseudoSample s = to_pseudo_normal(x);
        const PointConversion far = z_to_x_point(s.margins, Eigen::VectorXd::Constant(1, 5.0));
        CHECK(far.value[0] == 4.0);
        CHECK(far.clamped[0]);
        const PointConversion low = x_to_z_point(s.margins, Eigen::VectorXd::Constant(1, -10.0));
        CHECK(low.clamped[0]);
        CHECK(low.value[0] == doctest::Approx(norm_quantile(0.2)));
    }
}
