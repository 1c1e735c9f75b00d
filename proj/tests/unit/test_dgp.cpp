#include <doctest.h>

#include <boost/math/distributions/fisher_f.hpp>

#include <cmath>
#include <sstream>

#include "lgpc/dgp.hpp"
#include "lgpc/error.hpp"
#include "lgpc/parallel.hpp"

using namespace lgpc;

namespace {

Eigen::MatrixXd gen(const std::string& dgp, std::size_t n, std::uint64_t seed) {
    DgpSpec s;
    s.dgp = parse_dgp(dgp);
    s.n = n;
    s.seed = seed;
    return generate(s);
}

double variance(const Eigen::VectorXd& v) {
    const double m = v.mean();
    return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

// p-value of the X2 coefficient in the regression of X1 on (1, X3, X2).
double linear_ci_p(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd a(n, 3);
    a.col(0).setOnes();
    a.col(1) = x.col(2);
    a.col(2) = x.col(1);
    const Eigen::VectorXd y = x.col(0);
    const auto rss = [&](const Eigen::MatrixXd& m) {
        return (y - m * m.colPivHouseholderQr().solve(y)).squaredNorm();
    };
    const double r0 = rss(a.leftCols(2));
    const double r1 = rss(a);
    const double df2 = static_cast<double>(n - 3);
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f(1.0, df2), (r0 - r1) / (r1 / df2)));
}

}  // namespace

TEST_SUITE("dgp") {
    TEST_CASE("parsing") {
        CHECK(parse_dgp("5") == DgpId{DgpFamily::base, 5});
        CHECK(parse_dgp("5'") == DgpId{DgpFamily::primed, 5});
        CHECK(parse_dgp("5p") == DgpId{DgpFamily::primed, 5});
        CHECK(parse_dgp("9''") == DgpId{DgpFamily::double_primed, 9});
        CHECK(parse_dgp("9pp") == DgpId{DgpFamily::double_primed, 9});
        CHECK(parse_dgp("2′") == DgpId{DgpFamily::primed, 2});
        CHECK(parse_dgp("2″") == DgpId{DgpFamily::double_primed, 2});
        CHECK(parse_dgp("10").name() == "10");
        CHECK(parse_dgp("7pp").name() == "7''");
        for (const char* bad : {"0", "11", "x", "3'", "4''", "5'''", ""}) {
            CHECK_THROWS_AS((void)parse_dgp(bad), InvalidInput);
        }
        const auto list = parse_dgp_list("1,5', 9pp");
        REQUIRE(list.size() == 3);
        CHECK(list[1] == DgpId{DgpFamily::primed, 5});
        CHECK(list[2].dimension() == 5);
        CHECK(parse_dgp("1").dimension() == 3);
        CHECK(parse_dgp("4").null_holds());
        CHECK_FALSE(parse_dgp("5").null_holds());
        CHECK(dgp_column_names(parse_dgp("5'")) == std::vector<std::string>{"X1", "X2", "X3", "X4"});
    }

    TEST_CASE("generator settings validation") {
        DgpSpec s;
        s.n = 0;
        CHECK_THROWS_AS(s.validate(), InvalidInput);
        s = DgpSpec{};
        s.dgp10_h2_coefficient = 0.1;
        CHECK_THROWS_AS(s.validate(), InvalidInput);
        s = DgpSpec{};
        s.dgp = DgpId{DgpFamily::primed, 3};
        CHECK_THROWS_AS((void)generate(s), InvalidInput);
    }

    TEST_CASE("DGP 1: independent columns") {
        const Eigen::MatrixXd x = gen("1", 1000, 51);
        CHECK(x.cols() == 3);
        CHECK(x.rows() == 1000);
        const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
        const Eigen::MatrixXd cov = c.transpose() * c / 999.0;
        for (int i = 0; i < 3; ++i) {
            for (int j = i + 1; j < 3; ++j) {
                CHECK(std::abs(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j))) < 0.1);
            }
        }
    }

    TEST_CASE("conditioners are lags of X1") {
        for (const char* d : {"2", "5", "9", "10"}) {
            const Eigen::MatrixXd x = gen(d, 200, 52);
            for (Eigen::Index t = 1; t < x.rows(); ++t) CHECK(x(t, 2) == x(t - 1, 0));
        }
        const Eigen::MatrixXd p = gen("6'", 200, 53);
        REQUIRE(p.cols() == 4);
        for (Eigen::Index t = 2; t < p.rows(); ++t) {
            CHECK(p(t, 2) == p(t - 1, 0));
            CHECK(p(t, 3) == p(t - 2, 0));
        }
        const Eigen::MatrixXd pp = gen("8''", 200, 54);
        REQUIRE(pp.cols() == 5);
        for (Eigen::Index t = 3; t < pp.rows(); ++t) CHECK(pp(t, 4) == pp(t - 3, 0));
    }

    TEST_CASE("DGP 4: long-run volatility mean") {
        // E X1^2 = E h1 = 0.01 / (1 - 0.95) = 0.2.
        const Eigen::MatrixXd x = gen("4", 100000, 55);
        CHECK(x.col(0).array().square().mean() == doctest::Approx(0.2).epsilon(0.05));
    }

    TEST_CASE("reproducibility") {
        for (const char* d : {"1", "3", "7", "10", "9''"}) {
            CHECK(gen(d, 300, 56) == gen(d, 300, 56));
            CHECK(gen(d, 300, 56) != gen(d, 300, 57));
        }
        // A longer series starts with the shorter one.
        const Eigen::MatrixXd a = gen("5", 100, 58);
        const Eigen::MatrixXd b = gen("5", 150, 58);
        CHECK(b.topRows(100) == a);
    }

    TEST_CASE("stationarity after burn-in") {
        for (const char* d : {"2", "3", "4", "5", "6", "7", "8", "9", "5'", "9''"}) {
            const Eigen::MatrixXd x = gen(d, 100000, 59);
            for (Eigen::Index j = 0; j < 2; ++j) {
                const double first = variance(x.col(j).head(50000));
                const double second = variance(x.col(j).tail(50000));
                INFO("DGP " << d << " column " << j);
                CHECK(std::abs(second - first) / first < 0.10);
            }
        }
    }

    TEST_CASE("DGP 5: the linear test has near-full power") {
        int reject = 0;
        for (std::uint64_t r = 0; r < 200; ++r) reject += linear_ci_p(gen("5", 100, 1000 + r)) <= 0.05 ? 1 : 0;
        CHECK(reject >= 196);
        int level = 0;
        for (std::uint64_t r = 0; r < 400; ++r) level += linear_ci_p(gen("2", 100, 2000 + r)) <= 0.05 ? 1 : 0;
        CHECK(level >= 4);
        CHECK(level <= 40);
    }

    TEST_CASE("benchmark is independent of the thread count") {
        BenchmarkOptions o;
        o.dgps = parse_dgp_list("1,5");
        o.n = 60;
        o.reps = 4;
        o.test.B = 9;
        o.seed = 60;
        const BenchmarkReport a = benchmark(o);
        const unsigned before = max_threads();
        set_max_threads(1);
        const BenchmarkReport b = benchmark(o);
        set_max_threads(before);
        REQUIRE(a.rows.size() == 2);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(a.rows[i].p_values == b.rows[i].p_values);
            CHECK(a.rows[i].rejections == b.rows[i].rejections);
            CHECK(a.rows[i].reps == 4);
            CHECK(a.rows[i].B == 9);
            CHECK(a.rows[i].failures == 0);
            CHECK(a.rows[i].rejection_rate >= 0.0);
            CHECK(a.rows[i].rejection_rate <= 1.0);
        }
        std::ostringstream table;
        write_benchmark_table(table, a);
        CHECK(table.str().find("rejection_rate") != std::string::npos);
        CHECK(benchmark_json(a).find("p_values") != std::string::npos);
    }
}
