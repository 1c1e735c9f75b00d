#include "lgpc/dgp.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <json.hpp>

#include "lgpc/error.hpp"
#include "lgpc/parallel.hpp"
#include "lgpc/rng.hpp"

namespace lgpc {

std::string DgpId::name() const {
    std::string s = std::to_string(id);
    if (family == DgpFamily::primed) s += "'";
    if (family == DgpFamily::double_primed) s += "''";
    return s;
}

std::size_t DgpId::dimension() const noexcept {
    switch (family) {
        case DgpFamily::base: return 3;
        case DgpFamily::primed: return 4;
        case DgpFamily::double_primed: return 5;
    }
    return 3;
}

namespace {

bool defined(const DgpId& d) {
    if (d.id < 1 || d.id > 10) return false;
    return d.family == DgpFamily::base || (d.id != 3 && d.id != 4);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

DgpId parse_dgp(const std::string& text) {
    const std::string s = trim(text);
    std::size_t pos = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == 0) throw InvalidInput("unknown DGP '" + text + "'");
    const int id = std::stoi(s.substr(0, pos));
    const std::string suffix = s.substr(pos);
    DgpId d;
    d.id = id;
    if (suffix.empty()) {
        d.family = DgpFamily::base;
    } else if (suffix == "'" || suffix == "p" || suffix == "′") {
        d.family = DgpFamily::primed;
    } else if (suffix == "''" || suffix == "pp" || suffix == "″" || suffix == "′′") {
        d.family = DgpFamily::double_primed;
    } else {
        throw InvalidInput("unknown DGP suffix in '" + text + "' (expected ', '', p or pp)");
    }
    if (!defined(d)) throw InvalidInput("DGP " + d.name() + " is not defined");
    return d;
}

std::vector<DgpId> parse_dgp_list(const std::string& text) {
    std::vector<DgpId> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string tok = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!trim(tok).empty()) out.push_back(parse_dgp(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw InvalidInput("empty DGP list");
    return out;
}

void DgpSpec::validate() const {
    if (!defined(dgp)) throw InvalidInput("DGP " + dgp.name() + " is not defined");
    if (n < 1) throw InvalidInput("DGP: n must be at least 1");
    if (!(dgp10_h2_coefficient >= 0.0 && dgp10_h2_coefficient < 0.1)) {
        throw InvalidInput("DGP: the DGP 10 volatility coefficient must lie in [0, 0.1)");
    }
}

std::vector<std::string> dgp_column_names(const DgpId& dgp) {
    std::vector<std::string> names{"X1", "X2"};
    for (std::size_t j = 3; j <= dgp.dimension(); ++j) names.push_back("X" + std::to_string(j));
    return names;
}

Eigen::MatrixXd generate(const DgpSpec& spec) {
    spec.validate();
    const DgpId d = spec.dgp;
    const int lags = d.family == DgpFamily::base ? 1 : d.family == DgpFamily::primed ? 2 : 3;
    const auto dim = static_cast<Eigen::Index>(d.dimension());
    const std::size_t total = spec.burn_in + spec.n;

    Rng rng = make_stream(spec.seed, 0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Lag coefficients of X1 on its own past: 0.5, 0.25, 0.125.
    const double ar[3] = {0.5, 0.25, 0.125};
    double x1_lag[3] = {0.0, 0.0, 0.0};  // X1_{t-1}, X1_{t-2}, X1_{t-3}
    double x2_lag = 0.0;
    const double a = spec.dgp10_h2_coefficient;
    double h1 = 0.0;
    double h2 = 0.0;
    if (d.id == 4) {
        h1 = h2 = 0.01 / (1.0 - 0.9 - 0.05);
    } else if (d.id == 10) {
        h2 = 0.01 / (1.0 - 0.9 - a);
        h1 = (0.01 + 0.5 * h2) / (1.0 - 0.1 - 0.4);
    }

    Eigen::MatrixXd out(static_cast<Eigen::Index>(spec.n), dim);
    for (std::size_t t = 0; t < total; ++t) {
        const double e1 = gauss(rng);
        const double e2 = gauss(rng);
        double e3[3] = {0.0, 0.0, 0.0};
        if (d.id == 1) {
            for (int k = 0; k < lags; ++k) e3[k] = gauss(rng);
        }
        // Autoregressive part of X1 beyond the first lag (primed families).
        double tail = 0.0;
        for (int k = 1; k < lags; ++k) tail += ar[k] * x1_lag[k];
        double tail_sq = 0.0;
        for (int k = 1; k < lags; ++k) tail_sq += ar[k] * x1_lag[k] * x1_lag[k];

        double x1 = 0.0;
        double x2 = 0.0;
        switch (d.id) {
            case 1:
                x1 = e1;
                x2 = e2;
                break;
            case 2:
                x2 = 0.5 * x2_lag + e2;
                x1 = 0.5 * x1_lag[0] + tail + e1;
                break;
            case 3:
                x2 = 0.5 * x2_lag + e2;
                x1 = e1 * std::sqrt(0.01 + 0.5 * x1_lag[0] * x1_lag[0]);
                break;
            case 4:
                h1 = 0.01 + 0.9 * h1 + 0.05 * x1_lag[0] * x1_lag[0];
                h2 = 0.01 + 0.9 * h2 + 0.05 * x2_lag * x2_lag;
                x1 = e1 * std::sqrt(h1);
                x2 = e2 * std::sqrt(h2);
                break;
            case 5:
                x2 = 0.5 * x2_lag + e2;
                x1 = 0.5 * x1_lag[0] + tail + 0.5 * x2 + e1;
                break;
            case 6:
                x2 = 0.5 * x2_lag + e2;
                x1 = 0.5 * x1_lag[0] + tail + 0.5 * x2 * x2 + e1;
                break;
            case 7:
                x2 = 0.5 * x2_lag + e2;
                x1 = 0.5 * x1_lag[0] * x2 + tail + e1;
                break;
            case 8:
                x2 = 0.5 * x2_lag + e2;
                x1 = 0.5 * x1_lag[0] + tail + 0.5 * x2 * e1;
                break;
            case 9:
                x2 = 0.5 * x2_lag + e2;
                x1 = e1 * std::sqrt(0.01 + 0.5 * x1_lag[0] * x1_lag[0] + tail_sq + 0.25 * x2 * x2);
                break;
            case 10:
                h2 = 0.01 + 0.9 * h2 + a * x2_lag * x2_lag;
                x2 = e2 * std::sqrt(h2);
                h1 = 0.01 + 0.1 * h1 + 0.4 * x1_lag[0] * x1_lag[0] + 0.5 * x2 * x2;
                x1 = e1 * std::sqrt(h1);
                break;
            default:
                throw InvalidInput("DGP " + d.name() + " is not defined");
        }

        if (t >= spec.burn_in) {
            const auto row = static_cast<Eigen::Index>(t - spec.burn_in);
            out(row, 0) = x1;
            out(row, 1) = x2;
            for (int k = 0; k < lags; ++k) out(row, 2 + k) = d.id == 1 ? e3[k] : x1_lag[k];
        }
        for (int k = 2; k > 0; --k) x1_lag[k] = x1_lag[k - 1];
        x1_lag[0] = x1;
        x2_lag = x2;
    }
    return out;
}

BenchmarkReport benchmark(const BenchmarkOptions& options) {
    if (options.reps < 1) throw InvalidInput("benchmark: reps must be at least 1");
    if (options.dgps.empty()) throw InvalidInput("benchmark: no DGP selected");
    if (!(options.level > 0.0 && options.level < 1.0)) throw InvalidInput("benchmark: level must lie in (0,1)");
    options.test.validate();

    BenchmarkReport report;
    report.config = options.test;
    report.config.seed = options.seed;
    report.seed = options.seed;
    report.level = options.level;
    report.burn_in = options.burn_in;

    for (std::size_t di = 0; di < options.dgps.size(); ++di) {
        const DgpId dgp = options.dgps[di];
        const auto start = std::chrono::steady_clock::now();
        BenchmarkRow row;
        row.dgp = dgp;
        row.n = options.n;
        row.c = options.test.c;
        row.reps = options.reps;
        row.B = options.test.B;
        row.p_values.assign(options.reps, std::numeric_limits<double>::quiet_NaN());
        std::vector<std::string> errors(options.reps);
        // Streams depend on the DGP label and replication index only.
        const std::uint64_t dgp_key =
            derive_seed(options.seed, static_cast<std::uint64_t>(dgp.id) * 4 + static_cast<std::uint64_t>(dgp.family));
        parallel_for(options.reps, [&](std::size_t r) {
            DgpSpec spec;
            spec.dgp = dgp;
            spec.n = options.n;
            spec.burn_in = options.burn_in;
            spec.dgp10_h2_coefficient = options.dgp10_h2_coefficient;
            spec.seed = derive_seed(dgp_key, 2 * r);
            TestConfig cfg = options.test;
            cfg.seed = derive_seed(dgp_key, 2 * r + 1);
            try {
                row.p_values[r] = ci_test(generate(spec), cfg).p_value;
            } catch (const std::exception& e) {
                errors[r] = e.what();
            }
        });
        for (std::size_t r = 0; r < options.reps; ++r) {
            if (std::isnan(row.p_values[r])) {
                ++row.failures;
                row.failure_messages.push_back("replication " + std::to_string(r) + ": " + errors[r]);
            } else if (row.p_values[r] <= options.level) {
                ++row.rejections;
            }
        }
        const std::size_t ok = row.reps - row.failures;
        row.rejection_rate = ok > 0 ? static_cast<double>(row.rejections) / static_cast<double>(ok) : 0.0;
        row.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.rows.push_back(std::move(row));
    }
    return report;
}

void write_benchmark_table(std::ostream& os, const BenchmarkReport& report) {
    os << "# level=" << report.level << " seed=" << report.seed << " B=" << report.config.B
       << " c=" << report.config.c << " h=" << to_string(report.config.h)
       << " region=" << report.config.region.describe() << " burn_in=" << report.burn_in << '\n';
    os << "dgp,hypothesis,n,c,B,reps,rejections,failures,rejection_rate,elapsed_seconds\n";
    for (const BenchmarkRow& r : report.rows) {
        os << r.dgp.name() << ',' << (r.dgp.null_holds() ? "level" : "power") << ',' << r.n << ',' << r.c << ','
           << r.B << ',' << r.reps << ',' << r.rejections << ',' << r.failures << ',' << r.rejection_rate << ','
           << r.elapsed_seconds << '\n';
    }
}

std::string benchmark_json(const BenchmarkReport& report, int indent) {
    nlohmann::ordered_json j;
    j["level"] = report.level;
    j["seed"] = report.seed;
    j["B"] = report.config.B;
    j["c"] = report.config.c;
    j["h"] = to_string(report.config.h);
    j["region"] = report.config.region.describe();
    j["method"] = report.config.method ? to_string(*report.config.method) : "auto";
    j["burn_in"] = report.burn_in;
    j["rows"] = nlohmann::ordered_json::array();
    for (const BenchmarkRow& r : report.rows) {
        nlohmann::ordered_json row;
        row["dgp"] = r.dgp.name();
        row["n"] = r.n;
        row["reps"] = r.reps;
        row["rejections"] = r.rejections;
        row["failures"] = r.failures;
        row["rejection_rate"] = r.rejection_rate;
        row["elapsed_seconds"] = r.elapsed_seconds;
        nlohmann::ordered_json ps = nlohmann::ordered_json::array();
        for (double p : r.p_values) {
            if (std::isnan(p)) {
                ps.push_back(nullptr);
            } else {
                ps.push_back(p);
            }
        }
        row["p_values"] = ps;
        row["failure_messages"] = r.failure_messages;
        j["rows"].push_back(row);
    }
    return j.dump(indent);
}

}  // namespace lgpc
