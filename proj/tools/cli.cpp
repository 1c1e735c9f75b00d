#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "lgpc/citest.hpp"
#include "lgpc/dgp.hpp"
#include "lgpc/error.hpp"
#include "lgpc/io.hpp"
#include "lgpc/normal.hpp"
#include "lgpc/parallel.hpp"
#include "lgpc/partial.hpp"
#include "lgpc/transform.hpp"

namespace lgpc::cli {

namespace {

struct Options {
    std::string input;
    std::string output;
    std::string x1;
    std::string x2;
    std::vector<std::string> cond;
    std::size_t grid = 25;
    double c = 1.0;
    std::size_t B = 500;
    std::string method;
    std::string h = "square";
    std::string region;
    std::uint64_t seed = 1;
    std::string dgp;
    std::size_t n = 100;
    std::size_t reps = 100;
    unsigned threads = 0;
    bool json = false;
    std::string x1_range;
    std::string x2_range;
    double level = 0.95;
    double alpha_level = 0.05;
    std::size_t burn_in = 200;
    double dgp10_coefficient = 0.05;
};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::pair<double, double> parse_pair(const std::string& text, const std::string& what) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw InvalidInput(what + ": expected LO,HI, got '" + text + "'");
    try {
        std::size_t used = 0;
        const std::string a = text.substr(0, comma);
        const std::string b = text.substr(comma + 1);
        const double lo = std::stod(a, &used);
        if (used != a.size()) throw std::invalid_argument(a);
        const double hi = std::stod(b, &used);
        if (used != b.size()) throw std::invalid_argument(b);
        if (!(lo < hi)) throw InvalidInput(what + ": LO must be below HI");
        return {lo, hi};
    } catch (const InvalidInput&) {
        throw;
    } catch (const std::exception&) {
        throw InvalidInput(what + ": cannot parse '" + text + "' as LO,HI");
    }
}

struct Assignment {
    std::string name;
    std::optional<double> value;
};

std::vector<Assignment> parse_cond(const std::vector<std::string>& items) {
    std::vector<Assignment> out;
    for (const auto& raw : items) {
        std::stringstream ss(raw);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) continue;
            const auto eq = tok.find('=');
            Assignment a;
            a.name = tok.substr(0, eq);
            if (eq != std::string::npos) {
                const std::string v = tok.substr(eq + 1);
                try {
                    std::size_t used = 0;
                    a.value = std::stod(v, &used);
                    if (used != v.size()) throw std::invalid_argument(v);
                } catch (const std::exception&) {
                    throw InvalidInput("--cond: cannot parse value '" + v + "' for " + a.name);
                }
            }
            if (a.name.empty()) throw InvalidInput("--cond: empty column name in '" + tok + "'");
            out.push_back(a);
        }
    }
    return out;
}

class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw InvalidInput("cannot open output file '" + path + "'");
        }
        os_ = file_ ? file_.get() : &fallback;
    }
    std::ostream& stream() { return *os_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_;
};

void require(const std::string& value, const std::string& flag) {
    if (value.empty()) throw InvalidInput(flag + " is required");
}

TestConfig test_config(const Options& o) {
    TestConfig cfg;
    cfg.B = o.B;
    cfg.c = o.c;
    cfg.h = h_from_string(o.h);
    cfg.seed = o.seed;
    if (!o.method.empty()) cfg.method = method_from_string(o.method);
    if (!o.region.empty() && o.region != "all") {
        const auto [lo, hi] = parse_pair(o.region, "--region");
        cfg.region = Region::quantile_box(lo, hi);
    }
    cfg.validate();
    return cfg;
}

int cmd_transform(const Options& o, std::ostream& out) {
    require(o.input, "--input");
    const DataTable t = read_table_file(o.input);
    const PseudoSample s = to_pseudo_normal(t.values, t.names);
    Sink sink(o.output, out);
    write_table(sink.stream(), s.column_names, s.z,
                {"command=transform", "input=" + o.input, "n=" + std::to_string(s.n()),
                 "scores=Phi^-1(rank/(n+1)), ties share the largest rank"},
                15);
    return kExitOk;
}

int cmd_map(const Options& o, std::ostream& out) {
    require(o.input, "--input");
    require(o.x1, "--x1");
    require(o.x2, "--x2");
    const DataTable t = read_table_file(o.input);
    const auto cond = parse_cond(o.cond);
    if (cond.empty()) throw InvalidInput("map: at least one --cond NAME=VALUE assignment is required");
    std::vector<Eigen::Index> cols{t.column(o.x1), t.column(o.x2)};
    std::vector<std::string> names{o.x1, o.x2};
    Eigen::VectorXd cond_x(static_cast<Eigen::Index>(cond.size()));
    for (std::size_t k = 0; k < cond.size(); ++k) {
        if (!cond[k].value) throw InvalidInput("map: --cond " + cond[k].name + " needs a value (NAME=VALUE)");
        cols.push_back(t.column(cond[k].name));
        names.push_back(cond[k].name);
        cond_x[static_cast<Eigen::Index>(k)] = *cond[k].value;
    }
    for (std::size_t a = 0; a < cols.size(); ++a) {
        for (std::size_t b = a + 1; b < cols.size(); ++b) {
            if (cols[a] == cols[b]) throw InvalidInput("map: column '" + names[b] + "' is used twice");
        }
    }
    Eigen::MatrixXd x(t.values.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = t.values.col(cols[j]);
    const PseudoSample s = to_pseudo_normal(x, names);
    if (o.grid < 2) throw InvalidInput("--grid must be at least 2");

    const std::vector<MarginTable> cond_margins(s.margins.begin() + 2, s.margins.end());
    const PointConversion cz = x_to_z_point(cond_margins, cond_x);

    const auto levels_for = [&](const std::string& range, std::size_t j) {
        if (range.empty()) return quantile_levels(o.grid, 0.02, 0.98);
        const auto [lo, hi] = parse_pair(range, j == 0 ? "--x1-range" : "--x2-range");
        std::vector<double> z(o.grid);
        for (std::size_t i = 0; i < o.grid; ++i) {
            const double xv = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(o.grid - 1);
            z[i] = norm_quantile(s.margins[j].cdf_interpolated(xv));
        }
        return z;
    };
    const auto points = map_grid(levels_for(o.x1_range, 0), levels_for(o.x2_range, 1), cz.value);
    const Method method = o.method.empty() ? (s.p() == 3 ? Method::trivariate : Method::pairwise)
                                           : method_from_string(o.method);
    const Bandwidth b = statistic_bandwidth(s.n(), s.p(), o.c, method);
    const auto map = estimate_lgpc_map(s, points, method, b, true, o.level);

    std::vector<std::string> comments{"command=map", "input=" + o.input, "x1=" + o.x1, "x2=" + o.x2};
    for (std::size_t k = 0; k < cond.size(); ++k) {
        comments.push_back("cond " + cond[k].name + "=" + fmt(cond_x[static_cast<Eigen::Index>(k)]) +
                           " z=" + fmt(cz.value[static_cast<Eigen::Index>(k)]) +
                           (cz.clamped[k] ? " (outside the sample range, clamped)" : ""));
    }
    comments.push_back("n=" + std::to_string(s.n()) + " method=" + to_string(method) + " c=" + fmt(o.c) +
                       " bandwidth=" + fmt(b.scalar()) + " grid=" + std::to_string(o.grid) +
                       " level=" + fmt(o.level));
    Sink sink(o.output, out);
    write_lgpc_map_csv(sink.stream(), map, names, comments);
    return kExitOk;
}

nlohmann::ordered_json result_json(const TestResult& r) { return nlohmann::ordered_json::parse(to_json(r)); }

int cmd_test(const Options& o, std::ostream& out) {
    require(o.input, "--input");
    require(o.x1, "--x1");
    require(o.x2, "--x2");
    const DataTable t = read_table_file(o.input);
    std::vector<Eigen::Index> cols{t.column(o.x1), t.column(o.x2)};
    std::vector<std::string> names{o.x1, o.x2};
    const auto cond = parse_cond(o.cond);
    if (cond.empty()) {
        for (std::size_t j = 0; j < t.names.size(); ++j) {
            if (t.names[j] != o.x1 && t.names[j] != o.x2) {
                cols.push_back(static_cast<Eigen::Index>(j));
                names.push_back(t.names[j]);
            }
        }
    } else {
        for (const auto& a : cond) {
            if (a.value) throw InvalidInput("test: --cond takes column names only (got a value for " + a.name + ")");
            cols.push_back(t.column(a.name));
            names.push_back(a.name);
        }
    }
    if (cols.size() < 3) throw InvalidInput("test: at least one conditioning column is required");
    for (std::size_t a = 0; a < cols.size(); ++a) {
        for (std::size_t b = a + 1; b < cols.size(); ++b) {
            if (cols[a] == cols[b]) throw InvalidInput("test: column '" + names[b] + "' is used twice");
        }
    }
    Eigen::MatrixXd x(t.values.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = t.values.col(cols[j]);
    const TestResult r = ci_test(x, test_config(o));
    auto j = result_json(r);
    j["input"] = o.input;
    j["x1"] = o.x1;
    j["x2"] = o.x2;
    j["conditioning"] = std::vector<std::string>(names.begin() + 2, names.end());
    Sink sink(o.output, out);
    sink.stream() << j.dump(2) << '\n';
    return kExitOk;
}

int cmd_granger(const Options& o, std::ostream& out) {
    require(o.input, "--input");
    require(o.x1, "--x1");
    require(o.x2, "--x2");
    const DataTable t = read_table_file(o.input);
    const Eigen::VectorXd a = t.values.col(t.column(o.x1));
    const Eigen::VectorXd b = t.values.col(t.column(o.x2));
    const TestConfig cfg = test_config(o);
    nlohmann::ordered_json j;
    j["input"] = o.input;
    j["results"] = nlohmann::ordered_json::array();
    const auto run_dir = [&](const Eigen::VectorXd& cause, const Eigen::VectorXd& effect, const std::string& label) {
        TestResult r = granger_test(std::span<const double>(cause.data(), static_cast<std::size_t>(cause.size())),
                                    std::span<const double>(effect.data(), static_cast<std::size_t>(effect.size())), cfg);
        r.label = label;
        j["results"].push_back(result_json(r));
    };
    run_dir(a, b, o.x1 + " -> " + o.x2);
    run_dir(b, a, o.x2 + " -> " + o.x1);
    Sink sink(o.output, out);
    sink.stream() << j.dump(2) << '\n';
    return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
    require(o.dgp, "--dgp");
    DgpSpec spec;
    spec.dgp = parse_dgp(o.dgp);
    spec.n = o.n;
    spec.seed = o.seed;
    spec.burn_in = o.burn_in;
    spec.dgp10_h2_coefficient = o.dgp10_coefficient;
    const Eigen::MatrixXd x = generate(spec);
    Sink sink(o.output, out);
    write_table(sink.stream(), dgp_column_names(spec.dgp), x,
                {"command=simulate", "dgp=" + spec.dgp.name(), "n=" + std::to_string(spec.n),
                 "seed=" + std::to_string(spec.seed), "burn_in=" + std::to_string(spec.burn_in)},
                17);
    return kExitOk;
}

int cmd_benchmark(const Options& o, std::ostream& out) {
    require(o.dgp, "--dgp");
    BenchmarkOptions bo;
    bo.dgps = parse_dgp_list(o.dgp);
    bo.n = o.n;
    bo.reps = o.reps;
    bo.test = test_config(o);
    bo.seed = o.seed;
    bo.level = o.alpha_level;
    bo.burn_in = o.burn_in;
    bo.dgp10_h2_coefficient = o.dgp10_coefficient;
    const BenchmarkReport report = benchmark(bo);
    if (o.json) {
        Sink sink(o.output, out);
        sink.stream() << benchmark_json(report) << '\n';
        return kExitOk;
    }
    Sink sink(o.output, out);
    write_benchmark_table(sink.stream(), report);
    if (!o.output.empty()) {
        std::ofstream side(o.output + ".json");
        if (!side) throw InvalidInput("cannot open sidecar '" + o.output + ".json'");
        side << benchmark_json(report) << '\n';
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Local Gaussian partial correlation: maps, conditional-independence and Granger tests", "lgpc"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--threads", o.threads, "Worker thread cap (0 = all cores)")->capture_default_str();

    const auto common_io = [&](CLI::App* sub) {
        sub->add_option("--input", o.input, "Input delimited file with a header");
        sub->add_option("--output", o.output, "Output file (stdout when omitted)");
    };
    const auto test_opts = [&](CLI::App* sub) {
        // "--h" is the statistic's h function, so help is only reachable as --help.
        sub->set_help_flag("--help", "Print this help message and exit");
        sub->add_option("--c", o.c, "Bandwidth constant")->capture_default_str();
        sub->add_option("--B", o.B, "Bootstrap replicates")->capture_default_str();
        sub->add_option("--method", o.method, "trivariate|pairwise (default by dimension)");
        sub->add_option("--h", o.h, "square|abs|identity")->capture_default_str();
        sub->add_option("--region", o.region, "Quantile box LO,HI (default: all points)");
        sub->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    };

    CLI::App* transform = app.add_subcommand("transform", "Write normal-score pseudo-observations");
    common_io(transform);

    CLI::App* map = app.add_subcommand("map", "Estimate alpha on a grid with the conditioners fixed");
    common_io(map);
    map->add_option("--x1", o.x1, "First target column");
    map->add_option("--x2", o.x2, "Second target column");
    map->add_option("--cond", o.cond, "Conditioning assignments NAME=VALUE[,...] (x-scale)");
    map->add_option("--grid", o.grid, "Grid points per axis")->capture_default_str();
    map->add_option("--c", o.c, "Bandwidth constant")->capture_default_str();
    map->add_option("--method", o.method, "trivariate|pairwise (default by dimension)");
    map->add_option("--x1-range", o.x1_range, "x-scale range LO,HI for the first target");
    map->add_option("--x2-range", o.x2_range, "x-scale range LO,HI for the second target");
    map->add_option("--level", o.level, "Confidence level of the band")->capture_default_str();
    map->add_option("--seed", o.seed, "Unused; accepted for uniformity");

    CLI::App* test = app.add_subcommand("test", "Conditional-independence test of x1 and x2 given the rest");
    common_io(test);
    test->add_option("--x1", o.x1, "First target column");
    test->add_option("--x2", o.x2, "Second target column");
    test->add_option("--cond", o.cond, "Conditioning columns NAME[,...] (default: all others)");
    test_opts(test);
    test->add_flag("--json", o.json, "JSON output (always on for this command)");

    CLI::App* granger = app.add_subcommand("granger", "Lag-1 Granger test in both directions");
    common_io(granger);
    granger->add_option("--x1", o.x1, "First series");
    granger->add_option("--x2", o.x2, "Second series");
    test_opts(granger);
    granger->add_flag("--json", o.json, "JSON output (always on for this command)");

    CLI::App* simulate = app.add_subcommand("simulate", "Generate a sample from one DGP");
    simulate->add_option("--output", o.output, "Output file (stdout when omitted)");
    simulate->add_option("--dgp", o.dgp, "DGP label, e.g. 5, 5', 5'', 5p, 5pp");
    simulate->add_option("--n", o.n, "Sample size")->capture_default_str();
    simulate->add_option("--seed", o.seed, "Seed")->capture_default_str();
    simulate->add_option("--burn-in", o.burn_in, "Discarded initial samples")->capture_default_str();
    simulate->add_option("--dgp10-coefficient", o.dgp10_coefficient, "Lagged X2^2 weight in DGP 10")
        ->capture_default_str();

    CLI::App* bench = app.add_subcommand("benchmark", "Monte Carlo level/power table");
    bench->add_option("--output", o.output, "Table file (stdout when omitted); JSON sidecar at PATH.json");
    bench->add_option("--dgp,--dgps", o.dgp, "Comma-separated DGP labels");
    bench->add_option("--n", o.n, "Sample size")->capture_default_str();
    bench->add_option("--reps", o.reps, "Replications per DGP")->capture_default_str();
    bench->add_option("--level", o.alpha_level, "Test level")->capture_default_str();
    bench->add_option("--burn-in", o.burn_in, "Discarded initial samples")->capture_default_str();
    bench->add_option("--dgp10-coefficient", o.dgp10_coefficient, "Lagged X2^2 weight in DGP 10")
        ->capture_default_str();
    bench->add_flag("--json", o.json, "Write the JSON document instead of the table");
    test_opts(bench);

    // Benchmarks default to fewer bootstrap replicates than single analyses.
    bool bench_b_given = false;
    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
        bench_b_given = bench->count("--B") > 0;
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "lgpc: " << e.what() << '\n';
        return kExitInput;
    }
    if (bench->parsed() && !bench_b_given) o.B = 100;

    try {
        set_max_threads(o.threads);
        if (transform->parsed()) return cmd_transform(o, out);
        if (map->parsed()) return cmd_map(o, out);
        if (test->parsed()) return cmd_test(o, out);
        if (granger->parsed()) return cmd_granger(o, out);
        if (simulate->parsed()) return cmd_simulate(o, out);
        if (bench->parsed()) return cmd_benchmark(o, out);
    } catch (const InvalidInput& e) {
        err << "lgpc: input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "lgpc: numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "lgpc: error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitInput;
}

}  // namespace lgpc::cli
