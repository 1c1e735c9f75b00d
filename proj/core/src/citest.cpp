#include "lgpc/citest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "lgpc/error.hpp"
#include "lgpc/normal.hpp"
#include "lgpc/parallel.hpp"
#include "lgpc/partial.hpp"
#include "lgpc/rng.hpp"
#include "lgpc/transform.hpp"

namespace lgpc {

const char* to_string(HFunction h) noexcept {
    switch (h) {
        case HFunction::square: return "square";
        case HFunction::absolute: return "abs";
        case HFunction::identity: return "identity";
    }
    return "square";
}

HFunction h_from_string(const std::string& s) {
    if (s == "square") return HFunction::square;
    if (s == "abs" || s == "absolute") return HFunction::absolute;
    if (s == "identity") return HFunction::identity;
    throw InvalidInput("unknown h function '" + s + "' (expected square|abs|identity)");
}

double apply_h(HFunction h, double alpha) noexcept {
    switch (h) {
        case HFunction::square: return alpha * alpha;
        case HFunction::absolute: return std::abs(alpha);
        case HFunction::identity: return alpha;
    }
    return alpha * alpha;
}

Region Region::quantile_box(double lo, double hi) {
    if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) throw InvalidInput("region: need 0 <= lo < hi <= 1");
    return Region{false, lo, hi};
}

bool Region::contains(const Eigen::VectorXd& z) const {
    if (all_points) return true;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        const double u = norm_cdf(z[j]);
        if (u < lo || u > hi) return false;
    }
    return true;
}

std::string Region::describe() const {
    if (all_points) return "all";
    std::ostringstream os;
    os.precision(17);
    os << lo << ',' << hi;
    return os.str();
}

void TestConfig::validate() const {
    if (B < 1) throw InvalidInput("test config: B must be at least 1");
    if (!(c > 0.0) || !std::isfinite(c)) throw InvalidInput("test config: c must be positive");
    if (density_bandwidth && !(*density_bandwidth > 0.0)) throw InvalidInput("test config: density bandwidth must be positive");
    if (!region.all_points && !(region.lo >= 0.0 && region.lo < region.hi && region.hi <= 1.0)) {
        throw InvalidInput("test config: need 0 <= lo < hi <= 1");
    }
}

Method resolve_method(const TestConfig& config, std::size_t p) {
    if (p < 3) throw InvalidInput("conditional independence test: need at least 3 columns");
    const Method m = config.method.value_or(p == 3 ? Method::trivariate : Method::pairwise);
    if (m == Method::trivariate && p != 3) throw InvalidInput("trivariate method requires exactly 3 columns");
    return m;
}

Bandwidth statistic_bandwidth(std::size_t n, std::size_t p, double c, Method method) {
    return plugin_bandwidth(n, c, method == Method::trivariate ? FitMode::trivariate : FitMode::pairwise, p);
}

double statistic_from_alpha(const Eigen::MatrixXd& z, std::span<const double> alpha, HFunction h, const Region& region,
                            std::size_t* points_used) {
    if (static_cast<Eigen::Index>(alpha.size()) != z.rows()) throw InvalidInput("statistic: one alpha per row");
    double sum = 0.0;
    std::size_t used = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        if (!region.contains(z.row(i).transpose())) continue;
        sum += apply_h(h, alpha[static_cast<std::size_t>(i)]);
        ++used;
    }
    if (used == 0) throw EmptyRegion("statistic: no observation inside the region");
    if (points_used) *points_used = used;
    return sum / static_cast<double>(z.rows());
}

double test_statistic(const Eigen::MatrixXd& z, const TestConfig& config, const Bandwidth& b, Method method,
                      TestDiagnostics* diagnostics, std::size_t* points_used) {
    if (z.cols() < 3) throw InvalidInput("statistic: need at least 3 columns");
    if (z.rows() < 50) throw InvalidInput("statistic: requires n >= 50");
    const LocalCorrelationEstimator est(z, b, config.kernel);
    std::vector<double> alpha(static_cast<std::size_t>(z.rows()), 0.0);
    std::size_t used = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const Eigen::VectorXd point = z.row(i).transpose();
        if (!config.region.contains(point)) continue;
        ++used;
        const PointCorrelation pc = est.estimate(point, method);
        alpha[static_cast<std::size_t>(i)] = lgpc_from_R(pc.r);
        if (diagnostics) {
            if (pc.any_fallback()) ++diagnostics->fallback_points;
            if (!pc.all_converged()) ++diagnostics->nonconverged_points;
            if (pc.pd_repaired) ++diagnostics->pd_repaired_points;
        }
    }
    if (used == 0) throw EmptyRegion("statistic: no observation inside the region");
    return statistic_from_alpha(z, alpha, config.h, config.region, points_used);
}

NullModel fit_null_model(const Eigen::MatrixXd& z, const TestConfig& config) {
    const auto n = static_cast<std::size_t>(z.rows());
    const auto p = static_cast<std::size_t>(z.cols());
    if (p < 3) throw InvalidInput("null model: need at least 3 columns");
    const Bandwidth bw = config.density_bandwidth
                             ? explicit_bandwidth(std::vector<double>(p, *config.density_bandwidth))
                             : plugin_bandwidth(n, config.c, FitMode::pairwise, p);
    const LocalCorrelationEstimator est(z, bw, config.kernel);
    std::vector<Eigen::Index> cond;
    for (Eigen::Index j = 2; j < z.cols(); ++j) cond.push_back(j);

    std::vector<std::optional<ConditionalDensity>> first(n);
    std::vector<std::optional<ConditionalDensity>> second(n);
    parallel_for(n, [&](std::size_t i) {
        const Eigen::VectorXd values = z.row(static_cast<Eigen::Index>(i)).tail(z.cols() - 2).transpose();
        first[i].emplace(estimate_conditional_density(est, 0, cond, values, config.density));
        second[i].emplace(estimate_conditional_density(est, 1, cond, values, config.density));
    });
    NullModel model;
    model.bandwidth = bw.scalar();
    model.first.reserve(n);
    model.second.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        model.first.push_back(std::move(*first[i]));
        model.second.push_back(std::move(*second[i]));
    }
    return model;
}

Eigen::MatrixXd null_replicate(const Eigen::MatrixXd& z, const NullModel& model, Rng& rng, double envelope_scale,
                               bool rerank) {
    const auto n = static_cast<std::size_t>(z.rows());
    if (model.first.size() != n || model.second.size() != n) throw InvalidInput("null replicate: model/data mismatch");
    Eigen::MatrixXd x = z;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        x(r, 0) = sample_accept_reject(model.first[i], 1, rng, envelope_scale).front();
        x(r, 1) = sample_accept_reject(model.second[i], 1, rng, envelope_scale).front();
    }
    return rerank ? to_pseudo_normal(x).z : x;
}

namespace {

std::vector<double> run_replicates(const Eigen::MatrixXd& z, const NullModel& model, const TestConfig& config,
                                   const Bandwidth& b, Method method, TestDiagnostics* diagnostics) {
    const std::size_t count = config.B;
    std::vector<double> stats(count, std::numeric_limits<double>::quiet_NaN());
    std::vector<unsigned char> retried(count, 0);
    std::vector<unsigned char> failed(count, 0);
    parallel_for(count, [&](std::size_t r) {
        const std::uint64_t stream = derive_seed(config.seed, r);
        for (int attempt = 0; attempt < 2; ++attempt) {
            Rng rng = make_stream(stream, static_cast<std::uint64_t>(attempt));
            try {
                const Eigen::MatrixXd zr = null_replicate(z, model, rng, attempt == 0 ? 1.0 : 2.0, config.rerank_replicates);
                stats[r] = test_statistic(zr, config, b, method);
                return;
            } catch (const EnvelopeFailure&) {
                retried[r] = 1;
            } catch (const EmptyRegion&) {
                // No replicate point inside the box: the statistic is zero there.
                stats[r] = 0.0;
                return;
            }
        }
        failed[r] = 1;
    });
    std::size_t n_failed = 0;
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t r = 0; r < count; ++r) {
        if (failed[r]) {
            ++n_failed;
        } else {
            out.push_back(stats[r]);
        }
    }
    if (diagnostics) {
        diagnostics->retried_replicates += static_cast<std::size_t>(std::count(retried.begin(), retried.end(), 1));
        diagnostics->failed_replicates += n_failed;
    }
    if (static_cast<double>(n_failed) > 0.05 * static_cast<double>(count)) {
        throw EnvelopeFailure("bootstrap: more than 5% of the replicates failed accept-reject sampling");
    }
    return out;
}

}  // namespace

std::vector<double> bootstrap_null(const Eigen::MatrixXd& z, const TestConfig& config, const Bandwidth& b,
                                   Method method, TestDiagnostics* diagnostics) {
    config.validate();
    const NullModel model = fit_null_model(z, config);
    if (diagnostics) {
        for (const auto* side : {&model.first, &model.second}) {
            for (const ConditionalDensity& d : *side) {
                diagnostics->density_fallback_points += d.fallback_points;
                if (d.normalization_flag()) ++diagnostics->density_normalization_flags;
            }
        }
    }
    return run_replicates(z, model, config, b, method, diagnostics);
}

double bootstrap_p_value(double t_observed, std::span<const double> replicates) {
    const auto exceed = std::count_if(replicates.begin(), replicates.end(), [&](double t) { return t >= t_observed; });
    return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(replicates.size()) + 1.0);
}

TestResult ci_test(const Eigen::MatrixXd& x, const TestConfig& config) {
    config.validate();
    const auto n = static_cast<std::size_t>(x.rows());
    const auto p = static_cast<std::size_t>(x.cols());
    const Method method = resolve_method(config, p);
    if (n < 50) throw InvalidInput("conditional independence test: requires n >= 50");
    const PseudoSample sample = to_pseudo_normal(x);
    const Bandwidth b = statistic_bandwidth(n, p, config.c, method);

    TestResult res;
    res.config = config;
    res.method = method;
    res.n = n;
    res.p = p;
    res.bandwidth_statistic = b.scalar();
    res.bandwidth_density = config.density_bandwidth.value_or(plugin_bandwidth(n, config.c, FitMode::pairwise, p).scalar());
    res.t_observed = test_statistic(sample.z, config, b, method, &res.diagnostics, &res.n_points_used);
    res.t_replicates = bootstrap_null(sample.z, config, b, method, &res.diagnostics);
    res.p_value = bootstrap_p_value(res.t_observed, res.t_replicates);
    return res;
}

TestResult granger_test(std::span<const double> cause, std::span<const double> effect, const TestConfig& config) {
    if (cause.size() != effect.size()) throw InvalidInput("granger test: series lengths differ");
    if (cause.size() < 51) throw InvalidInput("granger test: series must have at least 51 observations");
    const auto m = static_cast<Eigen::Index>(cause.size() - 1);
    Eigen::MatrixXd x(m, 3);
    for (Eigen::Index t = 0; t < m; ++t) {
        const auto s = static_cast<std::size_t>(t);
        x(t, 0) = effect[s + 1];
        x(t, 1) = cause[s];
        x(t, 2) = effect[s];
    }
    TestConfig cfg = config;
    cfg.method = Method::trivariate;
    return ci_test(x, cfg);
}

std::string to_json(const TestResult& r, int indent) {
    nlohmann::ordered_json j;
    j["t_observed"] = r.t_observed;
    j["p_value"] = r.p_value;
    j["B"] = r.config.B;
    j["B_effective"] = r.t_replicates.size();
    j["c"] = r.config.c;
    j["method"] = to_string(r.method);
    j["h"] = to_string(r.config.h);
    j["region"] = r.config.region.describe();
    j["seed"] = r.config.seed;
    j["n"] = r.n;
    j["p"] = r.p;
    j["n_points_used"] = r.n_points_used;
    j["bandwidth_statistic"] = r.bandwidth_statistic;
    j["bandwidth_density"] = r.bandwidth_density;
    j["rerank_replicates"] = r.config.rerank_replicates;
    j["kernel"] = r.config.kernel == KernelType::gaussian ? "gaussian" : "truncated_gaussian";
    j["density_grid"] = {{"points", r.config.density.points},
                         {"lo", r.config.density.lo},
                         {"hi", r.config.density.hi},
                         {"envelope_factor", r.config.density.envelope_factor}};
    const TestDiagnostics& d = r.diagnostics;
    j["diagnostics"] = {{"fallback_points", d.fallback_points},
                        {"nonconverged_points", d.nonconverged_points},
                        {"pd_repaired_points", d.pd_repaired_points},
                        {"density_fallback_points", d.density_fallback_points},
                        {"density_normalization_flags", d.density_normalization_flags},
                        {"retried_replicates", d.retried_replicates},
                        {"failed_replicates", d.failed_replicates}};
    if (!r.label.empty()) j["label"] = r.label;
    j["replicates"] = r.t_replicates;
    return j.dump(indent);
}

}  // namespace lgpc
