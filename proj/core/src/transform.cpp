#include "lgpc/transform.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lgpc/error.hpp"
#include "lgpc/normal.hpp"

namespace lgpc {

MarginTable::MarginTable(std::span<const double> column) : sorted_(column.begin(), column.end()) {
    if (sorted_.size() < 2) throw InvalidInput("MarginTable: need at least 2 observations");
    for (double v : sorted_) {
        if (!std::isfinite(v)) throw InvalidInput("MarginTable: non-finite value");
    }
    std::sort(sorted_.begin(), sorted_.end());
}

double MarginTable::cdf(double q) const {
    if (!std::isfinite(q)) throw InvalidInput("empirical cdf: non-finite query");
    const auto rank = std::upper_bound(sorted_.begin(), sorted_.end(), q) - sorted_.begin();
    return static_cast<double>(rank) / static_cast<double>(sorted_.size() + 1);
}

double MarginTable::cdf_interpolated(double q, bool* clamped) const {
    if (!std::isfinite(q)) throw InvalidInput("x_to_z: non-finite coordinate");
    const double n1 = static_cast<double>(sorted_.size() + 1);
    bool out = false;
    double rank;
    if (q < sorted_.front()) {
        rank = 1.0;
        out = true;
    } else if (q >= sorted_.back()) {
        rank = static_cast<double>(sorted_.size());
        out = q > sorted_.back();
    } else {
        // k = #{x <= q}, so sorted_[k-1] <= q < sorted_[k]
        const auto k = static_cast<std::size_t>(
            std::upper_bound(sorted_.begin(), sorted_.end(), q) - sorted_.begin());
        const double lo = sorted_[k - 1];
        const double hi = sorted_[k];
        rank = static_cast<double>(k) + (q - lo) / (hi - lo);
    }
    if (clamped) *clamped = out;
    return rank / n1;
}

double MarginTable::quantile(double prob, bool* clamped) const {
    if (!std::isfinite(prob)) throw InvalidInput("z_to_x: non-finite probability");
    const std::size_t n = sorted_.size();
    const double u = prob * static_cast<double>(n + 1);  // fractional 1-based rank
    bool out = false;
    double value;
    if (u <= 1.0) {
        value = sorted_.front();
        out = u < 1.0;
    } else if (u >= static_cast<double>(n)) {
        value = sorted_.back();
        out = u > static_cast<double>(n);
    } else {
        const auto k = static_cast<std::size_t>(std::floor(u));
        const double frac = u - static_cast<double>(k);
        const double lo = sorted_[k - 1];
        const double hi = sorted_[k];
        value = frac == 0.0 ? lo : lo + frac * (hi - lo);
    }
    if (clamped) *clamped = out;
    return value;
}

double empirical_cdf(std::span<const double> column, double query) {
    if (column.empty()) throw InvalidInput("empirical_cdf: empty column");
    if (!std::isfinite(query)) throw InvalidInput("empirical_cdf: non-finite query");
    const auto rank = std::count_if(column.begin(), column.end(), [&](double v) { return v <= query; });
    return static_cast<double>(rank) / static_cast<double>(column.size() + 1);
}

PseudoSample to_pseudo_normal(const Eigen::MatrixXd& x, std::vector<std::string> column_names) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto p = static_cast<std::size_t>(x.cols());
    if (n < 2) throw InvalidInput("to_pseudo_normal: need at least 2 rows");
    if (column_names.empty()) {
        for (std::size_t j = 0; j < p; ++j) column_names.push_back("X" + std::to_string(j + 1));
    }
    if (column_names.size() != p) throw InvalidInput("to_pseudo_normal: column name count mismatch");

    PseudoSample out;
    out.z.resize(x.rows(), x.cols());
    out.margins.reserve(p);
    out.column_names = std::move(column_names);

    // Normal scores for ranks 1..n are shared by every column.
    std::vector<double> scores(n + 1);
    for (std::size_t r = 1; r <= n; ++r) {
        scores[r] = norm_quantile(static_cast<double>(r) / static_cast<double>(n + 1));
    }

    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < p; ++j) {
        const double* col = x.col(static_cast<Eigen::Index>(j)).data();
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(col[i])) {
                throw InvalidInput("to_pseudo_normal: non-finite entry in column '" + out.column_names[j] +
                                   "' (row " + std::to_string(i + 1) + ")");
            }
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
        // Walk tie groups; every member gets the group's largest rank.
        std::size_t start = 0;
        while (start < n) {
            std::size_t end = start + 1;
            while (end < n && col[order[end]] == col[order[start]]) ++end;
            const double score = scores[end];
            for (std::size_t k = start; k < end; ++k) {
                out.z(static_cast<Eigen::Index>(order[k]), static_cast<Eigen::Index>(j)) = score;
            }
            start = end;
        }
        out.margins.emplace_back(std::span<const double>(col, n));
    }
    return out;
}

bool PointConversion::any_clamped() const noexcept {
    return std::any_of(clamped.begin(), clamped.end(), [](bool b) { return b; });
}

PointConversion x_to_z_point(const std::vector<MarginTable>& margins, const Eigen::VectorXd& x_point) {
    if (static_cast<std::size_t>(x_point.size()) != margins.size()) {
        throw InvalidInput("x_to_z_point: dimension mismatch");
    }
    PointConversion out{Eigen::VectorXd(x_point.size()), std::vector<bool>(margins.size(), false)};
    for (std::size_t j = 0; j < margins.size(); ++j) {
        bool clamped = false;
        const double u = margins[j].cdf_interpolated(x_point[static_cast<Eigen::Index>(j)], &clamped);
        out.value[static_cast<Eigen::Index>(j)] = norm_quantile(u);
        out.clamped[j] = clamped;
    }
    return out;
}

PointConversion z_to_x_point(const std::vector<MarginTable>& margins, const Eigen::VectorXd& z_point) {
    if (static_cast<std::size_t>(z_point.size()) != margins.size()) {
        throw InvalidInput("z_to_x_point: dimension mismatch");
    }
    PointConversion out{Eigen::VectorXd(z_point.size()), std::vector<bool>(margins.size(), false)};
    for (std::size_t j = 0; j < margins.size(); ++j) {
        const double zj = z_point[static_cast<Eigen::Index>(j)];
        if (!std::isfinite(zj)) throw InvalidInput("z_to_x_point: non-finite coordinate");
        bool clamped = false;
        out.value[static_cast<Eigen::Index>(j)] = margins[j].quantile(norm_cdf(zj), &clamped);
        out.clamped[j] = clamped;
    }
    return out;
}

}  // namespace lgpc
