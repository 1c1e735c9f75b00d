#include "lgpc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "lgpc/error.hpp"

namespace lgpc {

Eigen::Index DataTable::column(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        std::string known;
        for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
        throw InvalidInput("unknown column '" + name + "' (available: " + known + ")");
    }
    return static_cast<Eigen::Index>(it - names.begin());
}

namespace {

std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\"");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, delim)) out.push_back(cur);
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

bool skip_line(const std::string& line) {
    const auto b = line.find_first_not_of(" \t\r");
    return b == std::string::npos || line[b] == '#';
}

}  // namespace

DataTable read_table(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    DataTable t;
    char delim = ',';
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_line(line)) continue;
        if (line.find(',') == std::string::npos && line.find('\t') != std::string::npos) delim = '\t';
        for (const auto& f : split(line, delim)) t.names.push_back(strip(f));
        break;
    }
    if (t.names.empty()) throw InvalidInput(source + ": no header line found");
    for (std::size_t j = 0; j < t.names.size(); ++j) {
        if (t.names[j].empty()) {
            throw InvalidInput(source + ":" + std::to_string(line_no) + ":" + std::to_string(j + 1) + ": empty column name");
        }
    }

    std::vector<double> data;
    std::size_t rows = 0;
    const std::size_t p = t.names.size();
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_line(line)) continue;
        const auto fields = split(line, delim);
        if (fields.size() != p) {
            throw InvalidInput(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(p) +
                               " fields, found " + std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < p; ++j) {
            const std::string f = strip(fields[j]);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
                throw InvalidInput(source + ":" + std::to_string(line_no) + ":" + std::to_string(j + 1) +
                                   ": cannot parse '" + f + "' as a finite number (column " + t.names[j] + ")");
            }
            data.push_back(v);
        }
        ++rows;
    }
    t.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i * p + j];
        }
    }
    return t;
}

DataTable read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open input file '" + path + "'");
    return read_table(in, path);
}

void write_table(std::ostream& out, const std::vector<std::string>& names, const Eigen::MatrixXd& values,
                 const std::vector<std::string>& comments, int precision) {
    if (static_cast<Eigen::Index>(names.size()) != values.cols()) throw InvalidInput("write_table: name count mismatch");
    for (const auto& c : comments) out << "# " << c << '\n';
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    out << '\n';
    out << std::setprecision(precision);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << values(i, j);
        out << '\n';
    }
}

}  // namespace lgpc
