#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace lgpc {

/// Named numeric columns read from a delimited text file.
struct DataTable {
    std::vector<std::string> names;
    Eigen::MatrixXd values;  // rows x columns

    /// Index of the named column; InvalidInput listing the known names otherwise.
    [[nodiscard]] Eigen::Index column(const std::string& name) const;
};

/// Comma- or tab-separated text with a header line. Lines starting with '#'
/// and blank lines are skipped. Parse errors report source:line:column.
[[nodiscard]] DataTable read_table(std::istream& in, const std::string& source = "<input>");
[[nodiscard]] DataTable read_table_file(const std::string& path);

/// Writes '#'-prefixed comment lines, a header, and rows with `precision`
/// significant digits.
void write_table(std::ostream& out, const std::vector<std::string>& names, const Eigen::MatrixXd& values,
                 const std::vector<std::string>& comments = {}, int precision = 15);

}  // namespace lgpc
