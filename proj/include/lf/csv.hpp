#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "lf/core.hpp"

namespace lf::csv {

/// Column name used for the stored true signal g(x) when exporting simulated data.
inline constexpr std::string_view kSignalColumn = "__signal__";

class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

/// Header row plus numeric cells. Any non-numeric cell is a ParseError that
/// names the line and column.
Table read_table(std::istream& in);
Table read_table_file(const std::string& path);

/// Response selected by name; the reserved signal column, if present, becomes
/// Dataset::signal; every other column is a feature.
Dataset to_dataset(const Table& table, std::string_view response_column);
Dataset read_dataset(const std::string& path, std::string_view response_column);

/// Features only, columns picked (and reordered) by name. Used at prediction
/// time where the response may be absent. Returns an n x p matrix.
Matrix select_features(const Table& table, const std::vector<std::string>& names);

void write_dataset(std::ostream& out, const Dataset& data, std::string_view response_column = "y");

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace lf::csv
