#include "lf/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace lf::csv {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\"");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string_view rest(line);
    while (true) {
        const auto comma = rest.find(',');
        cells.push_back(trim(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return cells;
}

bool is_blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Table read_table(std::istream& in) {
    Table t;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line) || line.front() == '#') continue;
        auto cells = split_line(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw ParseError("csv line " + std::to_string(line_no) + ": expected " +
                             std::to_string(t.header.size()) + " cells, got " + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string& cell = cells[c];
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            if (first != last && *first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, last, row[c]);
            if (cell.empty() || ec != std::errc() || ptr != last)
                throw ParseError("csv line " + std::to_string(line_no) + ", column '" + t.header[c] +
                                 "': non-numeric cell '" + cell + "'");
        }
        t.rows.push_back(std::move(row));
    }
    if (!have_header) throw ParseError("csv: missing header row");
    return t;
}

Table read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("csv: cannot open '" + path + "'");
    return read_table(in);
}

Dataset to_dataset(const Table& table, std::string_view response_column) {
    const auto& h = table.header;
    const auto resp = std::find(h.begin(), h.end(), response_column);
    if (resp == h.end())
        throw ParseError("csv: response column '" + std::string(response_column) + "' not found");
    const auto resp_idx = static_cast<std::size_t>(resp - h.begin());
    const auto sig = std::find(h.begin(), h.end(), kSignalColumn);
    const std::size_t sig_idx = sig == h.end() ? h.size() : static_cast<std::size_t>(sig - h.begin());

    std::vector<std::size_t> feat;
    Dataset d;
    for (std::size_t c = 0; c < h.size(); ++c) {
        if (c == resp_idx || c == sig_idx) continue;
        feat.push_back(c);
        d.feature_names.push_back(h[c]);
    }
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    d.features.resize(n, static_cast<Eigen::Index>(feat.size()));
    d.response.resize(n);
    if (sig_idx < h.size()) d.signal = Vector(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < feat.size(); ++k) d.features(i, static_cast<Eigen::Index>(k)) = row[feat[k]];
        d.response(i) = row[resp_idx];
        if (d.signal) (*d.signal)(i) = row[sig_idx];
    }
    return d;
}

Dataset read_dataset(const std::string& path, std::string_view response_column) {
    Dataset d = to_dataset(read_table_file(path), response_column);
    d.validate();
    return d;
}

Matrix select_features(const Table& table, const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    for (const auto& name : names) {
        const auto it = std::find(table.header.begin(), table.header.end(), name);
        if (it == table.header.end()) throw ParseError("csv: feature column '" + name + "' not found");
        idx.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }
    Matrix x(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        for (std::size_t k = 0; k < idx.size(); ++k)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = table.rows[i][idx[k]];
    return x;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void write_dataset(std::ostream& out, const Dataset& data, std::string_view response_column) {
    const Index p = data.cols();
    for (Index j = 0; j < p; ++j) {
        out << (data.feature_names.empty() ? "x" + std::to_string(j + 1) : data.feature_names[j]) << ',';
    }
    out << response_column;
    if (data.signal) out << ',' << kSignalColumn;
    out << '\n';
    for (Index i = 0; i < data.rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (Index j = 0; j < p; ++j) out << format_double(data.features(r, static_cast<Eigen::Index>(j))) << ',';
        out << format_double(data.response(r));
        if (data.signal) out << ',' << format_double((*data.signal)(r));
        out << '\n';
    }
}

}  // namespace lf::csv
