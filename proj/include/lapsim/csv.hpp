#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lapsim/errors.hpp"

namespace lapsim {

// Minimal numeric CSV support: one header row of column names, then rows of
// doubles. Matches every tabular interface this toolkit reads or writes.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    // Column index by exact name, -1 when absent.
    int col(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }

    // Index of a required column; faults naming the missing one.
    std::size_t require(const std::string& name) const {
        const int i = col(name);
        if (i < 0) throw ConfigError("missing CSV column: " + name);
        return static_cast<std::size_t>(i);
    }
};

namespace csv_detail {

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' '))
            field.pop_back();
        std::size_t b = 0;
        while (b < field.size() && field[b] == ' ') ++b;
        out.push_back(field.substr(b));
    }
    return out;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
    if (s.empty()) throw ConfigError("empty CSV field on line " + std::to_string(line_no));
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
            throw ConfigError("malformed CSV number '" + s + "' on line " +
                              std::to_string(line_no));
        return v;
    } catch (const std::invalid_argument&) {
        throw ConfigError("malformed CSV number '" + s + "' on line " +
                          std::to_string(line_no));
    } catch (const std::out_of_range&) {
        throw ConfigError("CSV number out of range on line " + std::to_string(line_no));
    }
}

}  // namespace csv_detail

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CSV file: " + path.string());
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto fields = csv_detail::split(line);
        if (table.columns.empty()) {
            table.columns = std::move(fields);
            continue;
        }
        if (fields.size() != table.columns.size())
            throw ConfigError("CSV row width mismatch on line " +
                              std::to_string(line_no) + " of " + path.string());
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(csv_detail::parse_double(f, line_no));
        table.rows.push_back(std::move(row));
    }
    if (table.columns.empty()) throw ConfigError("empty CSV file: " + path.string());
    return table;
}

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write CSV file: " + path.string());
    out.precision(17);
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out << ',';
        out << columns[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
    if (!out) throw ConfigError("failed writing CSV file: " + path.string());
}

}  // namespace lapsim
