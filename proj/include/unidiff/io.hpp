#pragma once

#include "unidiff/errors.hpp"
#include "unidiff/mesh.hpp"
#include "unidiff/report.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace unidiff {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError("not a number: '" + std::string(s) + "'");
    }
    return v;
}

/**
 * Writes a field as CSV with one row per grid node: `node,x[,y],value`.
 * Dirichlet nodes carry their boundary value 0 so the file plots the whole
 * domain.
 */
inline void write_field_csv(std::ostream& out, const Grid& grid, std::span<const double> u) {
    grid.check_field(u);
    out << (grid.dim() == 1 ? "node,x,value\n" : "node,x,y,value\n");
    for (std::size_t node = 0; node < grid.node_count(); ++node) {
        const auto [x, y] = grid.coordinates(node);
        const bool fixed = grid.node_class(node) == NodeClass::DirichletBoundary;
        out << node << ',' << format_double(x) << ',';
        if (grid.dim() == 2) {
            out << format_double(y) << ',';
        }
        out << format_double(fixed ? 0.0 : u[grid.free_index(node)]) << '\n';
    }
}

inline void write_field_csv(const std::filesystem::path& path, const Grid& grid, std::span<const double> u) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    write_field_csv(out, grid, u);
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) {
            return cells;
        }
        start = comma + 1;
    }
}

} // namespace detail

/**
 * Reads a field written by write_field_csv. Rows must cover every node in
 * order, coordinates must match the grid to 1e-9 relative, and Dirichlet rows
 * must hold 0.
 */
inline Field read_field_csv(std::istream& in, const Grid& grid, const std::string& source = "csv") {
    const std::size_t columns = grid.dim() == 1 ? 3 : 4;
    std::string line;
    if (!std::getline(in, line)) {
        throw ConfigError(source + ": empty file");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != (grid.dim() == 1 ? "node,x,value" : "node,x,y,value")) {
        throw ConfigError(source + ": unexpected header '" + line + "'");
    }
    Field u(grid.free_count(), 0.0);
    std::size_t node = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            continue;
        }
        const std::string where = source + " line " + std::to_string(node + 2);
        const auto cells = detail::split_csv(line);
        if (cells.size() != columns) {
            throw ConfigError(where + ": expected " + std::to_string(columns) + " columns");
        }
        if (node >= grid.node_count()) {
            throw ConfigError(where + ": more rows than grid nodes");
        }
        try {
            if (parse_double(cells[0]) != static_cast<double>(node)) {
                throw ConfigError("node index out of order");
            }
            const auto xy = grid.coordinates(node);
            for (std::size_t a = 0; a + 2 < columns; ++a) {
                const double c = parse_double(cells[1 + a]);
                if (std::abs(c - xy[a]) > 1e-9 * std::max(1.0, std::abs(xy[a]))) {
                    throw ConfigError("coordinate does not match the grid");
                }
            }
            const double v = parse_double(cells[columns - 1]);
            if (!std::isfinite(v)) {
                throw ConfigError("non-finite value");
            }
            if (grid.node_class(node) == NodeClass::DirichletBoundary) {
                if (v != 0.0) {
                    throw ConfigError("Dirichlet node must hold 0");
                }
            } else {
                u[grid.free_index(node)] = v;
            }
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
        ++node;
    }
    if (node != grid.node_count()) {
        throw ConfigError(source + ": " + std::to_string(node) + " rows for " + std::to_string(grid.node_count()) +
                          " grid nodes");
    }
    return u;
}

inline Field read_field_csv(const std::filesystem::path& path, const Grid& grid) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    return read_field_csv(in, grid, path.string());
}

inline nlohmann::json to_json(const ReportEntry& e) {
    return {{"name", e.name}, {"value", e.value}, {"threshold", e.threshold},
            {"pass", e.pass}, {"gating", e.gating}, {"series", e.series}};
}

inline nlohmann::json to_json(const Report& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
        entries.push_back(to_json(e));
    }
    return {{"name", r.name}, {"status", r.status}, {"passed", r.passed()}, {"entries", std::move(entries)},
            {"notes", r.notes}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace unidiff
