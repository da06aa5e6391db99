#pragma once

#include "unidiff/errors.hpp"
#include "unidiff/expr.hpp"
#include "unidiff/io.hpp"
#include "unidiff/mesh.hpp"
#include "unidiff/obstacle.hpp"
#include "unidiff/stepper.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace unidiff {

/// Spatial data given either as an expression in x, y (and t for the forcing) or as a CSV field file.
struct FieldSource {
    std::string expression;
    /// Absolute path when the data come from a file.
    std::filesystem::path file;

    bool is_file() const { return !file.empty(); }
};

struct CheckToggles {
    bool certificates = true;
    bool complementarity = true;
    bool dissipation = true;
    bool energy = false;
    bool laplacian_bound = false;
    bool asymptotic = false;
    double tol = 1e-8;
    double asymptotic_tol = 1e-4;
};

struct RunConfig {
    int dim = 1;
    std::vector<double> extents;
    std::vector<std::size_t> counts;
    BoundarySpec boundary;

    FieldSource u0;
    FieldSource f;
    std::optional<std::string> f_inf;
    std::optional<std::string> f_star;

    double final_time = 1.0;
    std::size_t steps = 1;
    std::vector<double> knots;

    StepOptions step;

    std::filesystem::path output_dir = "out";
    std::size_t stride = 1;

    CheckToggles checks;

    /// The configuration as parsed, with file paths made absolute. Echoed into run manifests.
    nlohmann::json source;
};

namespace detail {

using nlohmann::json;

inline std::string join_path(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

inline void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
        throw ConfigError((path.empty() ? std::string("config") : path) + ": expected an object");
    }
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            ok = ok || key == a;
        }
        if (!ok) {
            throw ConfigError(join_path(path, key) + ": unknown field");
        }
    }
}

inline const json& required(const json& obj, const std::string& path, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ConfigError(join_path(path, key) + ": missing required field");
    }
    return *it;
}

inline double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) {
        throw ConfigError(path + ": expected a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw ConfigError(path + ": must be finite");
    }
    return x;
}

inline std::size_t as_count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError(path + ": expected a non-negative integer");
    }
    return v.get<std::size_t>();
}

inline bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) {
        throw ConfigError(path + ": expected true or false");
    }
    return v.get<bool>();
}

inline std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) {
        throw ConfigError(path + ": expected a string");
    }
    return v.get<std::string>();
}

inline Expression parse_at(const std::string& src, const std::string& path, bool allow_time) {
    try {
        Expression e = parse_expression(src);
        if (!allow_time && e.depends_on_time()) {
            throw ConfigError(path + ": must not depend on t");
        }
        return e;
    } catch (const ExprSyntaxError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline BoundaryKind boundary_kind(const json& v, const std::string& path) {
    const std::string s = as_string(v, path);
    if (s == "dirichlet") return BoundaryKind::Dirichlet;
    if (s == "neumann") return BoundaryKind::Neumann;
    throw ConfigError(path + ": expected \"dirichlet\" or \"neumann\"");
}

inline FieldSource field_source(json& v, const std::string& path, const std::filesystem::path& base, bool allow_time) {
    FieldSource s;
    if (v.is_number()) {
        v = format_double(as_number(v, path));
    }
    if (v.is_string()) {
        s.expression = v.get<std::string>();
        parse_at(s.expression, path, allow_time);
        return s;
    }
    only_keys(v, path, {"file"});
    std::filesystem::path file = as_string(required(v, path, "file"), path + ".file");
    if (file.is_relative()) {
        file = base / file;
    }
    file = std::filesystem::absolute(file).lexically_normal();
    if (!std::filesystem::is_regular_file(file)) {
        throw ConfigError(path + ".file: no such file: " + file.string());
    }
    v["file"] = file.string();
    s.file = std::move(file);
    return s;
}

} // namespace detail

/**
 * Validates a configuration document. Relative file references resolve
 * against `base_dir`. Errors name the offending field path.
 */
inline RunConfig parse_config(nlohmann::json doc, const std::filesystem::path& base_dir = ".") {
    using detail::as_bool;
    using detail::as_count;
    using detail::as_number;
    using detail::required;
    RunConfig c;
    detail::only_keys(doc, "", {"grid", "u0", "f", "f_inf", "f_star", "partition", "solver", "output", "checks"});

    const auto& grid = required(doc, "", "grid");
    detail::only_keys(grid, "grid", {"dim", "extents", "counts", "boundary"});
    c.dim = static_cast<int>(as_count(required(grid, "grid", "dim"), "grid.dim"));
    if (c.dim != 1 && c.dim != 2) {
        throw ConfigError("grid.dim: must be 1 or 2");
    }
    const auto axes = static_cast<std::size_t>(c.dim);
    const auto& ext = required(grid, "grid", "extents");
    const auto& cnt = required(grid, "grid", "counts");
    if (!ext.is_array() || ext.size() != axes) {
        throw ConfigError("grid.extents: expected " + std::to_string(axes) + " numbers");
    }
    if (!cnt.is_array() || cnt.size() != axes) {
        throw ConfigError("grid.counts: expected " + std::to_string(axes) + " integers");
    }
    for (std::size_t a = 0; a < axes; ++a) {
        c.extents.push_back(as_number(ext[a], "grid.extents[" + std::to_string(a) + "]"));
        c.counts.push_back(as_count(cnt[a], "grid.counts[" + std::to_string(a) + "]"));
    }
    c.boundary = BoundarySpec::all(BoundaryKind::Dirichlet);
    if (const auto it = grid.find("boundary"); it != grid.end()) {
        if (it->is_string()) {
            const BoundaryKind k = detail::boundary_kind(*it, "grid.boundary");
            c.boundary = BoundarySpec::all(k);
        } else if (c.dim == 1) {
            detail::only_keys(*it, "grid.boundary", {"left", "right"});
        } else {
            detail::only_keys(*it, "grid.boundary", {"left", "right", "bottom", "top"});
        }
        if (it->is_object()) {
            for (Face face : {Face::Left, Face::Right, Face::Bottom, Face::Top}) {
                if (const auto f = it->find(to_string(face)); f != it->end()) {
                    c.boundary[face] = detail::boundary_kind(*f, std::string("grid.boundary.") + to_string(face));
                }
            }
        }
    }
    if (c.dim == 1) {
        c.boundary[Face::Bottom] = c.boundary[Face::Top] = BoundaryKind::Dirichlet;
    }
    try {
        build_grid(c.dim, c.extents, c.counts, c.boundary);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }

    required(doc, "", "u0");
    required(doc, "", "f");
    c.u0 = detail::field_source(doc["u0"], "u0", base_dir, false);
    c.f = detail::field_source(doc["f"], "f", base_dir, true);
    for (auto [key, slot] : {std::pair{"f_inf", &c.f_inf}, std::pair{"f_star", &c.f_star}}) {
        if (const auto it = doc.find(key); it != doc.end()) {
            if (it->is_number()) {
                *it = format_double(as_number(*it, key));
            }
            *slot = detail::as_string(*it, key);
            detail::parse_at(**slot, key, false);
        }
    }

    const auto& part = required(doc, "", "partition");
    detail::only_keys(part, "partition", {"T", "m", "knots"});
    c.final_time = as_number(required(part, "partition", "T"), "partition.T");
    if (!(c.final_time > 0.0)) {
        throw ConfigError("partition.T: must be positive");
    }
    if (const auto it = part.find("knots"); it != part.end()) {
        if (!it->is_array()) {
            throw ConfigError("partition.knots: expected an array");
        }
        for (std::size_t k = 0; k < it->size(); ++k) {
            c.knots.push_back(as_number((*it)[k], "partition.knots[" + std::to_string(k) + "]"));
        }
        try {
            TimePartition::from_knots(c.knots);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("partition.knots: ") + e.what());
        }
        if (c.knots.back() != c.final_time) {
            throw ConfigError("partition.knots: last knot must equal partition.T");
        }
        c.steps = c.knots.size() - 1;
        if (const auto m = part.find("m"); m != part.end() && as_count(*m, "partition.m") != c.steps) {
            throw ConfigError("partition.m: disagrees with the number of knots");
        }
    } else {
        c.steps = as_count(required(part, "partition", "m"), "partition.m");
        if (c.steps == 0) {
            throw ConfigError("partition.m: must be at least 1");
        }
    }

    if (const auto it = doc.find("solver"); it != doc.end()) {
        detail::only_keys(*it, "solver", {"method", "tol", "max_iter", "omega", "simpson_intervals"});
        if (const auto v = it->find("method"); v != it->end()) {
            const std::string m = detail::as_string(*v, "solver.method");
            if (m != "psor" && m != "pdas") {
                throw ConfigError("solver.method: expected \"psor\" or \"pdas\"");
            }
            c.step.method = m == "psor" ? Method::Psor : Method::Pdas;
        }
        if (const auto v = it->find("tol"); v != it->end()) {
            c.step.solver.tol = as_number(*v, "solver.tol");
            if (!(c.step.solver.tol > 0.0)) throw ConfigError("solver.tol: must be positive");
        }
        if (const auto v = it->find("max_iter"); v != it->end()) {
            c.step.solver.max_iter = static_cast<int>(as_count(*v, "solver.max_iter"));
        }
        if (const auto v = it->find("omega"); v != it->end()) {
            c.step.solver.omega = as_number(*v, "solver.omega");
            if (!(c.step.solver.omega > 0.0 && c.step.solver.omega < 2.0)) {
                throw ConfigError("solver.omega: must lie in (0, 2)");
            }
        }
        if (const auto v = it->find("simpson_intervals"); v != it->end()) {
            const std::size_t n = as_count(*v, "solver.simpson_intervals");
            if (n < 4 || n % 2 != 0) {
                throw ConfigError("solver.simpson_intervals: must be even and at least 4");
            }
            c.step.simpson_intervals = static_cast<int>(n);
        }
    }

    if (const auto it = doc.find("output"); it != doc.end()) {
        detail::only_keys(*it, "output", {"dir", "stride"});
        if (const auto v = it->find("dir"); v != it->end()) {
            c.output_dir = detail::as_string(*v, "output.dir");
        }
        if (const auto v = it->find("stride"); v != it->end()) {
            c.stride = as_count(*v, "output.stride");
            if (c.stride == 0) throw ConfigError("output.stride: must be at least 1");
        }
    }

    c.checks.energy = c.checks.asymptotic = c.f_inf.has_value();
    c.checks.laplacian_bound = c.f_star.has_value();
    if (const auto it = doc.find("checks"); it != doc.end()) {
        detail::only_keys(*it, "checks", {"certificates", "complementarity", "dissipation", "energy",
                                          "laplacian_bound", "asymptotic", "tol", "asymptotic_tol"});
        auto toggle = [&](const char* key, bool& slot) {
            if (const auto v = it->find(key); v != it->end()) {
                slot = as_bool(*v, std::string("checks.") + key);
            }
        };
        toggle("certificates", c.checks.certificates);
        toggle("complementarity", c.checks.complementarity);
        toggle("dissipation", c.checks.dissipation);
        toggle("energy", c.checks.energy);
        toggle("laplacian_bound", c.checks.laplacian_bound);
        toggle("asymptotic", c.checks.asymptotic);
        if (const auto v = it->find("tol"); v != it->end()) {
            c.checks.tol = as_number(*v, "checks.tol");
        }
        if (const auto v = it->find("asymptotic_tol"); v != it->end()) {
            c.checks.asymptotic_tol = as_number(*v, "checks.asymptotic_tol");
        }
    }
    if ((c.checks.energy || c.checks.asymptotic) && !c.f_inf) {
        throw ConfigError(std::string(c.checks.energy ? "checks.energy" : "checks.asymptotic") +
                          ": requires f_inf");
    }
    if (c.checks.laplacian_bound && !c.f_star) {
        throw ConfigError("checks.laplacian_bound: requires f_star");
    }
    if (c.checks.asymptotic && !build_grid(c.dim, c.extents, c.counts, c.boundary).has_dirichlet()) {
        throw ConfigError("checks.asymptotic: the steady state needs a Dirichlet face");
    }
    c.source = std::move(doc);
    return c;
}

/**
 * Applies `key.path=value` to a configuration document. The value is read
 * as JSON when it parses, otherwise as a plain string.
 */
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "': expected key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) {
            throw ConfigError("override '" + assignment + "': empty key segment");
        }
        if (node->is_null()) {
            *node = nlohmann::json::object();
        }
        if (!node->is_object()) {
            throw ConfigError("override '" + assignment + "': " + key.substr(0, start - 1) + " is not an object");
        }
        node = &(*node)[part];
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    *node = std::move(value);
}

inline RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    nlohmann::json doc = read_json(path);
    for (const auto& o : overrides) {
        apply_override(doc, o);
    }
    try {
        return parse_config(std::move(doc), std::filesystem::absolute(path).parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// Everything a run needs, materialised on the grid.
struct PreparedRun {
    Grid grid;
    Field u0;
    Forcing forcing;
    TimePartition partition;
    std::optional<Field> f_inf;
    std::optional<Field> f_star;
    /// f ≤ f* held at every sampled node and knot (true when f* is absent).
    bool f_star_hypothesis = true;
    /// f ≤ f_∞ held at every sampled node and knot (true when f_∞ is absent).
    bool f_inf_hypothesis = true;
    std::vector<std::string> warnings;
};

inline Grid make_grid(const RunConfig& c) { return build_grid(c.dim, c.extents, c.counts, c.boundary); }

inline TimePartition make_partition(const RunConfig& c) {
    return c.knots.empty() ? TimePartition::uniform(c.final_time, c.steps) : TimePartition::from_knots(c.knots);
}

inline Forcing make_forcing(const RunConfig& c, const Grid& grid) {
    if (c.f.is_file()) {
        return Forcing::from_field(read_field_csv(c.f.file, grid));
    }
    return Forcing::from_expression(parse_expression(c.f.expression));
}

namespace detail {

inline Field sample_expression(const Grid& grid, const std::string& src, const std::string& name) {
    const Expression e = parse_expression(src);
    try {
        return sample(grid, [&](double x, double y) { return e.evaluate(x, y, 0.0); });
    } catch (const ExprEvalError& err) {
        throw ConfigError(name + ": " + err.what());
    }
}

/// Number of free nodes where f(·, t) > cap at some knot t.
inline std::size_t count_exceedances(const Forcing& f, const Grid& grid, const TimePartition& part,
                                     std::span<const double> cap) {
    std::vector<char> bad(grid.free_count(), 0);
    const std::size_t knots = f.time_independent() ? 1 : part.knots().size();
    for (std::size_t k = 0; k < knots; ++k) {
        const Field fk = f.at(grid, part.knot(k));
        for (std::size_t i = 0; i < fk.size(); ++i) {
            bad[i] = bad[i] || fk[i] > cap[i];
        }
    }
    return static_cast<std::size_t>(std::count(bad.begin(), bad.end(), 1));
}

inline std::string exceedance_warning(const std::string& what, std::size_t count, std::size_t total) {
    return "hypothesis " + what + " violated at " +
           (count == total ? std::string("all nodes") : std::to_string(count) + " of " + std::to_string(total) +
                                                            " nodes");
}

} // namespace detail

/**
 * Builds grid, data, and partition, and samples the forcing at every node and
 * knot against f* and f_∞. Violations become warnings rather than errors.
 */
inline PreparedRun prepare(const RunConfig& c) {
    PreparedRun p;
    p.grid = make_grid(c);
    p.partition = make_partition(c);
    p.u0 = c.u0.is_file() ? read_field_csv(c.u0.file, p.grid) : detail::sample_expression(p.grid, c.u0.expression, "u0");
    try {
        p.forcing = make_forcing(c, p.grid);
        p.forcing.at(p.grid, 0.0);
    } catch (const ExprEvalError& e) {
        throw ConfigError(std::string("f: ") + e.what());
    }
    const std::size_t n = p.grid.free_count();
    if (c.f_star) {
        p.f_star = detail::sample_expression(p.grid, *c.f_star, "f_star");
        const std::size_t bad = detail::count_exceedances(p.forcing, p.grid, p.partition, *p.f_star);
        p.f_star_hypothesis = bad == 0;
        if (bad > 0) {
            p.warnings.push_back(detail::exceedance_warning("f <= f_star", bad, n));
        }
    }
    if (c.f_inf) {
        p.f_inf = detail::sample_expression(p.grid, *c.f_inf, "f_inf");
        if (c.checks.asymptotic) {
            const std::size_t bad = detail::count_exceedances(p.forcing, p.grid, p.partition, *p.f_inf);
            p.f_inf_hypothesis = bad == 0;
            if (bad > 0) {
                p.warnings.push_back(detail::exceedance_warning("f <= f_inf", bad, n));
            }
        }
    }
    return p;
}

} // namespace unidiff
