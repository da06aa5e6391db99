#pragma once

#include "unidiff/errors.hpp"
#include "unidiff/sparse.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace unidiff {

enum class BoundaryKind { Dirichlet, Neumann };

enum class NodeClass { Interior, DirichletBoundary, NeumannBoundary };

/// Faces of the box. 1D grids use only Left (x = 0) and Right (x = L).
enum class Face { Left = 0, Right = 1, Bottom = 2, Top = 3 };

struct BoundarySpec {
    std::array<BoundaryKind, 4> faces{BoundaryKind::Dirichlet, BoundaryKind::Dirichlet,
                                      BoundaryKind::Dirichlet, BoundaryKind::Dirichlet};

    static BoundarySpec all(BoundaryKind kind) { return {{kind, kind, kind, kind}}; }

    BoundaryKind operator[](Face f) const { return faces[static_cast<std::size_t>(f)]; }
    BoundaryKind& operator[](Face f) { return faces[static_cast<std::size_t>(f)]; }

    friend bool operator==(const BoundarySpec&, const BoundarySpec&) = default;
};

inline const char* to_string(BoundaryKind k) {
    return k == BoundaryKind::Dirichlet ? "dirichlet" : "neumann";
}

inline const char* to_string(Face f) {
    switch (f) {
    case Face::Left: return "left";
    case Face::Right: return "right";
    case Face::Bottom: return "bottom";
    case Face::Top: return "top";
    }
    return "?";
}

/**
 * Uniform vertex-centred grid on [0, Lx] or [0, Lx] x [0, Ly].
 *
 * Nodes are numbered lexicographically with x fastest. Dirichlet nodes carry
 * the homogeneous value 0 and are removed from the unknown vector; every other
 * node gets a contiguous free index. A corner touching any Dirichlet face is
 * Dirichlet.
 *
 * The discrete L2 product is (u, v)_h = h^dim * sum_i w_i u_i v_i with
 * w_i = 1/2 per axis on which the node sits at a (Neumann) end.
 */
class Grid {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    Grid() = default;

    int dim() const noexcept { return dim_; }
    double extent(int axis) const { return extent_.at(static_cast<std::size_t>(axis)); }
    std::size_t count(int axis) const { return count_.at(static_cast<std::size_t>(axis)); }
    double spacing(int axis) const { return spacing_.at(static_cast<std::size_t>(axis)); }
    const BoundarySpec& boundary() const noexcept { return boundary_; }

    std::size_t node_count() const noexcept { return node_class_.size(); }
    std::size_t free_count() const noexcept { return free_nodes_.size(); }
    bool has_dirichlet() const noexcept { return free_count() < node_count(); }

    NodeClass node_class(std::size_t node) const { return node_class_.at(node); }

    /// Free index of a node, or `npos` for Dirichlet nodes.
    std::size_t free_index(std::size_t node) const { return free_index_.at(node); }
    std::size_t node_of(std::size_t free) const { return free_nodes_.at(free); }

    std::array<std::size_t, 2> ij(std::size_t node) const {
        return {node % count_[0], node / count_[0]};
    }

    std::array<double, 2> coordinates(std::size_t node) const {
        const auto [i, j] = ij(node);
        const double x = static_cast<double>(i) * extent_[0] / static_cast<double>(count_[0] - 1);
        const double y = dim_ == 2
                             ? static_cast<double>(j) * extent_[1] / static_cast<double>(count_[1] - 1)
                             : 0.0;
        return {x, y};
    }

    std::array<double, 2> free_coordinates(std::size_t free) const { return coordinates(node_of(free)); }

    /// Boundary weight w_i of a free unknown (1, 1/2 or 1/4).
    double weight(std::size_t free) const { return weights_.at(free); }
    std::span<const double> weights() const noexcept { return weights_; }

    /// h^dim.
    double cell_volume() const noexcept {
        return dim_ == 2 ? spacing_[0] * spacing_[1] : spacing_[0];
    }

    double inner(std::span<const double> u, std::span<const double> v) const {
        check_field(u);
        check_field(v);
        double s = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) {
            s += weights_[k] * u[k] * v[k];
        }
        return cell_volume() * s;
    }

    double norm(std::span<const double> u) const { return std::sqrt(inner(u, u)); }

    void check_field(std::span<const double> u) const {
        if (u.size() != free_count()) {
            throw DimensionError("field has " + std::to_string(u.size()) + " values, grid has " +
                                 std::to_string(free_count()) + " unknowns");
        }
    }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.dim_ == b.dim_ && a.extent_ == b.extent_ && a.count_ == b.count_ &&
               a.boundary_ == b.boundary_;
    }

    friend Grid build_grid(int dim, std::span<const double> extents,
                           std::span<const std::size_t> counts, const BoundarySpec& boundary);

private:
    int dim_ = 1;
    std::array<double, 2> extent_{1.0, 0.0};
    std::array<std::size_t, 2> count_{1, 1};
    std::array<double, 2> spacing_{1.0, 0.0};
    BoundarySpec boundary_;
    std::vector<NodeClass> node_class_;
    std::vector<std::size_t> free_index_;
    std::vector<std::size_t> free_nodes_;
    std::vector<double> weights_;
};

inline Grid build_grid(int dim, std::span<const double> extents, std::span<const std::size_t> counts,
                       const BoundarySpec& boundary) {
    if (dim != 1 && dim != 2) {
        throw ConfigError("grid dimension must be 1 or 2, got " + std::to_string(dim));
    }
    const auto axes = static_cast<std::size_t>(dim);
    if (extents.size() != axes || counts.size() != axes) {
        throw ConfigError("grid needs exactly " + std::to_string(dim) + " extents and counts");
    }
    Grid g;
    g.dim_ = dim;
    g.boundary_ = boundary;
    for (std::size_t a = 0; a < axes; ++a) {
        if (!(std::isfinite(extents[a]) && extents[a] > 0.0)) {
            throw ConfigError("grid extent must be positive and finite on axis " + std::to_string(a));
        }
        if (counts[a] < 3) {
            throw ConfigError("grid needs at least 3 nodes on axis " + std::to_string(a));
        }
        g.extent_[a] = extents[a];
        g.count_[a] = counts[a];
        g.spacing_[a] = extents[a] / static_cast<double>(counts[a] - 1);
    }
    const std::size_t nx = g.count_[0];
    const std::size_t ny = dim == 2 ? g.count_[1] : 1;

    g.node_class_.resize(nx * ny);
    g.free_index_.assign(nx * ny, Grid::npos);
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            bool on_boundary = false;
            bool dirichlet = false;
            auto touch = [&](Face f) {
                on_boundary = true;
                dirichlet = dirichlet || boundary[f] == BoundaryKind::Dirichlet;
            };
            if (i == 0) touch(Face::Left);
            if (i == nx - 1) touch(Face::Right);
            if (dim == 2 && j == 0) touch(Face::Bottom);
            if (dim == 2 && j == ny - 1) touch(Face::Top);

            const std::size_t node = j * nx + i;
            g.node_class_[node] = !on_boundary ? NodeClass::Interior
                                  : dirichlet  ? NodeClass::DirichletBoundary
                                               : NodeClass::NeumannBoundary;
            if (!dirichlet) {
                g.free_index_[node] = g.free_nodes_.size();
                g.free_nodes_.push_back(node);
                const double wx = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
                const double wy = (dim == 2 && (j == 0 || j == ny - 1)) ? 0.5 : 1.0;
                g.weights_.push_back(wx * wy);
            }
        }
    }
    return g;
}

inline Grid build_grid(int dim, std::initializer_list<double> extents,
                       std::initializer_list<std::size_t> counts, const BoundarySpec& boundary) {
    return build_grid(dim, std::span<const double>(extents.begin(), extents.size()),
                      std::span<const std::size_t>(counts.begin(), counts.size()), boundary);
}

/**
 * Symmetric form of -Δ_h: row i of the mirror-ghost stencil scaled by w_i.
 *
 * Assembled edge by edge: the edge between neighbours along an axis with
 * spacing h carries c = w_perp / h^2, where w_perp is the boundary weight of
 * the edge along the other axis. Each edge adds c to both diagonals and -c to
 * both off-diagonals; an edge to a Dirichlet node only adds to the diagonal
 * and to the row sum. The true operator is -Δ_h = W^{-1} L.
 */
inline SparseOperator assemble_laplacian(const Grid& grid) {
    const std::size_t n = grid.free_count();
    const std::size_t nx = grid.count(0);
    const std::size_t ny = grid.dim() == 2 ? grid.count(1) : 1;

    std::vector<Triplet> entries;
    entries.reserve(5 * n);
    std::vector<double> dirichlet_sum(n, 0.0);

    auto add_edge = [&](std::size_t a, std::size_t b, double c) {
        const std::size_t fa = grid.free_index(a);
        const std::size_t fb = grid.free_index(b);
        if (fa != Grid::npos) entries.push_back({fa, fa, c});
        if (fb != Grid::npos) entries.push_back({fb, fb, c});
        if (fa != Grid::npos && fb != Grid::npos) {
            entries.push_back({fa, fb, -c});
            entries.push_back({fb, fa, -c});
        } else if (fa != Grid::npos) {
            dirichlet_sum[fa] += c;
        } else if (fb != Grid::npos) {
            dirichlet_sum[fb] += c;
        }
    };

    const double hx2 = grid.spacing(0) * grid.spacing(0);
    for (std::size_t j = 0; j < ny; ++j) {
        const double wy = (grid.dim() == 2 && (j == 0 || j == ny - 1)) ? 0.5 : 1.0;
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            add_edge(j * nx + i, j * nx + i + 1, wy / hx2);
        }
    }
    if (grid.dim() == 2) {
        const double hy2 = grid.spacing(1) * grid.spacing(1);
        for (std::size_t j = 0; j + 1 < ny; ++j) {
            for (std::size_t i = 0; i < nx; ++i) {
                const double wx = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
                add_edge(j * nx + i, (j + 1) * nx + i, wx / hy2);
            }
        }
    }

    SparseOperator merged = SparseOperator::from_triplets(n, std::move(entries));
    // Replace the summed row totals by the exact Dirichlet surplus; interior
    // and Neumann rows then annihilate constants exactly.
    std::vector<std::size_t> row_ptr(merged.row_ptr().begin(), merged.row_ptr().end());
    std::vector<std::size_t> cols(merged.cols().begin(), merged.cols().end());
    std::vector<double> vals(merged.values().begin(), merged.values().end());
    return SparseOperator::from_csr(n, std::move(row_ptr), std::move(cols), std::move(vals),
                                    std::move(dirichlet_sum));
}

/// Returns L + sigma * diag(w) for a grid operator L.
inline SparseOperator shift_operator(const SparseOperator& laplacian, double sigma,
                                     std::span<const double> weights) {
    std::vector<double> d(weights.begin(), weights.end());
    for (double& x : d) {
        x *= sigma;
    }
    return laplacian.plus_diagonal(d);
}

/**
 * A_σ = σ W + L, the symmetric form of σ I - Δ_h. Equals σ I + L on grids
 * without Neumann nodes.
 */
inline SparseOperator assemble_A_sigma(const Grid& grid, double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw ConfigError("sigma must be finite and non-negative");
    }
    if (sigma == 0.0 && !grid.has_dirichlet()) {
        throw CoercivityError("sigma = 0 requires at least one Dirichlet node");
    }
    return shift_operator(assemble_laplacian(grid), sigma, grid.weights());
}

/// -Δ_h u = W^{-1} L u.
inline Field neg_laplacian(const Grid& grid, const SparseOperator& laplacian, std::span<const double> u) {
    Field y = laplacian.apply(u);
    for (std::size_t k = 0; k < y.size(); ++k) {
        y[k] /= grid.weight(k);
    }
    return y;
}

/// φ_h(v) = ½ (-Δ_h v, v)_h.
inline double dirichlet_energy(const Grid& grid, const SparseOperator& laplacian, std::span<const double> v) {
    return 0.5 * grid.cell_volume() * laplacian.quadratic_form(v);
}

/// Samples g(x, y) at the free nodes.
template <typename Fn>
Field sample(const Grid& grid, Fn&& g) {
    Field out(grid.free_count());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const auto [x, y] = grid.free_coordinates(k);
        out[k] = g(x, y);
    }
    return out;
}

} // namespace unidiff
