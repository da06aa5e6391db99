#pragma once

#include "unidiff/obstacle.hpp"

#include <random>
#include <vector>

namespace unidiff::testing {

/// Random sparse symmetric M-matrix with strictly dominant diagonal.
inline SparseOperator random_m_matrix(std::size_t n, std::mt19937& rng, double density = 0.4) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Triplet> entries;
    std::vector<double> diag(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (unit(rng) < density) {
                const double a = 0.1 + 0.9 * unit(rng);
                entries.push_back({i, j, -a});
                entries.push_back({j, i, -a});
                diag[i] += a;
                diag[j] += a;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        entries.push_back({i, i, diag[i] + 0.1 + unit(rng)});
    }
    return SparseOperator::from_triplets(n, std::move(entries));
}

inline Field random_field(std::size_t n, std::mt19937& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    Field f(n);
    for (auto& x : f) x = d(rng);
    return f;
}

inline ObstacleProblem random_problem(std::size_t n, std::mt19937& rng) {
    SparseOperator A = random_m_matrix(n, rng);
    return make_obstacle_problem(std::move(A), random_field(n, rng, -2.0, 2.0), random_field(n, rng, -1.0, 1.0));
}

inline double max_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace unidiff::testing
