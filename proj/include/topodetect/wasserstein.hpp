#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "topodetect/persistence.hpp"

namespace topodetect {

namespace detail {

// Exact minimum-cost perfect matching on a dense square cost matrix
// (Hungarian algorithm with potentials, O(n^3)).
inline double solve_assignment(const std::vector<double>& cost, std::size_t n) {
    if (n == 0) return 0.0;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) total += cost[(match[j] - 1) * n + (j - 1)];
    return total;
}

} // namespace detail

struct WassersteinParams {
    double p = 2.0; // outer exponent of the matching cost sum
    double q = 2.0; // ground metric exponent in the (birth, death) plane
    int dimension = 0;
};

// L_q distance between two diagram points in the (b,d) plane.
inline double ground_distance(const DiagramPoint& a, const DiagramPoint& b, double q) {
    const double db = std::fabs(a.birth - b.birth);
    const double dd = std::fabs(a.death - b.death);
    return std::pow(std::pow(db, q) + std::pow(dd, q), 1.0 / q);
}

// L_q distance from a point to its diagonal projection ((b+d)/2, (b+d)/2).
inline double diagonal_distance(const DiagramPoint& a, double q) {
    const double half = std::fabs(a.birth - a.death) / 2.0;
    return half * std::pow(2.0, 1.0 / q);
}

// W_p distance between two diagrams: exact optimal matching where unmatched
// points pair with their diagonal projection. Points already on the diagonal
// carry zero optimal cost and are skipped before solving.
inline double wasserstein_distance(const PersistenceDiagram& x_diagram,
                                   const PersistenceDiagram& d_diagram,
                                   const WassersteinParams& params = {}) {
    if (params.p < 1.0 || !std::isfinite(params.p))
        throw std::invalid_argument("wasserstein_distance: p must be finite and >= 1");
    if (params.q < 1.0 || !std::isfinite(params.q))
        throw std::invalid_argument("wasserstein_distance: q must be finite and >= 1");
    std::vector<DiagramPoint> xs, ds;
    for (const DiagramPoint& p : x_diagram.points)
        if (p.dimension == params.dimension && p.birth != p.death) xs.push_back(p);
    for (const DiagramPoint& p : d_diagram.points)
        if (p.dimension == params.dimension && p.birth != p.death) ds.push_back(p);
    const std::size_t n = xs.size();
    const std::size_t m = ds.size();
    if (n == 0 && m == 0) return 0.0;

    // Augmented square instance: each side gains one interchangeable diagonal
    // slot per point of the other side; slot-to-slot pairs cost nothing.
    const std::size_t size = n + m;
    std::vector<double> cost(size * size, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double diag = std::pow(diagonal_distance(xs[i], params.q), params.p);
        for (std::size_t j = 0; j < m; ++j)
            cost[i * size + j] = std::pow(ground_distance(xs[i], ds[j], params.q), params.p);
        for (std::size_t j = m; j < size; ++j) cost[i * size + j] = diag;
    }
    for (std::size_t i = n; i < size; ++i) {
        for (std::size_t j = 0; j < m; ++j)
            cost[i * size + j] = std::pow(diagonal_distance(ds[j], params.q), params.p);
    }
    const double total = detail::solve_assignment(cost, size);
    return std::pow(total, 1.0 / params.p);
}

} // namespace topodetect
