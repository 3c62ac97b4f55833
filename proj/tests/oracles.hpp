#pragma once

// Independent oracles used by the test suites. Everything here deliberately
// avoids the library's own algorithms: component counting is BFS-based, the
// diagram oracle works from persistent Betti numbers over threshold sweeps,
// and the matching oracle enumerates every bijection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "topodetect/induced_graph.hpp"
#include "topodetect/network.hpp"
#include "topodetect/persistence.hpp"
#include "topodetect/rng.hpp"
#include "topodetect/tensor.hpp"

namespace oracles {

using topodetect::InducedEdge;
using topodetect::InducedGraph;
using topodetect::VertexId;

// --------------------------------------------------------------------------
// Threshold-sweep H0 oracle
// --------------------------------------------------------------------------

// Number of connected components of the subgraph with edges of weight >= t,
// restricted to endpoints of such edges; BFS, no union-find.
inline std::size_t components_at_threshold(const InducedGraph& graph, double t,
                                           std::size_t* vertex_count = nullptr) {
    std::map<VertexId, std::vector<VertexId>> adjacency;
    for (const InducedEdge& e : graph.edges) {
        if (e.weight < t) continue;
        adjacency[e.src].push_back(e.dst);
        adjacency[e.dst].push_back(e.src);
    }
    if (vertex_count) *vertex_count = adjacency.size();
    std::set<VertexId> visited;
    std::size_t components = 0;
    for (const auto& [start, _] : adjacency) {
        if (visited.count(start)) continue;
        ++components;
        std::queue<VertexId> frontier;
        frontier.push(start);
        visited.insert(start);
        while (!frontier.empty()) {
            const VertexId v = frontier.front();
            frontier.pop();
            for (VertexId n : adjacency.at(v))
                if (visited.insert(n).second) frontier.push(n);
        }
    }
    return components;
}

// Components of the level-t subgraph that contain at least one vertex present
// at level s (s >= t, i.e. the image rank of H0(K_s) -> H0(K_t)).
inline std::size_t persistent_rank(const InducedGraph& graph, double s, double t) {
    std::map<VertexId, std::vector<VertexId>> adjacency;
    std::set<VertexId> early;
    for (const InducedEdge& e : graph.edges) {
        if (e.weight >= t) {
            adjacency[e.src].push_back(e.dst);
            adjacency[e.dst].push_back(e.src);
        }
        if (e.weight >= s) {
            early.insert(e.src);
            early.insert(e.dst);
        }
    }
    std::set<VertexId> visited;
    std::size_t rank = 0;
    for (const auto& [start, _] : adjacency) {
        if (visited.count(start)) continue;
        bool touches_early = false;
        std::queue<VertexId> frontier;
        frontier.push(start);
        visited.insert(start);
        while (!frontier.empty()) {
            const VertexId v = frontier.front();
            frontier.pop();
            if (early.count(v)) touches_early = true;
            for (VertexId n : adjacency.at(v))
                if (visited.insert(n).second) frontier.push(n);
        }
        if (touches_early) ++rank;
    }
    return rank;
}

// Full dim-0 diagram multiset via inclusion-exclusion on persistent ranks,
// including the zero-lifetime pairs that the level sweep cannot see directly:
// at each level, every entering vertex births a class, and entrants that are
// not visible as new components die instantly.
inline std::vector<std::pair<double, double>> h0_diagram_oracle(const InducedGraph& graph) {
    std::vector<double> levels;
    for (const InducedEdge& e : graph.edges) levels.push_back(e.weight);
    std::sort(levels.begin(), levels.end(), std::greater<>());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    const std::size_t m = levels.size();
    const double min_weight = levels.back();

    std::vector<std::pair<double, double>> points;
    std::vector<std::size_t> component_count(m, 0), vertex_count(m, 0);
    for (std::size_t k = 0; k < m; ++k)
        component_count[k] = components_at_threshold(graph, levels[k], &vertex_count[k]);

    // beta[k][l]: rank of H0(K_k) -> H0(K_l) for k <= l, 1-based on levels.
    auto beta = [&](std::ptrdiff_t k, std::ptrdiff_t l) -> std::size_t {
        if (k < 0) return 0; // K_{-1} is empty
        return persistent_rank(graph, levels[static_cast<std::size_t>(k)],
                               levels[static_cast<std::size_t>(l)]);
    };

    auto sbeta = [&](std::ptrdiff_t k, std::ptrdiff_t l) {
        return static_cast<std::ptrdiff_t>(beta(k, l));
    };
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(m); ++k) {
        // Finite deaths at level l > k.
        for (std::ptrdiff_t l = k + 1; l < static_cast<std::ptrdiff_t>(m); ++l) {
            const std::ptrdiff_t multiplicity = (sbeta(k, l - 1) - sbeta(k, l)) -
                                                (sbeta(k - 1, l - 1) - sbeta(k - 1, l));
            for (std::ptrdiff_t i = 0; i < multiplicity; ++i)
                points.emplace_back(levels[k], levels[l]);
        }
        // Essential classes born at level k, truncated to the final level.
        const std::ptrdiff_t essential =
            sbeta(k, static_cast<std::ptrdiff_t>(m) - 1) -
            sbeta(k - 1, static_cast<std::ptrdiff_t>(m) - 1);
        for (std::ptrdiff_t i = 0; i < essential; ++i)
            points.emplace_back(levels[k], min_weight);
        // Zero-lifetime pairs: entrants minus newly visible components.
        const std::ptrdiff_t entered =
            static_cast<std::ptrdiff_t>(vertex_count[k]) -
            (k == 0 ? 0 : static_cast<std::ptrdiff_t>(vertex_count[k - 1]));
        const std::ptrdiff_t newborn =
            static_cast<std::ptrdiff_t>(component_count[k]) - (k == 0 ? 0 : sbeta(k - 1, k));
        for (std::ptrdiff_t i = 0; i < entered - newborn; ++i)
            points.emplace_back(levels[k], levels[k]);
    }
    std::sort(points.begin(), points.end());
    return points;
}

inline std::vector<std::pair<double, double>> diagram_to_multiset(
    const topodetect::PersistenceDiagram& diagram, int dimension) {
    std::vector<std::pair<double, double>> points;
    for (const topodetect::DiagramPoint& p : diagram.points)
        if (p.dimension == dimension) points.emplace_back(p.birth, p.death);
    std::sort(points.begin(), points.end());
    return points;
}

// --------------------------------------------------------------------------
// Random graphs
// --------------------------------------------------------------------------

// Connected-ish random undirected graph with distinct weights; vertex ids are
// shuffled so they do not follow insertion order.
inline InducedGraph random_graph(topodetect::Rng& rng, std::size_t max_vertices = 12,
                                 bool distinct_weights = true) {
    const std::size_t n = 2 + rng.below(max_vertices - 1);
    std::vector<std::pair<VertexId, VertexId>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            pairs.emplace_back(static_cast<VertexId>(i), static_cast<VertexId>(j));
    rng.shuffle(pairs);
    const std::size_t edge_count = 1 + rng.below(pairs.size());
    std::vector<double> weights;
    for (std::size_t i = 0; i < edge_count; ++i) {
        double w = 0.25 + rng.uniform() * 10.0;
        if (!distinct_weights && i > 0 && rng.below(3) == 0) w = weights[rng.below(i)];
        weights.push_back(w);
    }
    if (distinct_weights) {
        std::sort(weights.begin(), weights.end());
        for (std::size_t i = 1; i < weights.size(); ++i)
            if (weights[i] <= weights[i - 1]) weights[i] = weights[i - 1] + 1e-3;
        rng.shuffle(weights);
    }
    InducedGraph graph;
    for (std::size_t i = 0; i < edge_count; ++i)
        graph.edges.push_back({pairs[i].first, pairs[i].second, weights[i], 0});
    graph.omega = graph.edges.front().weight;
    graph.min_weight = graph.edges.front().weight;
    for (const InducedEdge& e : graph.edges) {
        graph.vertices.push_back(e.src);
        graph.vertices.push_back(e.dst);
        graph.omega = std::max(graph.omega, e.weight);
        graph.min_weight = std::min(graph.min_weight, e.weight);
    }
    std::sort(graph.vertices.begin(), graph.vertices.end());
    graph.vertices.erase(std::unique(graph.vertices.begin(), graph.vertices.end()),
                         graph.vertices.end());
    return graph;
}

// --------------------------------------------------------------------------
// Brute-force Wasserstein matching
// --------------------------------------------------------------------------

inline double lq_distance(const topodetect::DiagramPoint& a, const topodetect::DiagramPoint& b,
                          double q) {
    return std::pow(std::pow(std::fabs(a.birth - b.birth), q) +
                        std::pow(std::fabs(a.death - b.death), q),
                    1.0 / q);
}

inline double diag_cost(const topodetect::DiagramPoint& a, double q, double p) {
    return std::pow(std::fabs(a.birth - a.death) / 2.0 * std::pow(2.0, 1.0 / q), p);
}

inline double brute_force_wasserstein(const std::vector<topodetect::DiagramPoint>& xs,
                                      const std::vector<topodetect::DiagramPoint>& ds,
                                      double p = 2.0, double q = 2.0) {
    std::vector<char> used(ds.size(), 0);
    double best = std::numeric_limits<double>::infinity();
    // Recursively assign each X point to an unused D point or the diagonal;
    // leftover D points go to the diagonal.
    auto recurse = [&](auto&& self, std::size_t i, double acc) -> void {
        if (acc >= best) return;
        if (i == xs.size()) {
            double total = acc;
            for (std::size_t j = 0; j < ds.size(); ++j)
                if (!used[j]) total += diag_cost(ds[j], q, p);
            best = std::min(best, total);
            return;
        }
        for (std::size_t j = 0; j < ds.size(); ++j) {
            if (used[j]) continue;
            used[j] = 1;
            self(self, i + 1, acc + std::pow(lq_distance(xs[i], ds[j], q), p));
            used[j] = 0;
        }
        self(self, i + 1, acc + diag_cost(xs[i], q, p));
    };
    recurse(recurse, 0, 0.0);
    return std::pow(best, 1.0 / p);
}

// --------------------------------------------------------------------------
// Finite differences
// --------------------------------------------------------------------------

template <typename LossFn>
inline topodetect::Tensor finite_difference_gradient(const topodetect::Tensor& input,
                                                     LossFn&& loss, double step = 1e-5) {
    topodetect::Tensor grad(input.shape);
    topodetect::Tensor probe = input;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double saved = probe.data[i];
        probe.data[i] = saved + step;
        const double up = loss(probe);
        probe.data[i] = saved - step;
        const double down = loss(probe);
        probe.data[i] = saved;
        grad.data[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

// Random small model for gradient checks; rejects configurations whose
// pre-activations sit within `margin` of a ReLU kink, where central
// differences are invalid.
struct SmallModelCase {
    topodetect::NetworkModel model;
    topodetect::Tensor input;
};

inline SmallModelCase random_small_model(topodetect::Rng& rng, double margin = 1e-3) {
    using namespace topodetect;
    for (int attempt = 0; attempt < 200; ++attempt) {
        const std::size_t h = 3 + rng.below(4);
        const std::size_t w = 3 + rng.below(4);
        std::vector<LayerSpec> specs;
        const bool with_conv = rng.below(2) == 0;
        std::size_t flat = h * w;
        if (with_conv) {
            const std::size_t filters = 1 + rng.below(3);
            const std::size_t k = 1 + 2 * rng.below(2); // 1 or 3
            specs.push_back(LayerSpec::conv(filters, k, 1, Activation::ReLU));
            flat = filters * h * w;
        }
        const std::size_t hidden = 4 + rng.below(6);
        specs.push_back(LayerSpec::fully_connected(flat, hidden, Activation::ReLU));
        specs.push_back(LayerSpec::fully_connected(hidden, 3, Activation::None));
        NetworkModel model = make_network(h, w, specs, rng, 0.4);
        Tensor input({h, w});
        for (double& v : input.data) v = rng.uniform();
        const ForwardTrace trace = forward(model, input);
        bool near_kink = false;
        for (std::size_t l = 0; l + 1 < model.layers.size() && !near_kink; ++l)
            for (double v : trace.pre_activations[l].data)
                if (std::fabs(v) < margin) {
                    near_kink = true;
                    break;
                }
        // Any near-tied pair of logits would put the attack hinge near a kink.
        for (std::size_t i = 0; i < trace.logits.size() && !near_kink; ++i)
            for (std::size_t j = i + 1; j < trace.logits.size(); ++j)
                if (std::fabs(trace.logits[i] - trace.logits[j]) < margin) {
                    near_kink = true;
                    break;
                }
        if (near_kink) continue;
        return {std::move(model), std::move(input)};
    }
    throw std::runtime_error("random_small_model: rejection sampling failed");
}

} // namespace oracles
