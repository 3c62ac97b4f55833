#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "topodetect/induced_graph.hpp"

namespace topodetect {

// One step of the descending-weight filtration: either a vertex entering at
// `value` or the edge at `edge_index` (into Filtration::edges).
struct FiltrationStep {
    bool is_edge = false;
    double value = 0.0;
    VertexId vertex = 0;
    std::uint32_t edge_index = 0;
};

struct Filtration {
    std::vector<FiltrationStep> steps;
    std::vector<InducedEdge> edges; // sorted by (weight desc, src asc, dst asc)
    std::vector<VertexId> vertices; // in entry order
    double omega = 0.0;
    double min_weight = 0.0;
};

// Orders simplices from largest to smallest edge weight. Each vertex enters at
// the weight of its heaviest incident edge, immediately before that edge; ties
// between edges break by (weight desc, src asc, dst asc).
inline Filtration build_filtration(const InducedGraph& graph) {
    if (graph.edges.empty()) throw std::invalid_argument("build_filtration: empty graph");
    Filtration filt;
    filt.edges = graph.edges;
    std::sort(filt.edges.begin(), filt.edges.end(),
              [](const InducedEdge& a, const InducedEdge& b) {
                  if (a.weight != b.weight) return a.weight > b.weight;
                  if (a.src != b.src) return a.src < b.src;
                  return a.dst < b.dst;
              });
    filt.omega = filt.edges.front().weight;
    filt.min_weight = filt.edges.back().weight;
    filt.steps.reserve(filt.edges.size() * 3);
    std::unordered_set<VertexId> seen;
    seen.reserve(graph.vertices.size() * 2);
    for (std::uint32_t i = 0; i < filt.edges.size(); ++i) {
        const InducedEdge& e = filt.edges[i];
        for (VertexId v : {e.src, e.dst}) {
            if (seen.insert(v).second) {
                filt.steps.push_back({false, e.weight, v, 0});
                filt.vertices.push_back(v);
            }
        }
        filt.steps.push_back({true, e.weight, 0, i});
    }
    return filt;
}

} // namespace topodetect
