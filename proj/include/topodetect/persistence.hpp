#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "topodetect/filtration.hpp"
#include "topodetect/induced_graph.hpp"
#include "topodetect/stats.hpp"

namespace topodetect {

struct DiagramPoint {
    double birth = 0.0;
    double death = 0.0;
    int dimension = 0;
    std::int32_t generator_id = -1; // index into the generator table; -1 for dim 1
    double lifetime() const { return birth - death; }
};

// The subgraph a dim-0 point corresponds to: every vertex merged into the
// component while it was alive plus all processed edges internal to that set.
struct GeneratorSubgraph {
    std::vector<VertexId> vertices;
    std::vector<InducedEdge> edges;
    double birth = 0.0;
    double death = 0.0;
};

struct PersistenceDiagram {
    std::vector<DiagramPoint> points;
    double omega = 0.0;
    double min_weight = 0.0;
};

struct PersistenceResult {
    PersistenceDiagram diagram;
    std::vector<GeneratorSubgraph> generators; // parallel to dim-0 generator ids
};

namespace detail {

// Union-find over dense vertex slots with per-root component bookkeeping.
struct ComponentForest {
    std::vector<std::uint32_t> parent;
    struct RootData {
        double birth = 0.0;
        VertexId representative = 0; // smallest vertex id in the component
        std::vector<VertexId> members;
        std::vector<std::uint32_t> edge_indices;
    };
    std::vector<RootData> data; // indexed by dense slot, valid at roots only

    std::uint32_t find(std::uint32_t v) {
        std::uint32_t root = v;
        while (parent[root] != root) root = parent[root];
        while (parent[v] != root) {
            const std::uint32_t next = parent[v];
            parent[v] = root;
            v = next;
        }
        return root;
    }
};

} // namespace detail

// Runs the descending filtration once, producing dim-0 pairs with generator
// subgraphs (union-find, elder rule) and dim-1 cycle births. Feed-forward
// layered graphs contain no triangles, so no 2-simplices are ever formed and
// every cycle class survives to the truncated death min_weight.
inline PersistenceResult compute_persistence(const Filtration& filt) {
    PersistenceResult result;
    result.diagram.omega = filt.omega;
    result.diagram.min_weight = filt.min_weight;

    std::unordered_map<VertexId, std::uint32_t> slot_of;
    slot_of.reserve(filt.vertices.size() * 2);
    for (std::uint32_t i = 0; i < filt.vertices.size(); ++i) slot_of[filt.vertices[i]] = i;

    detail::ComponentForest forest;
    forest.parent.resize(filt.vertices.size());
    forest.data.resize(filt.vertices.size());

    std::vector<DiagramPoint> dim0;
    std::vector<DiagramPoint> dim1;

    for (const FiltrationStep& step : filt.steps) {
        if (!step.is_edge) {
            const std::uint32_t slot = slot_of.at(step.vertex);
            forest.parent[slot] = slot;
            auto& root = forest.data[slot];
            root.birth = step.value;
            root.representative = step.vertex;
            root.members = {step.vertex};
            root.edge_indices.clear();
            continue;
        }
        const InducedEdge& edge = filt.edges[step.edge_index];
        const std::uint32_t ra = forest.find(slot_of.at(edge.src));
        const std::uint32_t rb = forest.find(slot_of.at(edge.dst));
        if (ra == rb) {
            // Cycle: a dim-1 class is born and never filled in.
            dim1.push_back({edge.weight, filt.min_weight, 1, -1});
            forest.data[ra].edge_indices.push_back(step.edge_index);
            continue;
        }
        auto& a = forest.data[ra];
        auto& b = forest.data[rb];
        // Elder rule: the component with the smaller birth dies; on equal
        // births the one with the larger representative id dies.
        const bool a_dies =
            a.birth < b.birth || (a.birth == b.birth && a.representative > b.representative);
        const std::uint32_t dying = a_dies ? ra : rb;
        const std::uint32_t surviving = a_dies ? rb : ra;
        auto& dead = forest.data[dying];
        auto& alive = forest.data[surviving];

        GeneratorSubgraph gen;
        gen.vertices = dead.members;
        gen.edges.reserve(dead.edge_indices.size());
        for (std::uint32_t ei : dead.edge_indices) gen.edges.push_back(filt.edges[ei]);
        gen.birth = dead.birth;
        gen.death = edge.weight;
        dim0.push_back({dead.birth, edge.weight, 0,
                        static_cast<std::int32_t>(result.generators.size())});
        result.generators.push_back(std::move(gen));

        forest.parent[dying] = surviving;
        alive.representative = std::min(alive.representative, dead.representative);
        alive.members.insert(alive.members.end(), dead.members.begin(), dead.members.end());
        alive.edge_indices.insert(alive.edge_indices.end(), dead.edge_indices.begin(),
                                  dead.edge_indices.end());
        alive.edge_indices.push_back(step.edge_index);
        dead.members.clear();
        dead.members.shrink_to_fit();
        dead.edge_indices.clear();
        dead.edge_indices.shrink_to_fit();
    }

    // Components that never merge die at the end of the filtration and are
    // truncated to min_weight.
    std::vector<std::uint32_t> roots;
    for (std::uint32_t i = 0; i < forest.parent.size(); ++i)
        if (forest.find(i) == i) roots.push_back(i);
    std::sort(roots.begin(), roots.end(), [&](std::uint32_t x, std::uint32_t y) {
        return forest.data[x].representative < forest.data[y].representative;
    });
    for (std::uint32_t r : roots) {
        auto& root = forest.data[r];
        GeneratorSubgraph gen;
        gen.vertices = std::move(root.members);
        gen.edges.reserve(root.edge_indices.size());
        for (std::uint32_t ei : root.edge_indices) gen.edges.push_back(filt.edges[ei]);
        gen.birth = root.birth;
        gen.death = filt.min_weight;
        dim0.push_back({root.birth, filt.min_weight, 0,
                        static_cast<std::int32_t>(result.generators.size())});
        result.generators.push_back(std::move(gen));
    }

    result.diagram.points = std::move(dim0);
    result.diagram.points.insert(result.diagram.points.end(), dim1.begin(), dim1.end());
    return result;
}

// Dim-0 pairs and their generator subgraphs only.
inline PersistenceResult compute_h0(const Filtration& filt) {
    PersistenceResult full = compute_persistence(filt);
    std::erase_if(full.diagram.points, [](const DiagramPoint& p) { return p.dimension != 0; });
    return full;
}

// Dim-1 births; each cycle is born at its closing edge and truncated to
// min_weight.
inline std::vector<DiagramPoint> compute_h1_births(const Filtration& filt) {
    PersistenceResult full = compute_persistence(filt);
    std::vector<DiagramPoint> out;
    for (const DiagramPoint& p : full.diagram.points)
        if (p.dimension == 1) out.push_back(p);
    return out;
}

// G^lambda_x: de-duplicated union of the generator subgraphs of dim-0 points
// with lifetime strictly greater than lambda.
struct PersistentSubgraph {
    std::vector<VertexId> vertices; // sorted, unique
    std::vector<InducedEdge> edges; // unique by (src,dst)
    double lambda = 0.0;
    std::size_t edge_count = 0;
    double average_edge_weight = 0.0; // mean of retained absolute weights
    double omega = 0.0;
    double min_weight = 0.0;
};

inline PersistentSubgraph extract_persistent_subgraph(
    const PersistenceDiagram& diagram, const std::vector<GeneratorSubgraph>& generators,
    double lambda) {
    if (lambda < 0.0)
        throw std::invalid_argument("extract_persistent_subgraph: lambda must be >= 0");
    PersistentSubgraph out;
    out.lambda = lambda;
    out.omega = diagram.omega;
    out.min_weight = diagram.min_weight;
    for (const DiagramPoint& p : diagram.points) {
        if (p.dimension != 0 || p.lifetime() <= lambda) continue;
        const GeneratorSubgraph& gen = generators.at(static_cast<std::size_t>(p.generator_id));
        out.vertices.insert(out.vertices.end(), gen.vertices.begin(), gen.vertices.end());
        out.edges.insert(out.edges.end(), gen.edges.begin(), gen.edges.end());
    }
    std::sort(out.vertices.begin(), out.vertices.end());
    out.vertices.erase(std::unique(out.vertices.begin(), out.vertices.end()),
                       out.vertices.end());
    std::sort(out.edges.begin(), out.edges.end(), [](const InducedEdge& a, const InducedEdge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    out.edges.erase(std::unique(out.edges.begin(), out.edges.end(),
                                [](const InducedEdge& a, const InducedEdge& b) {
                                    return a.src == b.src && a.dst == b.dst;
                                }),
                    out.edges.end());
    out.edge_count = out.edges.size();
    if (!out.edges.empty()) {
        double acc = 0.0;
        for (const InducedEdge& e : out.edges) acc += e.weight;
        out.average_edge_weight = acc / static_cast<double>(out.edges.size());
    }
    return out;
}

} // namespace topodetect
