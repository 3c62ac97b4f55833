#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "topodetect/filtration.hpp"
#include "topodetect/induced_graph.hpp"
#include "topodetect/network.hpp"
#include "topodetect/persistence.hpp"
#include "topodetect/wasserstein.hpp"

namespace topodetect {

// Convenience: input -> trace -> G*_x -> persistence in one call.
inline PersistenceResult diagram_for_input(const NetworkModel& model, const Tensor& input,
                                           const PruneConfig& prune) {
    const ForwardTrace trace = forward(model, input);
    const InducedGraph graph = build_induced_graph(model, trace, prune);
    return compute_persistence(build_filtration(graph));
}

inline PersistentSubgraph persistent_subgraph_for_input(const NetworkModel& model,
                                                        const Tensor& input,
                                                        const PruneConfig& prune,
                                                        double lambda) {
    const PersistenceResult res = diagram_for_input(model, input, prune);
    return extract_persistent_subgraph(res.diagram, res.generators, lambda);
}

namespace detail {

inline PersistenceDiagram filter_by_lifetime(const PersistenceDiagram& diagram, double lambda) {
    PersistenceDiagram out;
    out.omega = diagram.omega;
    out.min_weight = diagram.min_weight;
    for (const DiagramPoint& p : diagram.points)
        if (p.lifetime() > lambda) out.points.push_back(p);
    return out;
}

} // namespace detail

// Distances from the diagram of x_a to the diagrams of the straight-line
// interpolates (1-t) x_a + t x_b, t in linspace(0,1). Diagram points with
// lifetime <= lambda are dropped before matching (lambda = 0 keeps everything
// off the diagonal, which leaves W_p unchanged).
inline std::vector<std::pair<double, double>> interpolation_distance_curve(
    const NetworkModel& model, const Tensor& x_a, const Tensor& x_b, std::size_t steps,
    const PruneConfig& prune, double lambda, const WassersteinParams& params = {}) {
    if (!x_a.same_shape(x_b))
        throw std::invalid_argument("interpolation_distance_curve: shape mismatch");
    if (steps < 2) throw std::invalid_argument("interpolation_distance_curve: steps must be >= 2");
    const PersistenceDiagram base = detail::filter_by_lifetime(
        diagram_for_input(model, x_a, prune).diagram, lambda);
    std::vector<std::pair<double, double>> curve;
    curve.reserve(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
        Tensor x = x_a;
        for (std::size_t k = 0; k < x.size(); ++k)
            x.data[k] = (1.0 - t) * x_a.data[k] + t * x_b.data[k];
        const PersistenceDiagram diag =
            detail::filter_by_lifetime(diagram_for_input(model, x, prune).diagram, lambda);
        curve.emplace_back(t, wasserstein_distance(base, diag, params));
    }
    return curve;
}

} // namespace topodetect
