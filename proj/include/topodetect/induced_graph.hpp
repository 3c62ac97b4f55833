#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "topodetect/network.hpp"
#include "topodetect/stats.hpp"
#include "topodetect/tensor.hpp"

namespace topodetect {

// Global neuron index. Input pixels come first (row-major), then each layer's
// output neurons in declaration order; conv outputs are numbered channel-major,
// then row-major, matching the tensor layout.
using VertexId = std::uint32_t;

struct InducedEdge {
    VertexId src = 0;
    VertexId dst = 0;
    double weight = 0.0;
    std::uint32_t layer = 0;
};

struct PruneConfig {
    double rho = 0.0; // layer-wise fraction of edges dropped, [0,1)
};

struct DegenerateGraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input-induced weighted graph G*_x: absolute-value weights, zero edges absent,
// layer-wise rho pruning already applied.
struct InducedGraph {
    std::vector<VertexId> vertices; // sorted, unique
    std::vector<InducedEdge> edges; // weight > 0
    double omega = 0.0;             // max edge weight
    double min_weight = 0.0;        // min retained edge weight
};

// Raw multiplicative edges of one fully-connected layer: activation a_i times
// W[i][j], signed, exact zeros omitted.
inline std::vector<InducedEdge> induce_fc_edges(const Tensor& prev_activations,
                                                const Tensor& weight_matrix,
                                                VertexId src_offset = 0, VertexId dst_offset = 0,
                                                std::uint32_t layer = 0) {
    if (weight_matrix.shape.size() != 2)
        throw std::invalid_argument("induce_fc_edges: weight matrix must be rank 2");
    const std::size_t in_dim = weight_matrix.shape[0];
    const std::size_t out_dim = weight_matrix.shape[1];
    if (prev_activations.size() != in_dim)
        throw std::invalid_argument("induce_fc_edges: activation size " +
                                    std::to_string(prev_activations.size()) +
                                    " does not match weight rows " + std::to_string(in_dim));
    std::vector<InducedEdge> edges;
    for (std::size_t i = 0; i < in_dim; ++i) {
        const double a = prev_activations.data[i];
        if (a == 0.0) continue;
        const double* row = &weight_matrix.data[i * out_dim];
        for (std::size_t j = 0; j < out_dim; ++j) {
            const double w = a * row[j];
            if (w == 0.0) continue;
            edges.push_back({static_cast<VertexId>(src_offset + i),
                             static_cast<VertexId>(dst_offset + j), w, layer});
        }
    }
    return edges;
}

// Raw edges of one convolutional layer under "same" zero padding: one edge per
// (output neuron, receptive-field input neuron) pair, weighted activation times
// filter coefficient. Padding positions yield no edges; exact zeros omitted.
inline std::vector<InducedEdge> induce_conv_edges(const Tensor& prev_activations,
                                                  const Tensor& filters, std::size_t stride,
                                                  VertexId src_offset = 0,
                                                  VertexId dst_offset = 0,
                                                  std::uint32_t layer = 0) {
    if (filters.shape.size() != 4)
        throw std::invalid_argument("induce_conv_edges: filters must be rank 4 [F,C,K,K]");
    if (prev_activations.shape.size() != 3)
        throw std::invalid_argument("induce_conv_edges: activations must be rank 3 [C,H,W]");
    const std::size_t F = filters.shape[0];
    const std::size_t C = filters.shape[1];
    const std::size_t K = filters.shape[2];
    if (filters.shape[3] != K)
        throw std::invalid_argument("induce_conv_edges: filters must be square");
    if (prev_activations.shape[0] != C)
        throw std::invalid_argument("induce_conv_edges: channel mismatch");
    const std::size_t IH = prev_activations.shape[1];
    const std::size_t IW = prev_activations.shape[2];
    const std::size_t OH = (IH + stride - 1) / stride;
    const std::size_t OW = (IW + stride - 1) / stride;
    std::ptrdiff_t pad_y = 0, pad_x = 0;
    detail::same_padding(IH, K, stride, OH, pad_y);
    detail::same_padding(IW, K, stride, OW, pad_x);

    std::vector<InducedEdge> edges;
    for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t oy = 0; oy < OH; ++oy) {
            for (std::size_t ox = 0; ox < OW; ++ox) {
                const VertexId dst =
                    static_cast<VertexId>(dst_offset + (f * OH + oy) * OW + ox);
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t ky = 0; ky < K; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * stride + ky) - pad_y;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(IH)) continue;
                        for (std::size_t kx = 0; kx < K; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride + kx) - pad_x;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(IW)) continue;
                            const double a = prev_activations.data[(c * IH + iy) * IW + ix];
                            const double w =
                                a * filters.data[((f * C + c) * K + ky) * K + kx];
                            if (w == 0.0) continue;
                            edges.push_back(
                                {static_cast<VertexId>(src_offset + (c * IH + iy) * IW + ix),
                                 dst, w, layer});
                        }
                    }
                }
            }
        }
    }
    return edges;
}

// Raw signed edges of layer `layer_index` with global vertex ids. Summing the
// signed weights into each destination reproduces that neuron's pre-activation
// minus bias (bias terms create no edges).
inline std::vector<InducedEdge> induce_layer_raw_edges(const NetworkModel& model,
                                                       const ForwardTrace& trace,
                                                       std::size_t layer_index) {
    if (layer_index >= model.layers.size())
        throw std::invalid_argument("induce_layer_raw_edges: layer index out of range");
    const Layer& layer = model.layers[layer_index];
    const Tensor& prev =
        layer_index == 0 ? trace.input : trace.post_activations[layer_index - 1];
    const VertexId src_offset = static_cast<VertexId>(model.interface_offsets[layer_index]);
    const VertexId dst_offset = static_cast<VertexId>(model.interface_offsets[layer_index + 1]);
    if (layer.spec.kind == LayerKind::Conv)
        return induce_conv_edges(prev, layer.weights, layer.spec.stride, src_offset, dst_offset,
                                 static_cast<std::uint32_t>(layer_index));
    // Fully-connected layers consume the flattened previous interface; the
    // flattening order equals the tensor layout, so ids line up.
    Tensor flat({prev.size()}, prev.data);
    return induce_fc_edges(flat, layer.weights, src_offset, dst_offset,
                           static_cast<std::uint32_t>(layer_index));
}

// Builds G*_x: per layer take |raw weight|, then keep the top (1 - rho)
// fraction by weight. The cutoff is the empirical rho-quantile with linear
// interpolation; edges equal to the cutoff are retained.
inline InducedGraph build_induced_graph(const NetworkModel& model, const ForwardTrace& trace,
                                        const PruneConfig& prune) {
    if (prune.rho < 0.0 || prune.rho >= 1.0)
        throw std::invalid_argument("build_induced_graph: rho must be in [0,1)");
    InducedGraph graph;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        std::vector<InducedEdge> raw = induce_layer_raw_edges(model, trace, l);
        if (raw.empty()) continue;
        for (InducedEdge& e : raw) e.weight = std::fabs(e.weight);
        double cutoff = 0.0;
        if (prune.rho > 0.0) {
            std::vector<double> weights;
            weights.reserve(raw.size());
            for (const InducedEdge& e : raw) weights.push_back(e.weight);
            cutoff = quantile(std::move(weights), prune.rho);
        }
        for (const InducedEdge& e : raw)
            if (e.weight >= cutoff && e.weight > 0.0) graph.edges.push_back(e);
    }
    if (graph.edges.empty())
        throw DegenerateGraphError("build_induced_graph: no edges retained");

    graph.vertices.reserve(graph.edges.size() * 2);
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

} // namespace topodetect
