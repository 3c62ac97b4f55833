#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "topodetect/network.hpp"
#include "topodetect/persistence.hpp"
#include "topodetect/pipeline.hpp"
#include "topodetect/stats.hpp"

namespace topodetect {

struct SignatureEntry {
    VertexId vertex = 0;
    std::uint32_t count = 0; // occurrences across the class's training subgraphs
    std::uint32_t rank = 0;  // dense ascending rank of count (least frequent = 1)
};

// Ranked vertex-occurrence table of one class, aggregated over the persistent
// subgraphs of its training images.
struct ClassSignature {
    std::size_t class_index = 0;
    std::vector<SignatureEntry> entries; // sorted by vertex id

    std::size_t size() const { return entries.size(); }

    const SignatureEntry* find(VertexId v) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), v,
                                   [](const SignatureEntry& e, VertexId id) {
                                       return e.vertex < id;
                                   });
        if (it == entries.end() || it->vertex != v) return nullptr;
        return &*it;
    }
};

enum class MatchScale { Rank, Count };

struct DetectorStats {
    double mu_match = 0.0;    // mean of s_avg over the validation images
    double sigma_match = 0.0; // sample stddev of s_avg over the validation images
    double median_edges = 0.0;
    double percentile_edges = 0.0;
    double pi = 0.9;
    double mu_weight = 0.0;    // mean of r_avg over the training images
    double sigma_weight = 0.0; // sample stddev of r_avg over the training images
};

enum class DetectionMethod : std::uint8_t {
    MaxNodeMatch = 0,
    AvgNodeMatch = 1,
    EdgeCount = 2,
    AvgEdgeWeight = 3
};

inline const char* method_name(DetectionMethod m) {
    switch (m) {
        case DetectionMethod::MaxNodeMatch: return "max_node_match";
        case DetectionMethod::AvgNodeMatch: return "avg_node_match";
        case DetectionMethod::EdgeCount: return "edge_count";
        case DetectionMethod::AvgEdgeWeight: return "avg_edge_weight";
    }
    return "unknown";
}

struct DetectionVerdict {
    DetectionMethod method = DetectionMethod::MaxNodeMatch;
    bool flagged = false;
    double score = 0.0;
    std::size_t predicted_class = 0;  // network prediction (i hat)
    std::size_t signature_class = 0;  // argmax-similarity class (i star), MaxNodeMatch only
};

namespace detail {

template <typename Fn>
inline void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    if (threads <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) break;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const std::size_t spawn = std::min(threads, count);
    for (std::size_t i = 0; i < spawn; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

} // namespace detail

// Aggregates per-class vertex occurrence counts over G^lambda_x of each
// training image and dense-ranks them ascending by count.
inline std::vector<ClassSignature> build_signatures(
    const NetworkModel& model, const std::vector<Tensor>& images,
    const std::vector<std::size_t>& labels, double lambda, const PruneConfig& prune,
    std::size_t threads = 1) {
    if (images.size() != labels.size())
        throw std::invalid_argument("build_signatures: image/label count mismatch");
    std::vector<std::size_t> per_class(model.class_count, 0);
    for (std::size_t label : labels) {
        if (label >= model.class_count)
            throw std::invalid_argument("build_signatures: label out of range");
        ++per_class[label];
    }
    for (std::size_t c = 0; c < model.class_count; ++c)
        if (per_class[c] == 0)
            throw std::invalid_argument("build_signatures: class " + std::to_string(c) +
                                        " has no training examples");

    std::vector<std::vector<VertexId>> subgraph_vertices(images.size());
    detail::parallel_for(images.size(), threads, [&](std::size_t i) {
        subgraph_vertices[i] =
            persistent_subgraph_for_input(model, images[i], prune, lambda).vertices;
    });

    std::vector<ClassSignature> signatures(model.class_count);
    for (std::size_t c = 0; c < model.class_count; ++c) {
        signatures[c].class_index = c;
        std::map<VertexId, std::uint32_t> counts;
        for (std::size_t i = 0; i < images.size(); ++i) {
            if (labels[i] != c) continue;
            for (VertexId v : subgraph_vertices[i]) ++counts[v];
        }
        std::vector<std::uint32_t> distinct;
        distinct.reserve(counts.size());
        for (const auto& [v, n] : counts) distinct.push_back(n);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        signatures[c].entries.reserve(counts.size());
        for (const auto& [v, n] : counts) {
            const auto it = std::lower_bound(distinct.begin(), distinct.end(), n);
            const std::uint32_t rank =
                static_cast<std::uint32_t>(it - distinct.begin()) + 1;
            signatures[c].entries.push_back({v, n, rank});
        }
    }
    return signatures;
}

// Normalized rank sum s_i = sum_{v in subgraph} m_i(v) / |V_i| with
// m_i(v) = r_i(v) when v is in the signature, 0 otherwise. Returns 0 for an
// empty signature.
inline double similarity(const ClassSignature& sig, const PersistentSubgraph& subgraph,
                         MatchScale scale = MatchScale::Rank) {
    if (sig.entries.empty()) return 0.0;
    double acc = 0.0;
    for (VertexId v : subgraph.vertices) {
        const SignatureEntry* e = sig.find(v);
        if (!e) continue;
        acc += scale == MatchScale::Rank ? static_cast<double>(e->rank)
                                         : static_cast<double>(e->count);
    }
    return acc / static_cast<double>(sig.entries.size());
}

inline std::vector<double> similarity_scores(const std::vector<ClassSignature>& signatures,
                                             const PersistentSubgraph& subgraph,
                                             MatchScale scale = MatchScale::Rank) {
    std::vector<double> scores(signatures.size());
    for (std::size_t c = 0; c < signatures.size(); ++c)
        scores[c] = similarity(signatures[c], subgraph, scale);
    return scores;
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

// Flags when the argmax-similarity class disagrees with the network
// prediction; ties resolve to the smallest class index.
inline DetectionVerdict max_node_match_verdict(const std::vector<ClassSignature>& signatures,
                                               const PersistentSubgraph& subgraph,
                                               std::size_t predicted_class,
                                               MatchScale scale = MatchScale::Rank) {
    const std::vector<double> scores = similarity_scores(signatures, subgraph, scale);
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[best]) best = c;
    DetectionVerdict v;
    v.method = DetectionMethod::MaxNodeMatch;
    v.predicted_class = predicted_class;
    v.signature_class = best;
    v.score = scores[best];
    v.flagged = best != predicted_class;
    return v;
}

// Flags when the mean similarity over all classes exceeds mu + sigma from the
// validation set.
inline DetectionVerdict avg_node_match_verdict(const std::vector<ClassSignature>& signatures,
                                               const PersistentSubgraph& subgraph,
                                               std::size_t predicted_class,
                                               const DetectorStats& stats,
                                               MatchScale scale = MatchScale::Rank) {
    const std::vector<double> scores = similarity_scores(signatures, subgraph, scale);
    DetectionVerdict v;
    v.method = DetectionMethod::AvgNodeMatch;
    v.predicted_class = predicted_class;
    v.score = mean(scores);
    v.flagged = v.score > stats.mu_match + stats.sigma_match;
    return v;
}

// Flags when the subgraph edge count exceeds median + pi-th percentile of the
// training edge counts.
inline DetectionVerdict detect_edge_count(const PersistentSubgraph& subgraph,
                                          const DetectorStats& stats) {
    DetectionVerdict v;
    v.method = DetectionMethod::EdgeCount;
    v.score = static_cast<double>(subgraph.edge_count);
    v.flagged = v.score > stats.median_edges + stats.percentile_edges;
    return v;
}

// Average embedded edge weight r_avg = mean over edges of (omega - phi(e)).
// Large values mean the subgraph leans on low-magnitude edges.
inline double average_embedded_weight(const PersistentSubgraph& subgraph) {
    if (subgraph.edge_count == 0) return 0.0;
    return subgraph.omega - subgraph.average_edge_weight;
}

// Flags when r_avg exceeds mu + sigma from the training set. An empty
// subgraph scores 0 and is never flagged.
inline DetectionVerdict detect_avg_edge_weight(const PersistentSubgraph& subgraph,
                                               const DetectorStats& stats) {
    DetectionVerdict v;
    v.method = DetectionMethod::AvgEdgeWeight;
    v.score = average_embedded_weight(subgraph);
    v.flagged = subgraph.edge_count > 0 && v.score > stats.mu_weight + stats.sigma_weight;
    return v;
}

inline DetectionVerdict detect_max_node_match(const NetworkModel& model, const Tensor& x,
                                              const std::vector<ClassSignature>& signatures,
                                              double lambda, const PruneConfig& prune,
                                              MatchScale scale = MatchScale::Rank) {
    const ForwardTrace trace = forward(model, x);
    const InducedGraph graph = build_induced_graph(model, trace, prune);
    const PersistenceResult res = compute_persistence(build_filtration(graph));
    const PersistentSubgraph sub = extract_persistent_subgraph(res.diagram, res.generators, lambda);
    return max_node_match_verdict(signatures, sub, trace.predicted_class, scale);
}

inline DetectionVerdict detect_avg_node_match(const NetworkModel& model, const Tensor& x,
                                              const std::vector<ClassSignature>& signatures,
                                              const DetectorStats& stats, double lambda,
                                              const PruneConfig& prune,
                                              MatchScale scale = MatchScale::Rank) {
    const ForwardTrace trace = forward(model, x);
    const InducedGraph graph = build_induced_graph(model, trace, prune);
    const PersistenceResult res = compute_persistence(build_filtration(graph));
    const PersistentSubgraph sub = extract_persistent_subgraph(res.diagram, res.generators, lambda);
    return avg_node_match_verdict(signatures, sub, trace.predicted_class, stats, scale);
}

// Training-side statistics for the threshold detectors. The match statistics
// (mu, sigma) come from the held-out validation images; the edge-count and
// edge-weight statistics come from the signature-training images.
inline DetectorStats compute_detector_stats(const NetworkModel& model,
                                            const std::vector<Tensor>& train_images,
                                            const std::vector<Tensor>& val_images,
                                            const std::vector<ClassSignature>& signatures,
                                            double lambda, const PruneConfig& prune, double pi,
                                            std::size_t threads = 1,
                                            MatchScale scale = MatchScale::Rank) {
    if (train_images.empty())
        throw std::invalid_argument("compute_detector_stats: empty training set");
    if (pi < 0.0 || pi > 1.0)
        throw std::invalid_argument("compute_detector_stats: pi outside [0,1]");
    DetectorStats stats;
    stats.pi = pi;

    std::vector<double> edge_counts(train_images.size());
    std::vector<double> avg_weights(train_images.size());
    detail::parallel_for(train_images.size(), threads, [&](std::size_t i) {
        const PersistentSubgraph sub =
            persistent_subgraph_for_input(model, train_images[i], prune, lambda);
        edge_counts[i] = static_cast<double>(sub.edge_count);
        avg_weights[i] = average_embedded_weight(sub);
    });
    stats.median_edges = median(edge_counts);
    stats.percentile_edges = quantile(edge_counts, pi);
    stats.mu_weight = mean(avg_weights);
    stats.sigma_weight = sample_stddev(avg_weights);

    std::vector<double> match_scores(val_images.size());
    detail::parallel_for(val_images.size(), threads, [&](std::size_t i) {
        const PersistentSubgraph sub =
            persistent_subgraph_for_input(model, val_images[i], prune, lambda);
        match_scores[i] = mean(similarity_scores(signatures, sub, scale));
    });
    stats.mu_match = mean(match_scores);
    stats.sigma_match = sample_stddev(match_scores);
    return stats;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct DetectionMetrics {
    double accuracy = 0.0;
    std::size_t false_positives = 0; // clean inputs flagged
    std::size_t false_negatives = 0; // adversarial inputs not flagged
    double f1 = 0.0;
    std::size_t clean_count = 0;
    std::size_t adversarial_count = 0;
};

// Positives are adversarial inputs. F1 is 0 when precision + recall is 0.
inline DetectionMetrics evaluate_flags(const std::vector<bool>& clean_flagged,
                                       const std::vector<bool>& adversarial_flagged) {
    if (clean_flagged.empty() || adversarial_flagged.empty())
        throw std::invalid_argument("evaluate_flags: both sets must be nonempty");
    DetectionMetrics m;
    m.clean_count = clean_flagged.size();
    m.adversarial_count = adversarial_flagged.size();
    for (bool f : clean_flagged)
        if (f) ++m.false_positives;
    std::size_t true_positives = 0;
    for (bool f : adversarial_flagged)
        f ? ++true_positives : ++m.false_negatives;
    const double total = static_cast<double>(m.clean_count + m.adversarial_count);
    m.accuracy = 1.0 - static_cast<double>(m.false_positives + m.false_negatives) / total;
    const double denom = 2.0 * static_cast<double>(true_positives) +
                         static_cast<double>(m.false_positives + m.false_negatives);
    m.f1 = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(true_positives) / denom;
    return m;
}

} // namespace topodetect
