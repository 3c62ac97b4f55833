#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "topodetect/network.hpp"
#include "topodetect/rng.hpp"
#include "topodetect/tensor.hpp"

namespace topodetect {

struct AttackConfig {
    std::size_t target_class = 0;
    double kappa = 0.0;
    double initial_c = 1.0;
    std::size_t c_search_steps = 5;
    std::size_t iterations = 1000;
    double learning_rate = 1e-2;
    std::uint64_t seed = 0;
    std::size_t starts = 1; // extra starts jitter the initial point
};

struct AdversarialExample {
    Tensor original;
    Tensor perturbed;
    double distortion = 0.0; // L2 norm of (perturbed - original)
    std::size_t predicted_class = 0;
    bool success = false;
    std::size_t target = 0;
    double kappa = 0.0;
};

namespace detail {

inline Tensor tanh_to_box(const std::vector<double>& w, const std::vector<std::size_t>& shape) {
    Tensor x(shape);
    for (std::size_t i = 0; i < w.size(); ++i) x.data[i] = 0.5 * (std::tanh(w[i]) + 1.0);
    return x;
}

} // namespace detail

// Targeted L2 attack: minimize ||x'(w) - x||_2^2 + c * f(x'(w)) over w with
// x'(w) = (tanh(w) + 1) / 2, binary-searching the trade-off constant c and
// keeping the lowest-distortion success. A success requires the model to
// predict the target with logit margin at least kappa.
inline AdversarialExample generate(const NetworkModel& model, const Tensor& x,
                                   const AttackConfig& config) {
    if (config.target_class >= model.class_count)
        throw std::invalid_argument("generate: target class out of range");
    if (config.initial_c <= 0.0) throw std::invalid_argument("generate: c must be > 0");
    if (config.c_search_steps < 1 || config.iterations < 1)
        throw std::invalid_argument("generate: c_search_steps and iterations must be >= 1");
    for (double v : x.data)
        if (v < 0.0 || v > 1.0)
            throw std::invalid_argument("generate: input pixels must lie in [0,1]");

    const std::size_t n = x.size();
    std::vector<double> w_init(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double clamped = std::clamp(x.data[i], 1e-6, 1.0 - 1e-6);
        w_init[i] = std::atanh(2.0 * clamped - 1.0);
    }

    AdversarialExample best;
    best.original = x;
    best.target = config.target_class;
    best.kappa = config.kappa;
    best.distortion = std::numeric_limits<double>::infinity();

    Rng rng(config.seed);
    Tensor last_candidate;
    const LossDescriptor attack_loss =
        AttackObjectiveLoss{config.target_class, config.kappa};

    double c = config.initial_c;
    double c_low = 0.0;
    double c_high = std::numeric_limits<double>::infinity();
    for (std::size_t step = 0; step < config.c_search_steps; ++step) {
        bool success_at_c = false;
        for (std::size_t start = 0; start < std::max<std::size_t>(1, config.starts); ++start) {
            std::vector<double> w = w_init;
            if (start > 0)
                for (double& wi : w) wi += rng.normal(0.0, 1e-2);
            for (std::size_t iter = 0; iter < config.iterations; ++iter) {
                Tensor cand = detail::tanh_to_box(w, x.shape);
                const ForwardTrace trace = forward(model, cand);
                double runner_up = -std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < trace.logits.size(); ++i)
                    if (i != config.target_class)
                        runner_up = std::max(runner_up, trace.logits[i]);
                const double margin = trace.logits[config.target_class] - runner_up;
                if (trace.predicted_class == config.target_class && margin >= config.kappa) {
                    success_at_c = true;
                    const double dist = l2_norm_of_difference(cand, x);
                    if (dist < best.distortion) {
                        best.distortion = dist;
                        best.perturbed = cand;
                        best.predicted_class = trace.predicted_class;
                        best.success = true;
                    }
                }
                const Tensor df_dx = input_gradient_from_trace(model, trace, attack_loss);
                for (std::size_t i = 0; i < n; ++i) {
                    const double t = std::tanh(w[i]);
                    const double dx_dw = 0.5 * (1.0 - t * t);
                    const double dobj = 2.0 * (cand.data[i] - x.data[i]) + c * df_dx.data[i];
                    w[i] -= config.learning_rate * dobj * dx_dw;
                }
                last_candidate = std::move(cand);
            }
        }
        if (success_at_c) {
            c_high = c;
            c = 0.5 * (c_low + c_high);
        } else {
            c_low = c;
            c = std::isinf(c_high) ? c * 10.0 : 0.5 * (c_low + c_high);
        }
    }

    if (!best.success) {
        best.perturbed = std::move(last_candidate);
        const ForwardTrace trace = forward(model, best.perturbed);
        best.predicted_class = trace.predicted_class;
        best.distortion = l2_norm_of_difference(best.perturbed, x);
    }
    return best;
}

struct AdversarySetEntry {
    std::size_t source_index = 0;
    AdversarialExample example;
};

struct AdversarySet {
    double kappa = 0.0;
    std::vector<AdversarySetEntry> examples; // successes only
    std::size_t attempted = 0;
    std::size_t failed = 0;
};

// One adversary per non-true target class for each source image. Sources must
// already be correctly classified; failed attacks are counted and excluded.
inline std::vector<AdversarySet> build_adversary_sets(
    const NetworkModel& model, const std::vector<Tensor>& sources,
    const std::vector<std::size_t>& source_labels, const std::vector<double>& kappas,
    const AttackConfig& base_config, std::size_t threads = 0) {
    if (sources.size() != source_labels.size())
        throw std::invalid_argument("build_adversary_sets: source/label count mismatch");
    for (std::size_t i = 0; i < sources.size(); ++i)
        if (forward(model, sources[i]).predicted_class != source_labels[i])
            throw std::invalid_argument("build_adversary_sets: source " + std::to_string(i) +
                                        " is not correctly classified");

    struct Job {
        std::size_t source = 0;
        std::size_t target = 0;
        std::size_t kappa_index = 0;
    };
    std::vector<Job> jobs;
    for (std::size_t ki = 0; ki < kappas.size(); ++ki)
        for (std::size_t s = 0; s < sources.size(); ++s)
            for (std::size_t t = 0; t < model.class_count; ++t)
                if (t != source_labels[s]) jobs.push_back({s, t, ki});

    std::vector<AdversarialExample> results(jobs.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) break;
            AttackConfig cfg = base_config;
            cfg.target_class = jobs[j].target;
            cfg.kappa = kappas[jobs[j].kappa_index];
            results[j] = generate(model, sources[jobs[j].source], cfg);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::vector<AdversarySet> sets(kappas.size());
    for (std::size_t ki = 0; ki < kappas.size(); ++ki) sets[ki].kappa = kappas[ki];
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        AdversarySet& set = sets[jobs[j].kappa_index];
        ++set.attempted;
        if (results[j].success)
            set.examples.push_back({jobs[j].source, std::move(results[j])});
        else
            ++set.failed;
    }
    return sets;
}

} // namespace topodetect
