#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "topodetect/rng.hpp"
#include "topodetect/tensor.hpp"

namespace topodetect {

enum class LayerKind : std::uint8_t { Conv = 0, FullyConnected = 1 };
enum class Activation : std::uint8_t { None = 0, ReLU = 1 };

// Padding is always "same": zero padding so that out = ceil(in / stride).
struct LayerSpec {
    LayerKind kind = LayerKind::FullyConnected;
    std::size_t filter_count = 0; // Conv
    std::size_t filter_size = 0;  // Conv, square
    std::size_t stride = 1;       // Conv
    std::size_t in_dim = 0;       // FullyConnected
    std::size_t out_dim = 0;      // FullyConnected
    Activation activation = Activation::None;

    static LayerSpec conv(std::size_t filters, std::size_t size, std::size_t stride,
                          Activation act) {
        LayerSpec s;
        s.kind = LayerKind::Conv;
        s.filter_count = filters;
        s.filter_size = size;
        s.stride = stride;
        s.activation = act;
        if (filters < 1 || size < 1 || stride < 1)
            throw std::invalid_argument("LayerSpec::conv: filters, size and stride must be >= 1");
        return s;
    }

    static LayerSpec fully_connected(std::size_t in, std::size_t out, Activation act) {
        LayerSpec s;
        s.kind = LayerKind::FullyConnected;
        s.in_dim = in;
        s.out_dim = out;
        s.activation = act;
        if (in < 1 || out < 1)
            throw std::invalid_argument("LayerSpec::fully_connected: dims must be >= 1");
        return s;
    }
};

struct Layer {
    LayerSpec spec;
    Tensor weights; // Conv: [F,C,K,K]; FullyConnected: [in,out]
    Tensor bias;    // Conv: [F]; FullyConnected: [out]
};

// Shape of one layer interface as channels x height x width. Fully-connected
// outputs are (dim, 1, 1). Neurons inside an interface are numbered
// channel-major, then row-major, matching the tensor layout.
struct InterfaceShape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t count() const { return channels * height * width; }
};

struct NetworkModel {
    std::size_t input_height = 0;
    std::size_t input_width = 0;
    std::vector<Layer> layers;
    std::size_t class_count = 0;

    // Derived by finalize(): one interface per activation tensor, input first.
    std::vector<InterfaceShape> interfaces;
    std::vector<std::size_t> interface_offsets; // global neuron id of interface start
    std::size_t neuron_count = 0;

    // Validates layer composition and assigns the deterministic global neuron
    // numbering: input pixels first (row-major), then each layer's outputs.
    void finalize() {
        if (input_height == 0 || input_width == 0)
            throw std::invalid_argument("NetworkModel: empty input shape");
        if (layers.empty()) throw std::invalid_argument("NetworkModel: no layers");
        interfaces.clear();
        interface_offsets.clear();
        InterfaceShape cur{1, input_height, input_width};
        interfaces.push_back(cur);
        for (const Layer& layer : layers) {
            const LayerSpec& s = layer.spec;
            if (s.kind == LayerKind::Conv) {
                if (cur.height == 0 || cur.width == 0)
                    throw std::invalid_argument("NetworkModel: conv layer after flat output");
                InterfaceShape next;
                next.channels = s.filter_count;
                next.height = (cur.height + s.stride - 1) / s.stride;
                next.width = (cur.width + s.stride - 1) / s.stride;
                const std::vector<std::size_t> want = {s.filter_count, cur.channels,
                                                       s.filter_size, s.filter_size};
                if (layer.weights.shape != want)
                    throw std::invalid_argument("NetworkModel: conv weight shape " +
                                                shape_string(layer.weights.shape) +
                                                " does not match " + shape_string(want));
                if (layer.bias.size() != s.filter_count)
                    throw std::invalid_argument("NetworkModel: conv bias size mismatch");
                cur = next;
            } else {
                if (s.in_dim != cur.count())
                    throw std::invalid_argument(
                        "NetworkModel: fully-connected in_dim " + std::to_string(s.in_dim) +
                        " does not match previous interface of " + std::to_string(cur.count()));
                const std::vector<std::size_t> want = {s.in_dim, s.out_dim};
                if (layer.weights.shape != want)
                    throw std::invalid_argument("NetworkModel: fc weight shape mismatch");
                if (layer.bias.size() != s.out_dim)
                    throw std::invalid_argument("NetworkModel: fc bias size mismatch");
                cur = InterfaceShape{s.out_dim, 1, 1};
            }
            interfaces.push_back(cur);
        }
        if (class_count == 0) class_count = interfaces.back().count();
        if (class_count != interfaces.back().count())
            throw std::invalid_argument("NetworkModel: class_count does not match final layer");
        interface_offsets.resize(interfaces.size());
        std::size_t offset = 0;
        for (std::size_t i = 0; i < interfaces.size(); ++i) {
            interface_offsets[i] = offset;
            offset += interfaces[i].count();
        }
        neuron_count = offset;
    }
};

// Builds a model with truncated-normal weight and bias init (sigma, +-2 sigma).
inline NetworkModel make_network(std::size_t input_height, std::size_t input_width,
                                 const std::vector<LayerSpec>& specs, Rng& rng,
                                 double init_sigma = 0.1) {
    NetworkModel model;
    model.input_height = input_height;
    model.input_width = input_width;
    InterfaceShape cur{1, input_height, input_width};
    for (const LayerSpec& s : specs) {
        Layer layer;
        layer.spec = s;
        if (s.kind == LayerKind::Conv) {
            layer.weights = Tensor({s.filter_count, cur.channels, s.filter_size, s.filter_size});
            layer.bias = Tensor({s.filter_count});
            cur = InterfaceShape{s.filter_count, (cur.height + s.stride - 1) / s.stride,
                                 (cur.width + s.stride - 1) / s.stride};
        } else {
            layer.weights = Tensor({s.in_dim, s.out_dim});
            layer.bias = Tensor({s.out_dim});
            cur = InterfaceShape{s.out_dim, 1, 1};
        }
        for (double& w : layer.weights.data) w = rng.truncated_normal(0.0, init_sigma);
        for (double& b : layer.bias.data) b = rng.truncated_normal(0.0, init_sigma);
        model.layers.push_back(std::move(layer));
    }
    model.finalize();
    return model;
}

struct ForwardTrace {
    Tensor input;
    std::vector<Tensor> pre_activations;  // one per layer
    std::vector<Tensor> post_activations; // one per layer
    std::vector<double> logits;           // final pre-activation
    std::vector<double> probabilities;    // softmax(logits)
    std::size_t predicted_class = 0;
};

namespace detail {

// "Same" zero padding offsets, TensorFlow convention.
inline void same_padding(std::size_t in, std::size_t k, std::size_t stride, std::size_t out,
                         std::ptrdiff_t& pad_before) {
    const std::ptrdiff_t total =
        std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>((out - 1) * stride + k) -
                                        static_cast<std::ptrdiff_t>(in));
    pad_before = total / 2;
}

inline void conv_forward(const Tensor& in, const InterfaceShape& in_shape, const Layer& layer,
                         const InterfaceShape& out_shape, Tensor& out) {
    const std::size_t F = layer.spec.filter_count;
    const std::size_t C = in_shape.channels;
    const std::size_t K = layer.spec.filter_size;
    const std::size_t S = layer.spec.stride;
    const std::size_t IH = in_shape.height, IW = in_shape.width;
    const std::size_t OH = out_shape.height, OW = out_shape.width;
    std::ptrdiff_t pad_y = 0, pad_x = 0;
    same_padding(IH, K, S, OH, pad_y);
    same_padding(IW, K, S, OW, pad_x);
    for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t oy = 0; oy < OH; ++oy) {
            for (std::size_t ox = 0; ox < OW; ++ox) {
                double acc = layer.bias[f];
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t ky = 0; ky < K; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * S + ky) - pad_y;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(IH)) continue;
                        for (std::size_t kx = 0; kx < K; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * S + kx) - pad_x;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(IW)) continue;
                            acc += in.data[(c * IH + iy) * IW + ix] *
                                   layer.weights.data[((f * C + c) * K + ky) * K + kx];
                        }
                    }
                }
                out.data[(f * OH + oy) * OW + ox] = acc;
            }
        }
    }
}

inline void fc_forward(const Tensor& in, const Layer& layer, Tensor& out) {
    const std::size_t in_dim = layer.spec.in_dim;
    const std::size_t out_dim = layer.spec.out_dim;
    for (std::size_t j = 0; j < out_dim; ++j) out.data[j] = layer.bias[j];
    for (std::size_t i = 0; i < in_dim; ++i) {
        const double a = in.data[i];
        if (a == 0.0) continue;
        const double* row = &layer.weights.data[i * out_dim];
        for (std::size_t j = 0; j < out_dim; ++j) out.data[j] += a * row[j];
    }
}

} // namespace detail

inline std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> probs(logits.size());
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - zmax);
        denom += probs[i];
    }
    for (double& p : probs) p /= denom;
    return probs;
}

// Forward pass retaining every intermediate activation.
inline ForwardTrace forward(const NetworkModel& model, const Tensor& input) {
    if (input.shape != std::vector<std::size_t>{model.input_height, model.input_width} &&
        input.shape != std::vector<std::size_t>{1, model.input_height, model.input_width})
        throw std::invalid_argument("forward: input shape " + shape_string(input.shape) +
                                    " does not match model input " +
                                    std::to_string(model.input_height) + "x" +
                                    std::to_string(model.input_width));
    ForwardTrace trace;
    trace.input = Tensor({1, model.input_height, model.input_width}, input.data);
    trace.pre_activations.reserve(model.layers.size());
    trace.post_activations.reserve(model.layers.size());
    const Tensor* cur = &trace.input;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        const InterfaceShape& in_shape = model.interfaces[l];
        const InterfaceShape& out_shape = model.interfaces[l + 1];
        Tensor pre({out_shape.channels, out_shape.height, out_shape.width});
        if (layer.spec.kind == LayerKind::Conv)
            detail::conv_forward(*cur, in_shape, layer, out_shape, pre);
        else
            detail::fc_forward(*cur, layer, pre);
        Tensor post = pre;
        if (layer.spec.activation == Activation::ReLU)
            for (double& v : post.data) v = std::max(0.0, v);
        trace.pre_activations.push_back(std::move(pre));
        trace.post_activations.push_back(std::move(post));
        cur = &trace.post_activations.back();
    }
    trace.logits = trace.pre_activations.back().data;
    trace.probabilities = softmax(trace.logits);
    trace.predicted_class = static_cast<std::size_t>(
        std::max_element(trace.probabilities.begin(), trace.probabilities.end()) -
        trace.probabilities.begin());
    return trace;
}

// ---------------------------------------------------------------------------
// Losses and gradients
// ---------------------------------------------------------------------------

struct CrossEntropyLoss {
    std::size_t label = 0;
};

// Hinge objective of the targeted attack: max(max_{i != t} z_i - z_t, -kappa).
struct AttackObjectiveLoss {
    std::size_t target = 0;
    double kappa = 0.0;
};

using LossDescriptor = std::variant<CrossEntropyLoss, AttackObjectiveLoss>;

inline double attack_objective(const std::vector<double>& logits, std::size_t target,
                               double kappa) {
    if (target >= logits.size())
        throw std::invalid_argument("attack_objective: target class out of range");
    double other = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (i != target) other = std::max(other, logits[i]);
    return std::max(other - logits[target], -kappa);
}

inline double loss_value(const ForwardTrace& trace, const LossDescriptor& loss) {
    if (const auto* ce = std::get_if<CrossEntropyLoss>(&loss)) {
        if (ce->label >= trace.probabilities.size())
            throw std::invalid_argument("loss_value: label out of range");
        return -std::log(std::max(trace.probabilities[ce->label], 1e-300));
    }
    const auto& atk = std::get<AttackObjectiveLoss>(loss);
    return attack_objective(trace.logits, atk.target, atk.kappa);
}

// dLoss/dlogits for either descriptor. The attack hinge is piecewise linear:
// zero when saturated at -kappa, otherwise +1 on the runner-up, -1 on the target.
inline std::vector<double> logit_gradient(const ForwardTrace& trace, const LossDescriptor& loss) {
    std::vector<double> grad(trace.logits.size(), 0.0);
    if (const auto* ce = std::get_if<CrossEntropyLoss>(&loss)) {
        if (ce->label >= grad.size())
            throw std::invalid_argument("logit_gradient: label out of range");
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = trace.probabilities[i];
        grad[ce->label] -= 1.0;
        return grad;
    }
    const auto& atk = std::get<AttackObjectiveLoss>(loss);
    if (atk.target >= grad.size())
        throw std::invalid_argument("logit_gradient: target out of range");
    std::size_t runner_up = atk.target == 0 ? 1 : 0;
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (i != atk.target && trace.logits[i] > trace.logits[runner_up]) runner_up = i;
    if (trace.logits[runner_up] - trace.logits[atk.target] <= -atk.kappa) return grad;
    grad[runner_up] = 1.0;
    grad[atk.target] = -1.0;
    return grad;
}

struct Gradients {
    std::vector<Tensor> weight_grads;
    std::vector<Tensor> bias_grads;
    Tensor input_grad;
};

namespace detail {

inline void conv_backward(const Tensor& in, const InterfaceShape& in_shape, const Layer& layer,
                          const InterfaceShape& out_shape, const Tensor& dpre, Tensor& din,
                          Tensor* dweights, Tensor* dbias) {
    const std::size_t F = layer.spec.filter_count;
    const std::size_t C = in_shape.channels;
    const std::size_t K = layer.spec.filter_size;
    const std::size_t S = layer.spec.stride;
    const std::size_t IH = in_shape.height, IW = in_shape.width;
    const std::size_t OH = out_shape.height, OW = out_shape.width;
    std::ptrdiff_t pad_y = 0, pad_x = 0;
    same_padding(IH, K, S, OH, pad_y);
    same_padding(IW, K, S, OW, pad_x);
    for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t oy = 0; oy < OH; ++oy) {
            for (std::size_t ox = 0; ox < OW; ++ox) {
                const double g = dpre.data[(f * OH + oy) * OW + ox];
                if (g == 0.0) continue;
                if (dbias) dbias->data[f] += g;
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t ky = 0; ky < K; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * S + ky) - pad_y;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(IH)) continue;
                        for (std::size_t kx = 0; kx < K; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * S + kx) - pad_x;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(IW)) continue;
                            const std::size_t in_idx = (c * IH + iy) * IW + ix;
                            const std::size_t w_idx = ((f * C + c) * K + ky) * K + kx;
                            din.data[in_idx] += g * layer.weights.data[w_idx];
                            if (dweights) dweights->data[w_idx] += g * in.data[in_idx];
                        }
                    }
                }
            }
        }
    }
}

inline void fc_backward(const Tensor& in, const Layer& layer, const Tensor& dpre, Tensor& din,
                        Tensor* dweights, Tensor* dbias) {
    const std::size_t in_dim = layer.spec.in_dim;
    const std::size_t out_dim = layer.spec.out_dim;
    if (dbias)
        for (std::size_t j = 0; j < out_dim; ++j) dbias->data[j] += dpre.data[j];
    for (std::size_t i = 0; i < in_dim; ++i) {
        const double* row = &layer.weights.data[i * out_dim];
        double acc = 0.0;
        for (std::size_t j = 0; j < out_dim; ++j) acc += dpre.data[j] * row[j];
        din.data[i] = acc;
    }
    if (dweights) {
        for (std::size_t i = 0; i < in_dim; ++i) {
            const double a = in.data[i];
            if (a == 0.0) continue;
            double* row = &dweights->data[i * out_dim];
            for (std::size_t j = 0; j < out_dim; ++j) row[j] += a * dpre.data[j];
        }
    }
}

} // namespace detail

// Backpropagates dLoss/dlogits through the trace. Parameter gradients are
// accumulated into *param_grads when non-null (they must be pre-sized).
inline Tensor backward(const NetworkModel& model, const ForwardTrace& trace,
                       const std::vector<double>& dlogits, Gradients* param_grads = nullptr) {
    const std::size_t L = model.layers.size();
    Tensor dpost; // gradient w.r.t. post-activation of current layer
    {
        const InterfaceShape& out = model.interfaces[L];
        dpost = Tensor({out.channels, out.height, out.width});
        std::copy(dlogits.begin(), dlogits.end(), dpost.data.begin());
    }
    for (std::size_t l = L; l-- > 0;) {
        const Layer& layer = model.layers[l];
        const InterfaceShape& in_shape = model.interfaces[l];
        const InterfaceShape& out_shape = model.interfaces[l + 1];
        Tensor dpre = dpost;
        if (layer.spec.activation == Activation::ReLU) {
            const Tensor& pre = trace.pre_activations[l];
            for (std::size_t i = 0; i < dpre.size(); ++i)
                if (pre.data[i] <= 0.0) dpre.data[i] = 0.0;
        }
        const Tensor& in = l == 0 ? trace.input : trace.post_activations[l - 1];
        Tensor din({in_shape.channels, in_shape.height, in_shape.width});
        Tensor* dw = param_grads ? &param_grads->weight_grads[l] : nullptr;
        Tensor* db = param_grads ? &param_grads->bias_grads[l] : nullptr;
        if (layer.spec.kind == LayerKind::Conv)
            detail::conv_backward(in, in_shape, layer, out_shape, dpre, din, dw, db);
        else
            detail::fc_backward(in, layer, dpre, din, dw, db);
        dpost = std::move(din);
    }
    return dpost;
}

inline Tensor input_gradient_from_trace(const NetworkModel& model, const ForwardTrace& trace,
                                        const LossDescriptor& loss) {
    return backward(model, trace, logit_gradient(trace, loss));
}

// dLoss/dinput, same shape as the input tensor.
inline Tensor input_gradient(const NetworkModel& model, const Tensor& input,
                             const LossDescriptor& loss) {
    const ForwardTrace trace = forward(model, input);
    return input_gradient_from_trace(model, trace, loss);
}

// ---------------------------------------------------------------------------
// Training: plain minibatch SGD
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 128;
    double learning_rate = 0.05;
    std::uint64_t seed = 1;
};

struct TrainReport {
    double final_train_accuracy = 0.0;
    double final_mean_loss = 0.0;
};

inline double evaluate_accuracy(const NetworkModel& model, const std::vector<Tensor>& images,
                                const std::vector<std::size_t>& labels) {
    if (images.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < images.size(); ++i)
        if (forward(model, images[i]).predicted_class == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(images.size());
}

inline TrainReport train(NetworkModel& model, const std::vector<Tensor>& images,
                         const std::vector<std::size_t>& labels, const TrainConfig& config) {
    if (images.empty()) throw std::invalid_argument("train: empty dataset");
    if (images.size() != labels.size())
        throw std::invalid_argument("train: image/label count mismatch");
    for (std::size_t label : labels)
        if (label >= model.class_count)
            throw std::invalid_argument("train: label " + std::to_string(label) +
                                        " out of range [0," +
                                        std::to_string(model.class_count) + ")");
    Rng rng(config.seed);
    std::vector<std::size_t> order(images.size());
    std::iota(order.begin(), order.end(), 0);

    Gradients grads;
    grads.weight_grads.resize(model.layers.size());
    grads.bias_grads.resize(model.layers.size());

    double last_loss = 0.0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                grads.weight_grads[l] = Tensor(model.layers[l].weights.shape);
                grads.bias_grads[l] = Tensor(model.layers[l].bias.shape);
            }
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t idx = order[k];
                const ForwardTrace trace = forward(model, images[idx]);
                const LossDescriptor loss = CrossEntropyLoss{labels[idx]};
                epoch_loss += loss_value(trace, loss);
                backward(model, trace, logit_gradient(trace, loss), &grads);
            }
            const double scale = config.learning_rate / static_cast<double>(end - start);
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                Layer& layer = model.layers[l];
                for (std::size_t i = 0; i < layer.weights.size(); ++i)
                    layer.weights.data[i] -= scale * grads.weight_grads[l].data[i];
                for (std::size_t i = 0; i < layer.bias.size(); ++i)
                    layer.bias.data[i] -= scale * grads.bias_grads[l].data[i];
            }
        }
        last_loss = epoch_loss / static_cast<double>(images.size());
    }
    TrainReport report;
    report.final_mean_loss = last_loss;
    report.final_train_accuracy = evaluate_accuracy(model, images, labels);
    return report;
}

} // namespace topodetect
