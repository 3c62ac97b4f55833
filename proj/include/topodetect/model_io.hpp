#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "topodetect/network.hpp"

namespace topodetect {

struct ModelVersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelCorruptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

constexpr char kModelMagic[4] = {'T', 'D', 'N', 'M'};
constexpr std::uint32_t kModelVersion = 1;

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f64(std::ostream& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t take_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw ModelCorruptError("model file: truncated");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

inline std::uint64_t take_u64(std::istream& in) {
    const std::uint64_t lo = take_u32(in);
    const std::uint64_t hi = take_u32(in);
    return lo | hi << 32;
}

inline double take_f64(std::istream& in) { return std::bit_cast<double>(take_u64(in)); }

inline void put_tensor(std::ostream& out, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) put_u64(out, d);
    put_u64(out, t.data.size());
    for (double v : t.data) put_f64(out, v);
}

inline Tensor take_tensor(std::istream& in) {
    const std::uint32_t rank = take_u32(in);
    if (rank > 8) throw ModelCorruptError("model file: implausible tensor rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(take_u64(in));
    const std::uint64_t count = take_u64(in);
    if (count != Tensor::element_count(shape))
        throw ModelCorruptError("model file: tensor size does not match shape");
    if (count > (1ull << 32)) throw ModelCorruptError("model file: implausible tensor size");
    Tensor t;
    t.shape = std::move(shape);
    t.data.resize(count);
    for (double& v : t.data) v = take_f64(in);
    return t;
}

} // namespace detail

// Versioned little-endian binary archive: magic, version, input shape,
// class count, then per layer the spec followed by weight and bias tensors.
inline void save_model(const NetworkModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out.write(detail::kModelMagic, 4);
    detail::put_u32(out, detail::kModelVersion);
    detail::put_u64(out, model.input_height);
    detail::put_u64(out, model.input_width);
    detail::put_u32(out, static_cast<std::uint32_t>(model.class_count));
    detail::put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
    for (const Layer& layer : model.layers) {
        const LayerSpec& s = layer.spec;
        out.put(static_cast<char>(s.kind));
        out.put(static_cast<char>(s.activation));
        detail::put_u64(out, s.filter_count);
        detail::put_u64(out, s.filter_size);
        detail::put_u64(out, s.stride);
        detail::put_u64(out, s.in_dim);
        detail::put_u64(out, s.out_dim);
        detail::put_tensor(out, layer.weights);
        detail::put_tensor(out, layer.bias);
    }
    if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

inline NetworkModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4)) throw ModelCorruptError("model file: truncated header");
    if (std::memcmp(magic, detail::kModelMagic, 4) != 0)
        throw ModelVersionError("model file: unrecognized magic bytes");
    const std::uint32_t version = detail::take_u32(in);
    if (version != detail::kModelVersion)
        throw ModelVersionError("model file: unsupported version " + std::to_string(version));
    NetworkModel model;
    model.input_height = static_cast<std::size_t>(detail::take_u64(in));
    model.input_width = static_cast<std::size_t>(detail::take_u64(in));
    model.class_count = detail::take_u32(in);
    const std::uint32_t layer_count = detail::take_u32(in);
    if (layer_count > 1024) throw ModelCorruptError("model file: implausible layer count");
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        Layer layer;
        int kind = in.get();
        int act = in.get();
        if (kind == EOF || act == EOF) throw ModelCorruptError("model file: truncated");
        if (kind > 1 || act > 1) throw ModelCorruptError("model file: invalid layer spec");
        layer.spec.kind = static_cast<LayerKind>(kind);
        layer.spec.activation = static_cast<Activation>(act);
        layer.spec.filter_count = static_cast<std::size_t>(detail::take_u64(in));
        layer.spec.filter_size = static_cast<std::size_t>(detail::take_u64(in));
        layer.spec.stride = static_cast<std::size_t>(detail::take_u64(in));
        layer.spec.in_dim = static_cast<std::size_t>(detail::take_u64(in));
        layer.spec.out_dim = static_cast<std::size_t>(detail::take_u64(in));
        layer.weights = detail::take_tensor(in);
        layer.bias = detail::take_tensor(in);
        model.layers.push_back(std::move(layer));
    }
    in.peek();
    if (!in.eof()) throw ModelCorruptError("model file: trailing bytes");
    try {
        model.finalize();
    } catch (const std::invalid_argument& e) {
        throw ModelCorruptError(std::string("model file: inconsistent contents: ") + e.what());
    }
    return model;
}

} // namespace topodetect
