#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "topodetect/rng.hpp"
#include "topodetect/tensor.hpp"

namespace topodetect {

// Deterministic stroke-rendered digit images in the MNIST container layout.
// Each digit is a set of polylines in the unit square, rasterized with a soft
// pen profile after a random affine jitter. Useful as an offline stand-in for
// handwritten-digit data: same shape, same value range, learnable classes.

namespace synth_detail {

struct P {
    double x, y;
};

using Stroke = std::vector<P>;

inline Stroke arc(double cx, double cy, double rx, double ry, double deg_from, double deg_to,
                  int segments = 20) {
    Stroke s;
    for (int i = 0; i <= segments; ++i) {
        const double a =
            (deg_from + (deg_to - deg_from) * i / segments) * M_PI / 180.0;
        s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    }
    return s;
}

inline Stroke bezier(P a, P b, P c, int segments = 16) {
    Stroke s;
    for (int i = 0; i <= segments; ++i) {
        const double t = static_cast<double>(i) / segments;
        const double u = 1.0 - t;
        s.push_back({u * u * a.x + 2 * u * t * b.x + t * t * c.x,
                     u * u * a.y + 2 * u * t * b.y + t * t * c.y});
    }
    return s;
}

// y grows downward; the glyph body lives roughly in [0.3,0.7] x [0.15,0.85].
inline std::vector<Stroke> digit_strokes(int digit) {
    switch (digit) {
        case 0: return {arc(0.5, 0.5, 0.18, 0.32, 0.0, 360.0, 28)};
        case 1: return {{{0.40, 0.30}, {0.54, 0.16}, {0.54, 0.84}}};
        case 2:
            return {arc(0.5, 0.34, 0.17, 0.18, 180.0, 355.0),
                    {{0.66, 0.37}, {0.32, 0.84}, {0.70, 0.84}}};
        case 3:
            return {bezier({0.34, 0.19}, {0.72, 0.17}, {0.48, 0.48}),
                    bezier({0.48, 0.48}, {0.78, 0.58}, {0.42, 0.83}),
                    {{0.42, 0.83}, {0.33, 0.77}}};
        case 4: return {{{0.60, 0.16}, {0.30, 0.60}, {0.72, 0.60}}, {{0.60, 0.38}, {0.60, 0.84}}};
        case 5:
            return {{{0.68, 0.17}, {0.36, 0.17}, {0.34, 0.47}},
                    bezier({0.34, 0.47}, {0.76, 0.52}, {0.55, 0.80}),
                    {{0.55, 0.80}, {0.33, 0.78}}};
        case 6:
            return {bezier({0.64, 0.16}, {0.36, 0.30}, {0.36, 0.60}),
                    arc(0.50, 0.65, 0.15, 0.17, 0.0, 360.0)};
        case 7: return {{{0.31, 0.18}, {0.70, 0.18}, {0.45, 0.84}}};
        case 8:
            return {arc(0.5, 0.33, 0.14, 0.15, 0.0, 360.0),
                    arc(0.5, 0.66, 0.17, 0.17, 0.0, 360.0)};
        case 9:
            return {arc(0.52, 0.35, 0.15, 0.17, 0.0, 360.0),
                    bezier({0.67, 0.38}, {0.66, 0.68}, {0.49, 0.84})};
        default: return {};
    }
}

inline double segment_distance(double px, double py, const P& a, const P& b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double wx = px - a.x, wy = py - a.y;
    const double len2 = vx * vx + vy * vy;
    const double t = len2 == 0.0 ? 0.0 : std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0);
    const double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

} // namespace synth_detail

struct SynthConfig {
    std::size_t count = 1000;
    std::uint64_t seed = 7;
    std::size_t height = 28;
    std::size_t width = 28;
    double noise_sigma = 0.02;
};

inline Tensor render_digit(int digit, std::size_t height, std::size_t width, Rng& rng,
                           double noise_sigma) {
    using namespace synth_detail;
    const double angle = rng.uniform(-0.22, 0.22);
    const double scale = rng.uniform(0.85, 1.1);
    const double shift_x = rng.uniform(-0.07, 0.07);
    const double shift_y = rng.uniform(-0.05, 0.05);
    const double shear = rng.uniform(-0.12, 0.12);
    const double pen = rng.uniform(0.035, 0.055); // stroke radius in unit space
    const double ca = std::cos(angle), sa = std::sin(angle);

    std::vector<Stroke> strokes = digit_strokes(digit);
    for (Stroke& s : strokes) {
        for (P& p : s) {
            double x = (p.x - 0.5) * scale, y = (p.y - 0.5) * scale;
            x += shear * y;
            const double rx = ca * x - sa * y, ry = sa * x + ca * y;
            p.x = rx + 0.5 + shift_x;
            p.y = ry + 0.5 + shift_y;
        }
    }

    Tensor img({height, width});
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            const double px = (static_cast<double>(c) + 0.5) / static_cast<double>(width);
            const double py = (static_cast<double>(r) + 0.5) / static_cast<double>(height);
            double dist = 1e9;
            for (const Stroke& s : strokes)
                for (std::size_t i = 0; i + 1 < s.size(); ++i)
                    dist = std::min(dist, segment_distance(px, py, s[i], s[i + 1]));
            const double aa = 0.02; // soft edge width
            double v = std::clamp((pen - dist) / aa + 0.5, 0.0, 1.0);
            if (noise_sigma > 0.0) v += rng.normal(0.0, noise_sigma);
            img.data[r * width + c] = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

// Round-robin class labels, one rendering per image; fully determined by the
// seed.
inline std::pair<std::vector<Tensor>, std::vector<std::size_t>> make_synthetic_digits(
    const SynthConfig& config) {
    Rng rng(config.seed);
    std::vector<Tensor> images;
    std::vector<std::size_t> labels;
    images.reserve(config.count);
    labels.reserve(config.count);
    for (std::size_t i = 0; i < config.count; ++i) {
        const int digit = static_cast<int>(i % 10);
        images.push_back(render_digit(digit, config.height, config.width, rng,
                                      config.noise_sigma));
        labels.push_back(static_cast<std::size_t>(digit));
    }
    return {std::move(images), std::move(labels)};
}

} // namespace topodetect
