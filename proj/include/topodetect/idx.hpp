#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "topodetect/tensor.hpp"

namespace topodetect {

struct IdxFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DatasetHandle {
    std::vector<Tensor> images; // values in [0,1]
    std::vector<std::size_t> labels;
    std::size_t height = 0;
    std::size_t width = 0;
    std::string images_path;
    std::string labels_path;
    std::uint64_t images_checksum = 0;
    std::uint64_t labels_checksum = 0;
};

inline std::uint64_t fnv1a(const unsigned char* data, std::size_t size) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= data[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

namespace detail {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IdxFormatError("idx: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

inline std::uint32_t be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                          const std::string& path) {
    if (offset + 4 > bytes.size()) throw IdxFormatError("idx: truncated header in " + path);
    return static_cast<std::uint32_t>(bytes[offset]) << 24 |
           static_cast<std::uint32_t>(bytes[offset + 1]) << 16 |
           static_cast<std::uint32_t>(bytes[offset + 2]) << 8 |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

inline void put_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace detail

// Parses the big-endian IDX pair (images magic 0x00000803, labels magic
// 0x00000801); pixel bytes are scaled by 1/255.
inline DatasetHandle load_idx(const std::string& images_path, const std::string& labels_path) {
    const std::vector<unsigned char> ibytes = detail::read_file_bytes(images_path);
    const std::vector<unsigned char> lbytes = detail::read_file_bytes(labels_path);

    const std::uint32_t imagic = detail::be32(ibytes, 0, images_path);
    if (imagic != detail::kIdxImageMagic)
        throw IdxFormatError("idx: bad image magic in " + images_path + " (got 0x" +
                             [&] {
                                 char buf[16];
                                 std::snprintf(buf, sizeof(buf), "%08x", imagic);
                                 return std::string(buf);
                             }() +
                             ", want 0x00000803)");
    const std::uint32_t lmagic = detail::be32(lbytes, 0, labels_path);
    if (lmagic != detail::kIdxLabelMagic)
        throw IdxFormatError("idx: bad label magic in " + labels_path);

    const std::uint32_t image_count = detail::be32(ibytes, 4, images_path);
    const std::uint32_t height = detail::be32(ibytes, 8, images_path);
    const std::uint32_t width = detail::be32(ibytes, 12, images_path);
    const std::uint32_t label_count = detail::be32(lbytes, 4, labels_path);
    if (image_count != label_count)
        throw IdxFormatError("idx: image count " + std::to_string(image_count) +
                             " does not match label count " + std::to_string(label_count));
    const std::size_t pixel_count =
        static_cast<std::size_t>(image_count) * height * width;
    if (ibytes.size() != 16 + pixel_count)
        throw IdxFormatError("idx: truncated image payload in " + images_path);
    if (lbytes.size() != 8 + label_count)
        throw IdxFormatError("idx: truncated label payload in " + labels_path);

    DatasetHandle handle;
    handle.height = height;
    handle.width = width;
    handle.images_path = images_path;
    handle.labels_path = labels_path;
    handle.images_checksum = fnv1a(ibytes.data(), ibytes.size());
    handle.labels_checksum = fnv1a(lbytes.data(), lbytes.size());
    handle.images.reserve(image_count);
    handle.labels.reserve(label_count);
    std::size_t offset = 16;
    for (std::uint32_t i = 0; i < image_count; ++i) {
        Tensor img({height, width});
        for (std::size_t k = 0; k < static_cast<std::size_t>(height) * width; ++k)
            img.data[k] = static_cast<double>(ibytes[offset + k]) / 255.0;
        offset += static_cast<std::size_t>(height) * width;
        handle.images.push_back(std::move(img));
    }
    for (std::uint32_t i = 0; i < label_count; ++i)
        handle.labels.push_back(lbytes[8 + i]);
    return handle;
}

// Writes an IDX image/label pair; pixel doubles in [0,1] are quantized to
// bytes by rounding value * 255.
inline void write_idx(const std::string& images_path, const std::string& labels_path,
                      const std::vector<Tensor>& images,
                      const std::vector<std::size_t>& labels) {
    if (images.size() != labels.size())
        throw std::invalid_argument("write_idx: image/label count mismatch");
    if (images.empty()) throw std::invalid_argument("write_idx: empty dataset");
    const std::size_t height = images.front().shape.at(0);
    const std::size_t width = images.front().shape.at(1);
    std::ofstream iout(images_path, std::ios::binary);
    if (!iout) throw std::runtime_error("write_idx: cannot open " + images_path);
    detail::put_be32(iout, detail::kIdxImageMagic);
    detail::put_be32(iout, static_cast<std::uint32_t>(images.size()));
    detail::put_be32(iout, static_cast<std::uint32_t>(height));
    detail::put_be32(iout, static_cast<std::uint32_t>(width));
    for (const Tensor& img : images) {
        if (img.shape != std::vector<std::size_t>{height, width})
            throw std::invalid_argument("write_idx: inconsistent image shapes");
        for (double v : img.data) {
            const int byte = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            iout.put(static_cast<char>(byte));
        }
    }
    std::ofstream lout(labels_path, std::ios::binary);
    if (!lout) throw std::runtime_error("write_idx: cannot open " + labels_path);
    detail::put_be32(lout, detail::kIdxLabelMagic);
    detail::put_be32(lout, static_cast<std::uint32_t>(labels.size()));
    for (std::size_t label : labels) lout.put(static_cast<char>(label));
}

} // namespace topodetect
