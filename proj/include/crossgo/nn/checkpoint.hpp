#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "crossgo/binary_io.hpp"
#include "crossgo/nn/conv.hpp"

namespace crossgo::nn {

// Layout (all integers little-endian):
//   "CGPN" | u32 version | u32 layer count
//   per layer: u32 in, u32 out, u32 kernel, u32 stride, u32 pad, i32 cross width (-1 = unmasked)
//              f32 weights[out*in*k*k] | f32 bias[out] | mask bitmap (masked layers only)
// Mask bitmaps hold k*k bits row-major, least significant bit first, padded to a byte.
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_layers(std::ostream& out, const std::vector<const ConvLayer<float>*>& layers)
{
    out.write("CGPN", 4);
    io::put_le<std::uint32_t>(out, kCheckpointVersion);
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
    for (const auto* l : layers) {
        io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l->in_channels));
        io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l->out_channels));
        io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l->kernel));
        io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l->stride));
        io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l->pad));
        io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l->mask ? l->mask->width() : -1));
        for (float w : l->weights.values()) io::put_f32(out, w);
        for (float b : l->bias.values()) io::put_f32(out, b);
        if (l->mask) {
            const auto& bits = l->mask->bits();
            for (std::size_t i = 0; i < bits.size(); i += 8) {
                std::uint8_t byte = 0;
                for (std::size_t j = 0; j < 8 && i + j < bits.size(); ++j)
                    if (bits[i + j]) byte |= static_cast<std::uint8_t>(1u << j);
                io::put_le<std::uint8_t>(out, byte);
            }
        }
    }
    if (!out) throw std::runtime_error("checkpoint write failed");
}

inline std::vector<ConvLayer<float>> read_layers(std::istream& in)
{
    io::expect_magic(in, "CGPN");
    const auto version = io::get_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) throw io::FormatError("unsupported checkpoint version " + std::to_string(version));
    const auto count = io::get_le<std::uint32_t>(in);
    std::vector<ConvLayer<float>> layers;
    layers.reserve(count);
    for (std::uint32_t li = 0; li < count; ++li) {
        const int in_ch = static_cast<int>(io::get_le<std::uint32_t>(in));
        const int out_ch = static_cast<int>(io::get_le<std::uint32_t>(in));
        const int kernel = static_cast<int>(io::get_le<std::uint32_t>(in));
        const int stride = static_cast<int>(io::get_le<std::uint32_t>(in));
        const int pad = static_cast<int>(io::get_le<std::uint32_t>(in));
        const auto width = static_cast<std::int32_t>(io::get_le<std::uint32_t>(in));
        if (in_ch <= 0 || out_ch <= 0 || kernel <= 0 || kernel > 255 || stride <= 0 || in_ch > (1 << 16) ||
            out_ch > (1 << 16))
            throw io::FormatError("corrupt layer descriptor");
        std::optional<CrossMask> mask;
        if (width >= 0) mask = CrossMask(kernel, width);
        ConvLayer<float> layer(in_ch, out_ch, kernel, pad, mask, stride);
        for (auto& w : layer.weights.values()) w = io::get_f32(in);
        for (auto& b : layer.bias.values()) b = io::get_f32(in);
        if (mask) {
            std::vector<std::uint8_t> bits(static_cast<std::size_t>(kernel * kernel));
            for (std::size_t i = 0; i < bits.size(); i += 8) {
                const auto byte = io::get_le<std::uint8_t>(in);
                for (std::size_t j = 0; j < 8 && i + j < bits.size(); ++j) bits[i + j] = (byte >> j) & 1u;
            }
            if (bits != mask->bits()) throw io::FormatError("stored mask bitmap disagrees with cross width");
        }
        layers.push_back(std::move(layer));
    }
    return layers;
}

}  // namespace crossgo::nn
