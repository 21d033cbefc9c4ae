#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gnpp/arch.hpp"
#include "gnpp/tensor.hpp"

namespace gnpp {

// Receptive-field geometry of one layer's neurons on the input image.
// overlap is the linear (single-axis) overlap of two adjacent neurons,
// (rf - jump) / rf.
struct RfInfo {
    int rf = 1;        // receptive field side length in input pixels
    int jump = 1;      // input-pixel stride between adjacent neurons
    double overlap = 0.0;
    double center0 = 0.0; // input-pixel coordinate of neuron (0, 0)'s RF center
};

namespace detail {

template <typename Fn>
void rf_step(const LayerDesc& layer, int li, int& rf, int& jump, double& center0, Fn on_stop) {
    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, ConvDesc>) {
                rf += (l.k - 1) * jump;
                center0 += (double(l.k - 1) / 2.0 - l.pad) * jump;
                jump *= l.stride;
            } else if constexpr (std::is_same_v<L, MaxPoolDesc> || std::is_same_v<L, AvgPoolDesc>) {
                rf += (l.k - 1) * jump;
                center0 += double(l.k - 1) / 2.0 * jump;
                jump *= l.stride;
            } else if constexpr (std::is_same_v<L, GnppDesc>) {
                // one ring of side words: widens the field, leaves the grid alone
                rf += 2 * jump;
            } else if constexpr (std::is_same_v<L, GaussBlurDesc>) {
                rf += 2 * int(std::ceil(3.0 * l.std_dev)) * jump;
            } else {
                on_stop(li);
            }
        },
        layer);
}

} // namespace detail

// Receptive field of the output of layers[0..layer_index]. FC and dropout
// layers end the spatial recurrence; asking at or past one is an error.
inline RfInfo receptive_field(const ArchSpec& spec, std::size_t layer_index) {
    if (layer_index >= spec.layers.size())
        throw std::out_of_range("receptive_field: layer index " + std::to_string(layer_index) +
                                " out of range");
    RfInfo info;
    int rf = 1, jump = 1;
    double center0 = 0.0;
    for (std::size_t li = 0; li <= layer_index; ++li)
        detail::rf_step(spec.layers[li], int(li), rf, jump, center0, [](int at) {
            throw std::invalid_argument(
                "receptive_field: recurrence stops at layer " + std::to_string(at) +
                " (FC/dropout); pick an earlier layer");
        });
    info.rf = rf;
    info.jump = jump;
    info.overlap = rf > 0 ? double(rf - jump) / double(rf) : 0.0;
    info.center0 = center0;
    return info;
}

// Spatial footprint of one phrase-pooled neuron on its conv input: the union
// of k x k kernel windows anchored at the central word and each side word.
// For k=3 this is 9 without pooling, 21 for Type1, 25 for Type2.
inline int gnpp_footprint(int k, const std::vector<SideOffset>& offsets) {
    const int radius = 1; // all supported offsets lie within one ring
    const int side = k + 2 * radius;
    std::vector<std::uint8_t> mark(std::size_t(side) * side, 0);
    auto stamp = [&](int dy, int dx) {
        for (int y = 0; y < k; ++y)
            for (int x = 0; x < k; ++x)
                mark[std::size_t(dy + radius + y) * side + (dx + radius + x)] = 1;
    };
    stamp(0, 0);
    for (const auto& o : offsets) stamp(o.dy, o.dx);
    int count = 0;
    for (auto m : mark) count += m;
    return count;
}

enum class GnppCount { None, Type1, Type2 };

// Connections between a conv layer and its input, counted the latent-connection
// way: every output neuron reaches footprint * in_channels input neurons, where
// the footprint is k*k alone or the phrase union when pooling follows. Border
// clipping is deliberately ignored, matching how such counts are quoted.
inline std::uint64_t connection_count(const ArchSpec& spec, Shape4 input,
                                      std::size_t conv_layer_index, GnppCount gnpp) {
    if (conv_layer_index >= spec.layers.size())
        throw std::out_of_range("connection_count: layer index out of range");
    const auto* conv = std::get_if<ConvDesc>(&spec.layers[conv_layer_index]);
    if (!conv)
        throw std::invalid_argument("connection_count: layer " +
                                    std::to_string(conv_layer_index) + " is not a conv layer");
    const auto shapes = shape_infer(spec, input);
    const Shape4 out = shapes[conv_layer_index];
    const int in_c = conv_layer_index == 0 ? input.c : shapes[conv_layer_index - 1].c;

    int footprint = conv->k * conv->k;
    if (gnpp == GnppCount::Type1)
        footprint = gnpp_footprint(conv->k, gnpp_config(Neighborhood::Type1, 1.0).offsets);
    else if (gnpp == GnppCount::Type2)
        footprint = gnpp_footprint(conv->k, gnpp_config(Neighborhood::Type2, 1.0).offsets);

    return std::uint64_t(out.h) * out.w * out.c * std::uint64_t(footprint) * std::uint64_t(in_c);
}

// ---------------------------------------------------------------------------
// Heatmaps: average a layer's response over channels, then diffuse each neuron
// as a Gaussian over its receptive field on the input image.

struct Heatmap {
    int h = 0, w = 0;
    std::vector<double> accum;       // raw accumulation, before normalization
    std::vector<std::uint8_t> gray;  // min-max normalized to [0, 255]
};

inline Heatmap heatmap(const Tensor4<float>& features, const ArchSpec& spec,
                       std::size_t layer_index, double std_factor, Shape4 input,
                       int sample = 0) {
    const auto shapes = shape_infer(spec, input);
    if (layer_index >= shapes.size())
        throw std::out_of_range("heatmap: layer index out of range");
    const Shape4 at = shapes[layer_index];
    if (features.c != at.c || features.h != at.h || features.w != at.w)
        throw std::invalid_argument("heatmap: features shape " + features.shape().str() +
                                    " does not match inferred layer shape " + at.str());

    const RfInfo rf = receptive_field(spec, layer_index);
    const double sigma = std_factor * rf.rf;
    if (!(sigma > 0.0)) throw std::invalid_argument("heatmap: std factor must be > 0");

    const Tensor4<float> mean = channel_mean_map(features, sample);

    Heatmap hm;
    hm.h = input.h;
    hm.w = input.w;
    hm.accum.assign(std::size_t(input.h) * input.w, 0.0);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int y = 0; y < at.h; ++y) {
        for (int x = 0; x < at.w; ++x) {
            const double resp = mean.data[std::size_t(y) * at.w + x];
            if (resp == 0.0) continue;
            const double cy = rf.center0 + double(y) * rf.jump;
            const double cx = rf.center0 + double(x) * rf.jump;
            for (int a = 0; a < input.h; ++a) {
                const double dy = a - cy;
                for (int b = 0; b < input.w; ++b) {
                    const double dx = b - cx;
                    hm.accum[std::size_t(a) * input.w + b] +=
                        resp * std::exp(-(dy * dy + dx * dx) * inv2s2);
                }
            }
        }
    }

    double lo = hm.accum[0], hi = hm.accum[0];
    for (double v : hm.accum) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    hm.gray.resize(hm.accum.size());
    const double range = hi - lo;
    for (std::size_t t = 0; t < hm.accum.size(); ++t)
        hm.gray[t] = range > 0.0
                         ? std::uint8_t(std::lround((hm.accum[t] - lo) / range * 255.0))
                         : 0;
    return hm;
}

// Binary PGM (P5, maxval 255).
inline void write_pgm(const Heatmap& hm, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "P5\n" << hm.w << " " << hm.h << "\n255\n";
    f.write(reinterpret_cast<const char*>(hm.gray.data()), std::streamsize(hm.gray.size()));
    if (!f) throw std::runtime_error("PGM write failed: " + path);
}

} // namespace gnpp
