#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gnpp/tensor.hpp"

namespace gnpp {

enum class Neighborhood { Type1, Type2 };

// One side-word position relative to the central word.
struct SideOffset {
    int dy, dx;
    double weight;
};

// Neighborhood table for geometric neural phrase pooling. Type1 is the four
// axis-aligned neighbors weighted sigma; Type2 adds the diagonals weighted
// sigma^2. The enumeration order below is fixed: it is the tie-break order for
// the cached argmax, so changing it changes trained results.
struct GnppConfig {
    Neighborhood nb_type = Neighborhood::Type1;
    double sigma = 1.0;
    std::vector<SideOffset> offsets;
};

inline GnppConfig gnpp_config(Neighborhood type, double sigma) {
    if (!(sigma > 0.0) || sigma > 1.0)
        throw std::invalid_argument("gnpp: sigma must be in (0, 1], got " + std::to_string(sigma));
    GnppConfig cfg;
    cfg.nb_type = type;
    cfg.sigma = sigma;
    cfg.offsets = {{-1, 0, sigma}, {1, 0, sigma}, {0, -1, sigma}, {0, 1, sigma}};
    if (type == Neighborhood::Type2) {
        const double s2 = sigma * sigma;
        cfg.offsets.push_back({-1, -1, s2});
        cfg.offsets.push_back({-1, 1, s2});
        cfg.offsets.push_back({1, -1, s2});
        cfg.offsets.push_back({1, 1, s2});
    }
    return cfg;
}

// Chosen side-word offset index per output cell, or kEmpty where no side word
// was in bounds. Needed to make the backward pass deterministic.
struct GnppCache {
    static constexpr std::int8_t kEmpty = -1;
    Shape4 shape;
    std::vector<std::int8_t> argmax;
};

// z = 1/2 * (x + max_k weight_k * x_side_k), maximum over in-bounds side words
// only; the central word is excluded from the maximization. An empty in-bounds
// side set contributes 0, so z = x/2 there. First offset index wins ties.
template <typename T>
std::pair<Tensor4<T>, GnppCache> gnpp_forward(const Tensor4<T>& x, const GnppConfig& cfg) {
    Tensor4<T> z(x.shape());
    GnppCache cache;
    cache.shape = x.shape();
    cache.argmax.assign(x.size(), GnppCache::kEmpty);

    const int K = int(cfg.offsets.size());
    for (int i = 0; i < x.n; ++i) {
        for (int d = 0; d < x.c; ++d) {
            const T* in = x.plane(i, d);
            T* out = z.plane(i, d);
            std::int8_t* arg = cache.argmax.data() + x.index(i, d, 0, 0);
            for (int y = 0; y < x.h; ++y) {
                for (int xx = 0; xx < x.w; ++xx) {
                    T best = T(0);
                    std::int8_t best_k = GnppCache::kEmpty;
                    for (int k = 0; k < K; ++k) {
                        const int sy = y + cfg.offsets[k].dy;
                        const int sx = xx + cfg.offsets[k].dx;
                        if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                        const T cand = T(cfg.offsets[k].weight) * in[sy * x.w + sx];
                        if (best_k == GnppCache::kEmpty || cand > best) {
                            best = cand;
                            best_k = std::int8_t(k);
                        }
                    }
                    const T side = (best_k == GnppCache::kEmpty) ? T(0) : best;
                    out[y * x.w + xx] = T(0.5) * (in[y * x.w + xx] + side);
                    arg[y * x.w + xx] = best_k;
                }
            }
        }
    }
    return {std::move(z), std::move(cache)};
}

// Subgradient of gnpp_forward: each cell keeps the 1/2 central term, and the
// side term routes 1/2 * weight to the single cached argmax position.
template <typename T>
Tensor4<T> gnpp_backward(const Tensor4<T>& grad_z, const GnppCache& cache, const GnppConfig& cfg) {
    if (grad_z.shape() != cache.shape)
        throw std::invalid_argument("gnpp_backward: grad shape " + grad_z.shape().str() +
                                    " does not match cache shape " + cache.shape.str());
    Tensor4<T> grad_x(grad_z.shape());
    for (int i = 0; i < grad_z.n; ++i) {
        for (int d = 0; d < grad_z.c; ++d) {
            const T* gz = grad_z.plane(i, d);
            T* gx = grad_x.plane(i, d);
            const std::int8_t* arg = cache.argmax.data() + grad_z.index(i, d, 0, 0);
            for (int y = 0; y < grad_z.h; ++y) {
                for (int xx = 0; xx < grad_z.w; ++xx) {
                    const T g = gz[y * grad_z.w + xx];
                    gx[y * grad_z.w + xx] += T(0.5) * g;
                    const std::int8_t k = arg[y * grad_z.w + xx];
                    if (k == GnppCache::kEmpty) continue;
                    const int sy = y + cfg.offsets[k].dy;
                    const int sx = xx + cfg.offsets[k].dx;
                    gx[sy * grad_z.w + sx] += T(0.5) * T(cfg.offsets[k].weight) * g;
                }
            }
        }
    }
    return grad_x;
}

// Normalized truncated Gaussian kernel, radius ceil(3*std). Sums to 1.
inline std::vector<double> gaussian_kernel_1d(double std_dev) {
    if (!(std_dev > 0.0))
        throw std::invalid_argument("gaussian blur: std must be > 0");
    const int radius = int(std::ceil(3.0 * std_dev));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        const double v = std::exp(-0.5 * double(t) * double(t) / (std_dev * std_dev));
        k[t + radius] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Per-channel 2D blur with zero-padded borders; shape preserved. Used as the
// linear-smoother control against phrase pooling.
template <typename T>
Tensor4<T> gaussian_blur_forward(const Tensor4<T>& x, double std_dev) {
    const std::vector<double> k1 = gaussian_kernel_1d(std_dev);
    const int radius = int(k1.size() / 2);
    Tensor4<T> out(x.shape());
    for (int i = 0; i < x.n; ++i) {
        for (int d = 0; d < x.c; ++d) {
            const T* in = x.plane(i, d);
            T* o = out.plane(i, d);
            for (int y = 0; y < x.h; ++y) {
                for (int xx = 0; xx < x.w; ++xx) {
                    double acc = 0.0;
                    for (int ty = -radius; ty <= radius; ++ty) {
                        const int sy = y + ty;
                        if (sy < 0 || sy >= x.h) continue;
                        const double ky = k1[ty + radius];
                        for (int tx = -radius; tx <= radius; ++tx) {
                            const int sx = xx + tx;
                            if (sx < 0 || sx >= x.w) continue;
                            acc += ky * k1[tx + radius] * double(in[sy * x.w + sx]);
                        }
                    }
                    o[y * x.w + xx] = T(acc);
                }
            }
        }
    }
    return out;
}

// The blur is correlation with a symmetric kernel under zero padding, which is
// a self-adjoint linear map, so the backward pass is the same operation.
template <typename T>
Tensor4<T> gaussian_blur_backward(const Tensor4<T>& grad_out, double std_dev) {
    return gaussian_blur_forward(grad_out, std_dev);
}

} // namespace gnpp
