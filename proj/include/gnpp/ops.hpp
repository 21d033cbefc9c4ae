#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gnpp/rng.hpp"
#include "gnpp/tensor.hpp"

namespace gnpp {

inline int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
inline int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return floor_div(in + 2 * pad - k, stride) + 1;
}

inline int pool_out_dim(int in, int k, int stride) {
    return ceil_div(in - k, stride) + 1;
}

// Output rows oy for which iy = oy*stride + k_off - pad lands inside [0, in).
// Hoisting this range keeps the inner loops branch-free and vectorizable.
inline std::pair<int, int> valid_out_range(int out, int in, int k_off, int stride, int pad) {
    int lo = std::max(0, ceil_div(pad - k_off, stride));
    int hi = std::min(out, floor_div(in - 1 + pad - k_off, stride) + 1);
    return {lo, std::max(lo, hi)};
}

// ---------------------------------------------------------------------------
// Convolution (cross-correlation, square kernels, zero padding)

template <typename T>
struct ConvGrads {
    Tensor4<T> input;
    Tensor4<T> kernel;
    std::vector<T> bias;
};

template <typename T>
void check_conv_shapes(const Tensor4<T>& x, const Tensor4<T>& kernel, int stride, int pad) {
    if (kernel.h != kernel.w)
        throw std::invalid_argument("conv: kernel must be square");
    if (kernel.c != x.c)
        throw std::invalid_argument("conv: kernel expects " + std::to_string(kernel.c) +
                                    " input channels, tensor has " + std::to_string(x.c));
    if (stride < 1 || pad < 0)
        throw std::invalid_argument("conv: stride must be >= 1 and pad >= 0");
    if (conv_out_dim(x.h, kernel.h, stride, pad) < 1 || conv_out_dim(x.w, kernel.w, stride, pad) < 1)
        throw std::invalid_argument("conv: output spatial dims would be < 1");
}

template <typename T>
Tensor4<T> conv_forward(const Tensor4<T>& x, const Tensor4<T>& kernel,
                        std::span<const T> bias, int stride, int pad) {
    check_conv_shapes(x, kernel, stride, pad);
    const int k = kernel.h;
    const int oh = conv_out_dim(x.h, k, stride, pad);
    const int ow = conv_out_dim(x.w, k, stride, pad);
    Tensor4<T> y(x.n, kernel.n, oh, ow);

#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < x.n; ++i) {
        for (int oc = 0; oc < kernel.n; ++oc) {
            T* out = y.plane(i, oc);
            const T b = bias.empty() ? T(0) : bias[oc];
            for (int t = 0; t < oh * ow; ++t) out[t] = b;
            for (int ic = 0; ic < x.c; ++ic) {
                const T* in = x.plane(i, ic);
                for (int ky = 0; ky < k; ++ky) {
                    auto [oy_lo, oy_hi] = valid_out_range(oh, x.h, ky, stride, pad);
                    for (int kx = 0; kx < k; ++kx) {
                        auto [ox_lo, ox_hi] = valid_out_range(ow, x.w, kx, stride, pad);
                        const T wv = kernel.at(oc, ic, ky, kx);
                        for (int oy = oy_lo; oy < oy_hi; ++oy) {
                            const T* irow = in + (oy * stride + ky - pad) * x.w - pad + kx;
                            T* orow = out + oy * ow;
                            if (stride == 1) {
                                for (int ox = ox_lo; ox < ox_hi; ++ox)
                                    orow[ox] += wv * irow[ox];
                            } else {
                                for (int ox = ox_lo; ox < ox_hi; ++ox)
                                    orow[ox] += wv * irow[ox * stride];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
ConvGrads<T> conv_backward(const Tensor4<T>& x, const Tensor4<T>& kernel,
                           const Tensor4<T>& grad_y, int stride, int pad) {
    check_conv_shapes(x, kernel, stride, pad);
    const int k = kernel.h;
    const int oh = grad_y.h, ow = grad_y.w;
    if (grad_y.n != x.n || grad_y.c != kernel.n ||
        oh != conv_out_dim(x.h, k, stride, pad) || ow != conv_out_dim(x.w, k, stride, pad))
        throw std::invalid_argument("conv_backward: grad shape mismatch");

    ConvGrads<T> g{Tensor4<T>(x.shape()), Tensor4<T>(kernel.shape()),
                   std::vector<T>(kernel.n, T(0))};

    // Input gradient: samples are independent, so the parallel writes are disjoint.
#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.n; ++i) {
        for (int oc = 0; oc < kernel.n; ++oc) {
            const T* gout = grad_y.plane(i, oc);
            for (int ic = 0; ic < x.c; ++ic) {
                T* gin = g.input.plane(i, ic);
                for (int ky = 0; ky < k; ++ky) {
                    auto [oy_lo, oy_hi] = valid_out_range(oh, x.h, ky, stride, pad);
                    for (int kx = 0; kx < k; ++kx) {
                        auto [ox_lo, ox_hi] = valid_out_range(ow, x.w, kx, stride, pad);
                        const T wv = kernel.at(oc, ic, ky, kx);
                        for (int oy = oy_lo; oy < oy_hi; ++oy) {
                            T* grow = gin + (oy * stride + ky - pad) * x.w - pad + kx;
                            const T* orow = gout + oy * ow;
                            for (int ox = ox_lo; ox < ox_hi; ++ox)
                                grow[ox * stride] += wv * orow[ox];
                        }
                    }
                }
            }
        }
    }

    // Kernel/bias gradients: one thread owns each output channel, the batch
    // accumulation order inside is fixed, so results do not depend on the
    // thread count.
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < kernel.n; ++oc) {
        T bias_acc = T(0);
        for (int i = 0; i < x.n; ++i) {
            const T* gout = grad_y.plane(i, oc);
            for (int t = 0; t < oh * ow; ++t) bias_acc += gout[t];
            for (int ic = 0; ic < x.c; ++ic) {
                const T* in = x.plane(i, ic);
                for (int ky = 0; ky < k; ++ky) {
                    auto [oy_lo, oy_hi] = valid_out_range(oh, x.h, ky, stride, pad);
                    for (int kx = 0; kx < k; ++kx) {
                        auto [ox_lo, ox_hi] = valid_out_range(ow, x.w, kx, stride, pad);
                        T acc = T(0);
                        for (int oy = oy_lo; oy < oy_hi; ++oy) {
                            const T* irow = in + (oy * stride + ky - pad) * x.w - pad + kx;
                            const T* orow = gout + oy * ow;
                            if (stride == 1) {
                                for (int ox = ox_lo; ox < ox_hi; ++ox)
                                    acc += irow[ox] * orow[ox];
                            } else {
                                for (int ox = ox_lo; ox < ox_hi; ++ox)
                                    acc += irow[ox * stride] * orow[ox];
                            }
                        }
                        g.kernel.at(oc, ic, ky, kx) += acc;
                    }
                }
            }
        }
        g.bias[oc] = bias_acc;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Pooling. Windows may overhang the border; out-of-bounds cells are excluded
// (max ignores them, average divides by the in-bounds count).

enum class PoolKind { Max, Avg };

struct PoolCache {
    PoolKind kind = PoolKind::Max;
    int k = 0, stride = 0;
    Shape4 in_shape;
    std::vector<std::int32_t> argmax; // input flat index per output cell (Max only)
};

template <typename T>
std::pair<Tensor4<T>, PoolCache> pool_forward(const Tensor4<T>& x, PoolKind kind,
                                              int k, int stride) {
    if (k < 1 || stride < 1)
        throw std::invalid_argument("pool: window and stride must be >= 1");
    if (k > x.h && k > x.w)
        throw std::invalid_argument("pool: window " + std::to_string(k) +
                                    " larger than input in both dims");
    const int oh = pool_out_dim(x.h, k, stride);
    const int ow = pool_out_dim(x.w, k, stride);
    if (oh < 1 || ow < 1)
        throw std::invalid_argument("pool: output spatial dims would be < 1");

    Tensor4<T> y(x.n, x.c, oh, ow);
    PoolCache cache{kind, k, stride, x.shape(), {}};
    if (kind == PoolKind::Max) cache.argmax.assign(y.size(), -1);

#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < x.n; ++i) {
        for (int d = 0; d < x.c; ++d) {
            const T* in = x.plane(i, d);
            T* out = y.plane(i, d);
            const std::size_t in_base = x.index(i, d, 0, 0);
            const std::size_t out_base = y.index(i, d, 0, 0);
            for (int oy = 0; oy < oh; ++oy) {
                const int y0 = oy * stride, y1 = std::min(y0 + k, x.h);
                for (int ox = 0; ox < ow; ++ox) {
                    const int x0 = ox * stride, x1 = std::min(x0 + k, x.w);
                    if (kind == PoolKind::Max) {
                        T best = in[y0 * x.w + x0];
                        int best_at = y0 * x.w + x0;
                        for (int yy = y0; yy < y1; ++yy)
                            for (int xx = x0; xx < x1; ++xx)
                                if (in[yy * x.w + xx] > best) {
                                    best = in[yy * x.w + xx];
                                    best_at = yy * x.w + xx;
                                }
                        out[oy * ow + ox] = best;
                        cache.argmax[out_base + oy * ow + ox] =
                            std::int32_t(in_base + best_at);
                    } else {
                        T acc = T(0);
                        for (int yy = y0; yy < y1; ++yy)
                            for (int xx = x0; xx < x1; ++xx)
                                acc += in[yy * x.w + xx];
                        out[oy * ow + ox] = acc / T((y1 - y0) * (x1 - x0));
                    }
                }
            }
        }
    }
    return {std::move(y), std::move(cache)};
}

template <typename T>
Tensor4<T> pool_backward(const Tensor4<T>& grad_y, const PoolCache& cache) {
    const Shape4 s = cache.in_shape;
    const int oh = pool_out_dim(s.h, cache.k, cache.stride);
    const int ow = pool_out_dim(s.w, cache.k, cache.stride);
    if (grad_y.n != s.n || grad_y.c != s.c || grad_y.h != oh || grad_y.w != ow)
        throw std::invalid_argument("pool_backward: grad shape mismatch");

    Tensor4<T> gx(s);
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < s.n; ++i) {
        for (int d = 0; d < s.c; ++d) {
            const T* gout = grad_y.plane(i, d);
            T* gin = gx.plane(i, d);
            const std::size_t out_base = grad_y.index(i, d, 0, 0);
            for (int oy = 0; oy < oh; ++oy) {
                const int y0 = oy * cache.stride, y1 = std::min(y0 + cache.k, s.h);
                for (int ox = 0; ox < ow; ++ox) {
                    const T g = gout[oy * ow + ox];
                    if (cache.kind == PoolKind::Max) {
                        gx.data[cache.argmax[out_base + oy * ow + ox]] += g;
                    } else {
                        const int x0 = ox * cache.stride, x1 = std::min(x0 + cache.k, s.w);
                        const T share = g / T((y1 - y0) * (x1 - x0));
                        for (int yy = y0; yy < y1; ++yy)
                            for (int xx = x0; xx < x1; ++xx)
                                gin[yy * s.w + xx] += share;
                    }
                }
            }
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
    Tensor4<T> y(x.shape());
    for (std::size_t t = 0; t < x.data.size(); ++t)
        y.data[t] = x.data[t] > T(0) ? x.data[t] : T(0);
    return y;
}

// Gradient passes where the forward input was strictly positive.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& grad_y) {
    if (x.shape() != grad_y.shape())
        throw std::invalid_argument("relu_backward: shape mismatch");
    Tensor4<T> gx(x.shape());
    for (std::size_t t = 0; t < x.data.size(); ++t)
        gx.data[t] = x.data[t] > T(0) ? grad_y.data[t] : T(0);
    return gx;
}

// ---------------------------------------------------------------------------
// Fully connected: y = W * flatten(x) + b, weight stored (out, in) row-major.

template <typename T>
struct FcParams {
    Tensor4<T> weight; // (out, in, 1, 1)
    std::vector<T> bias;
};

template <typename T>
struct FcGrads {
    Tensor4<T> input;
    Tensor4<T> weight;
    std::vector<T> bias;
};

template <typename T>
Tensor4<T> fc_forward(const Tensor4<T>& x, const Tensor4<T>& weight, std::span<const T> bias) {
    const int in = x.c * x.h * x.w;
    const int out = weight.n;
    if (weight.c != in || weight.h != 1 || weight.w != 1)
        throw std::invalid_argument("fc: weight expects input size " + std::to_string(weight.c) +
                                    ", tensor flattens to " + std::to_string(in));
    Tensor4<T> y(x.n, out, 1, 1);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.n; ++i) {
        const T* xi = x.data.data() + std::size_t(i) * in;
        T* yi = y.data.data() + std::size_t(i) * out;
        for (int o = 0; o < out; ++o) {
            const T* wrow = weight.data.data() + std::size_t(o) * in;
            T acc = bias.empty() ? T(0) : bias[o];
            for (int t = 0; t < in; ++t) acc += wrow[t] * xi[t];
            yi[o] = acc;
        }
    }
    return y;
}

template <typename T>
FcGrads<T> fc_backward(const Tensor4<T>& x, const Tensor4<T>& weight, const Tensor4<T>& grad_y) {
    const int in = x.c * x.h * x.w;
    const int out = weight.n;
    if (grad_y.n != x.n || grad_y.c != out || grad_y.h != 1 || grad_y.w != 1)
        throw std::invalid_argument("fc_backward: grad shape mismatch");

    FcGrads<T> g{Tensor4<T>(x.shape()), Tensor4<T>(weight.shape()), std::vector<T>(out, T(0))};

#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.n; ++i) {
        const T* gy = grad_y.data.data() + std::size_t(i) * out;
        T* gx = g.input.data.data() + std::size_t(i) * in;
        for (int o = 0; o < out; ++o) {
            const T* wrow = weight.data.data() + std::size_t(o) * in;
            const T a = gy[o];
            for (int t = 0; t < in; ++t) gx[t] += a * wrow[t];
        }
    }

#pragma omp parallel for schedule(static)
    for (int o = 0; o < out; ++o) {
        T* gw = g.weight.data.data() + std::size_t(o) * in;
        T bacc = T(0);
        for (int i = 0; i < x.n; ++i) {
            const T a = grad_y.data[std::size_t(i) * out + o];
            const T* xi = x.data.data() + std::size_t(i) * in;
            for (int t = 0; t < in; ++t) gw[t] += a * xi[t];
            bacc += a;
        }
        g.bias[o] = bacc;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Dropout (inverted: survivors scaled by 1/(1-ratio) at train time, identity
// at inference). The mask is drawn in flat element order from the rng.

template <typename T>
std::pair<Tensor4<T>, std::vector<std::uint8_t>>
dropout_forward(const Tensor4<T>& x, double ratio, Rng& rng, bool training) {
    if (ratio < 0.0 || ratio >= 1.0)
        throw std::invalid_argument("dropout: ratio must be in [0, 1)");
    Tensor4<T> y(x.shape());
    std::vector<std::uint8_t> mask(x.size(), 1);
    if (!training || ratio == 0.0) {
        y.data = x.data;
        return {std::move(y), std::move(mask)};
    }
    const T scale = T(1.0 / (1.0 - ratio));
    for (std::size_t t = 0; t < x.data.size(); ++t) {
        if (rng.uniform01() < ratio) {
            mask[t] = 0;
            y.data[t] = T(0);
        } else {
            y.data[t] = x.data[t] * scale;
        }
    }
    return {std::move(y), std::move(mask)};
}

template <typename T>
Tensor4<T> dropout_backward(const Tensor4<T>& grad_y, const std::vector<std::uint8_t>& mask,
                            double ratio) {
    if (mask.size() != grad_y.size())
        throw std::invalid_argument("dropout_backward: mask size mismatch");
    Tensor4<T> gx(grad_y.shape());
    const T scale = T(1.0 / (1.0 - ratio));
    for (std::size_t t = 0; t < gx.data.size(); ++t)
        gx.data[t] = mask[t] ? grad_y.data[t] * scale : T(0);
    return gx;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy over logits shaped (n, classes, 1, 1).

template <typename T>
struct SoftmaxResult {
    double loss = 0.0;          // mean over the batch of -log p[label]
    Tensor4<T> grad;            // (p - onehot) / n
    std::vector<int> predicted; // argmax per sample, first max wins
};

template <typename T>
SoftmaxResult<T> softmax_xent(const Tensor4<T>& logits, std::span<const int> labels) {
    if (logits.h != 1 || logits.w != 1)
        throw std::invalid_argument("softmax_xent: logits must be (n, classes, 1, 1)");
    const int n = logits.n, classes = logits.c;
    if (int(labels.size()) != n)
        throw std::invalid_argument("softmax_xent: label count mismatch");

    SoftmaxResult<T> r;
    r.grad = Tensor4<T>(logits.shape());
    r.predicted.resize(n);
    double loss_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= classes)
            throw std::out_of_range("softmax_xent: label " + std::to_string(labels[i]) +
                                    " out of range [0, " + std::to_string(classes) + ")");
        const T* row = logits.data.data() + std::size_t(i) * classes;
        T* grow = r.grad.data.data() + std::size_t(i) * classes;
        T mx = row[0];
        int arg = 0;
        for (int j = 1; j < classes; ++j)
            if (row[j] > mx) {
                mx = row[j];
                arg = j;
            }
        r.predicted[i] = arg;
        double denom = 0.0;
        for (int j = 0; j < classes; ++j) denom += std::exp(double(row[j] - mx));
        const double log_denom = std::log(denom);
        loss_sum += log_denom - double(row[labels[i]] - mx);
        for (int j = 0; j < classes; ++j) {
            const double p = std::exp(double(row[j] - mx)) / denom;
            grow[j] = T((p - (j == labels[i] ? 1.0 : 0.0)) / n);
        }
    }
    r.loss = loss_sum / n;
    return r;
}

} // namespace gnpp
