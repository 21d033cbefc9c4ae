#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gnpp {

// Dense rank-4 array: (batch n, channels c, rows h, cols w), row-major with
// channels-major within a sample. Element (i,d,y,x) lives at flat index
// ((i*c + d)*h + y)*w + x. This layout is fixed; checkpoints depend on it.
struct Shape4 {
    int n = 0, c = 0, h = 0, w = 0;

    friend bool operator==(const Shape4&, const Shape4&) = default;

    std::uint64_t count() const {
        return std::uint64_t(n) * std::uint64_t(c) * std::uint64_t(h) * std::uint64_t(w);
    }

    std::string str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" +
               std::to_string(h) + "x" + std::to_string(w);
    }
};

template <typename T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor4() = default;

    Tensor4(Shape4 s, T fill = T(0)) : n(s.n), c(s.c), h(s.h), w(s.w) {
        if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1)
            throw std::invalid_argument("invalid tensor shape " + s.str() +
                                        ": all dimensions must be >= 1");
        data.assign(size(), fill);
    }

    Tensor4(int n_, int c_, int h_, int w_, T fill = T(0))
        : Tensor4(Shape4{n_, c_, h_, w_}, fill) {}

    Shape4 shape() const { return {n, c, h, w}; }
    std::size_t size() const { return std::size_t(n) * c * h * w; }

    std::size_t index(int i, int d, int y, int x) const {
        return ((std::size_t(i) * c + d) * h + y) * w + x;
    }

    T& at(int i, int d, int y, int x) { return data[index(i, d, y, x)]; }
    const T& at(int i, int d, int y, int x) const { return data[index(i, d, y, x)]; }

    // Start of the (sample, channel) plane; planes are contiguous h*w runs.
    T* plane(int i, int d) { return data.data() + index(i, d, 0, 0); }
    const T* plane(int i, int d) const { return data.data() + index(i, d, 0, 0); }

    void fill(T v) { data.assign(data.size(), v); }

    template <typename U>
    Tensor4<U> cast() const {
        Tensor4<U> out(shape());
        for (std::size_t k = 0; k < data.size(); ++k) out.data[k] = U(data[k]);
        return out;
    }
};

template <typename T>
Tensor4<T> tensor_new(Shape4 s, T fill) {
    return Tensor4<T>(s, fill);
}

// Inverse of Tensor4::index for a given shape.
inline void unflatten(Shape4 s, std::size_t flat, int& i, int& d, int& y, int& x) {
    x = int(flat % s.w);
    flat /= s.w;
    y = int(flat % s.h);
    flat /= s.h;
    d = int(flat % s.c);
    i = int(flat / s.c);
}

// Mean over channels of one sample: out(1,1,h,w)[y,x] = (1/c) * sum_d x[sample,d,y,x].
template <typename T>
Tensor4<T> channel_mean_map(const Tensor4<T>& x, int sample) {
    if (sample < 0 || sample >= x.n)
        throw std::out_of_range("channel_mean_map: sample " + std::to_string(sample) +
                                " out of range (n=" + std::to_string(x.n) + ")");
    Tensor4<T> out(1, 1, x.h, x.w);
    for (int d = 0; d < x.c; ++d) {
        const T* p = x.plane(sample, d);
        for (int k = 0; k < x.h * x.w; ++k) out.data[k] += p[k];
    }
    const T inv = T(1) / T(x.c);
    for (auto& v : out.data) v *= inv;
    return out;
}

} // namespace gnpp
