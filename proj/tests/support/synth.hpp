#pragma once

// Synthetic data for tests: random tensors, a small learnable image task, and
// writers that produce files in the IDX / CIFAR binary layouts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gnpp/data.hpp"
#include "gnpp/rng.hpp"
#include "gnpp/tensor.hpp"

namespace synth {

template <typename T>
gnpp::Tensor4<T> random_tensor(gnpp::Shape4 s, gnpp::Rng& rng, double lo = -1.0,
                               double hi = 1.0) {
    gnpp::Tensor4<T> t(s);
    for (auto& v : t.data) v = T(lo + (hi - lo) * rng.uniform01());
    return t;
}

// Labeled images where class determines which quadrant carries a bright blob.
// Easy enough that a couple of epochs of a small net separates the classes.
inline gnpp::Dataset blob_dataset(int count, int classes, int hw, std::uint64_t seed,
                                  gnpp::Split split) {
    gnpp::Dataset ds;
    ds.class_count = classes;
    ds.split = split;
    ds.images = gnpp::Tensor4<float>(count, 1, hw, hw);
    ds.labels.resize(count);
    gnpp::Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        const int label = int(rng.below(std::uint64_t(classes)));
        ds.labels[i] = label;
        const int cy = (label % 2 == 0 ? hw / 4 : 3 * hw / 4);
        const int cx = (label / 2 % 2 == 0 ? hw / 4 : 3 * hw / 4);
        const double stretch = 1.0 + 0.6 * (label / 4);
        float* p = ds.images.plane(i, 0);
        for (int y = 0; y < hw; ++y)
            for (int x = 0; x < hw; ++x) {
                const double dy = (y - cy) / 2.0, dx = (x - cx) / (2.0 * stretch);
                double v = std::exp(-(dy * dy + dx * dx)) + 0.05 * rng.uniform01();
                p[y * hw + x] = float(std::min(v, 1.0));
            }
    }
    return ds;
}

inline void put_be32(std::ofstream& f, std::uint32_t v) {
    const char b[4] = {char((v >> 24) & 0xff), char((v >> 16) & 0xff), char((v >> 8) & 0xff),
                       char(v & 0xff)};
    f.write(b, 4);
}

// Writes a dataset as an IDX image/label file pair (magic 0x803 / 0x801).
inline void write_idx_pair(const gnpp::Dataset& ds, const std::string& image_path,
                           const std::string& label_path) {
    std::ofstream fi(image_path, std::ios::binary | std::ios::trunc);
    put_be32(fi, 0x00000803u);
    put_be32(fi, std::uint32_t(ds.images.n));
    put_be32(fi, std::uint32_t(ds.images.h));
    put_be32(fi, std::uint32_t(ds.images.w));
    for (float v : ds.images.data) {
        const int q = int(v * 255.0f + 0.5f);
        fi.put(char(q < 0 ? 0 : (q > 255 ? 255 : q)));
    }
    std::ofstream fl(label_path, std::ios::binary | std::ios::trunc);
    put_be32(fl, 0x00000801u);
    put_be32(fl, std::uint32_t(ds.labels.size()));
    for (int l : ds.labels) fl.put(char(l));
}

// Writes CIFAR-style binary records from raw byte planes.
inline void write_cifar_file(const std::string& path,
                             const std::vector<std::uint8_t>& labels,
                             const std::vector<std::vector<std::uint8_t>>& pixel_planes,
                             bool with_coarse) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (with_coarse) f.put(char(labels[i] / 5)); // arbitrary coarse grouping
        f.put(char(labels[i]));
        f.write(reinterpret_cast<const char*>(pixel_planes[i].data()),
                std::streamsize(pixel_planes[i].size()));
    }
}

// Writes an MNIST-layout directory (train + t10k IDX pairs) for CLI runs.
inline void write_mnist_dir(const std::string& dir, int train_count, int test_count, int hw,
                            std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    const auto train = blob_dataset(train_count, 10, hw, seed, gnpp::Split::Train);
    const auto test = blob_dataset(test_count, 10, hw, seed + 99, gnpp::Split::Test);
    write_idx_pair(train, dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    write_idx_pair(test, dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
}

} // namespace synth
