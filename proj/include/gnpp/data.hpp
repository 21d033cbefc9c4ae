#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#ifdef GNPP_HAVE_ZLIB
#include <zlib.h>
#endif

#include "gnpp/rng.hpp"
#include "gnpp/tensor.hpp"

namespace gnpp {

enum class Split { Train, Test };

// Labeled image collection, pixels scaled to [0,1] at load time.
struct Dataset {
    Tensor4<float> images; // (count, channels, h, w)
    std::vector<int> labels;
    int class_count = 0;
    Split split = Split::Train;
    std::vector<float> channel_mean; // set once mean subtraction has run
};

namespace detail {

inline std::vector<std::uint8_t> read_file_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

#ifdef GNPP_HAVE_ZLIB
inline std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in,
                                        const std::string& path) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw std::runtime_error("zlib init failed for " + path);
    std::vector<std::uint8_t> out;
    out.reserve(in.size() * 4);
    std::uint8_t buf[1 << 16];
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = uInt(in.size());
    int rc = Z_OK;
    do {
        zs.next_out = buf;
        zs.avail_out = sizeof buf;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw std::runtime_error("gzip decompression failed for " + path);
        }
        out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
    } while (rc != Z_STREAM_END);
    inflateEnd(&zs);
    return out;
}
#endif

// Reads a file, transparently decompressing when the name ends in ".gz".
inline std::vector<std::uint8_t> read_file(const std::string& path) {
    auto raw = read_file_raw(path);
    if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
#ifdef GNPP_HAVE_ZLIB
        return gunzip(raw, path);
#else
        throw std::runtime_error("gzip file but built without zlib: " + path);
#endif
    }
    return raw;
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off,
                               const std::string& path) {
    if (off + 4 > b.size()) throw std::runtime_error("truncated file: " + path);
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

inline std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

} // namespace detail

// IDX container (big-endian): magic 0x00000803 for image files, 0x00000801
// for label files. Pixels come back scaled by 1/255 as (n, 1, rows, cols).
inline Dataset load_mnist(const std::string& image_path, const std::string& label_path,
                          Split split = Split::Train) {
    using namespace detail;
    const auto img = read_file(image_path);
    const auto lab = read_file(label_path);

    const std::uint32_t img_magic = read_be32(img, 0, image_path);
    if (img_magic != 0x00000803u)
        throw std::runtime_error("bad IDX image magic " + hex32(img_magic) + " in " +
                                 image_path + " (expected 0x00000803)");
    const std::uint32_t lab_magic = read_be32(lab, 0, label_path);
    if (lab_magic != 0x00000801u)
        throw std::runtime_error("bad IDX label magic " + hex32(lab_magic) + " in " +
                                 label_path + " (expected 0x00000801)");

    const std::uint32_t n = read_be32(img, 4, image_path);
    const std::uint32_t rows = read_be32(img, 8, image_path);
    const std::uint32_t cols = read_be32(img, 12, image_path);
    const std::uint32_t n_lab = read_be32(lab, 4, label_path);
    if (n != n_lab)
        throw std::runtime_error("IDX count mismatch: " + std::to_string(n) + " images vs " +
                                 std::to_string(n_lab) + " labels");
    const std::size_t pixels = std::size_t(n) * rows * cols;
    if (img.size() < 16 + pixels) throw std::runtime_error("truncated file: " + image_path);
    if (lab.size() < 8 + n) throw std::runtime_error("truncated file: " + label_path);

    Dataset ds;
    ds.split = split;
    ds.class_count = 10;
    ds.images = Tensor4<float>(int(n), 1, int(rows), int(cols));
    for (std::size_t t = 0; t < pixels; ++t)
        ds.images.data[t] = float(img[16 + t]) * (1.0f / 255.0f);
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        ds.labels[i] = lab[8 + i];
        if (ds.labels[i] >= ds.class_count)
            throw std::runtime_error("IDX label " + std::to_string(ds.labels[i]) +
                                     " out of range in " + label_path);
    }
    return ds;
}

enum class CifarVariant { C10, C100 };

// CIFAR binary batches: C10 records are 1 label byte + 3072 pixel bytes
// (R, G, B planes, row-major); C100 adds a leading coarse-label byte and the
// fine label is used. Shape (n, 3, 32, 32), scaled 1/255.
inline Dataset load_cifar(const std::vector<std::string>& paths, CifarVariant variant,
                          Split split = Split::Train) {
    using namespace detail;
    const std::size_t record = variant == CifarVariant::C10 ? 3073 : 3074;
    const int label_off = variant == CifarVariant::C10 ? 0 : 1;

    std::size_t total = 0;
    std::vector<std::vector<std::uint8_t>> blobs;
    for (const auto& p : paths) {
        blobs.push_back(read_file(p));
        if (blobs.back().empty() || blobs.back().size() % record != 0)
            throw std::runtime_error("CIFAR file size " + std::to_string(blobs.back().size()) +
                                     " is not a multiple of record size " +
                                     std::to_string(record) + ": " + p);
        total += blobs.back().size() / record;
    }
    if (total == 0) throw std::runtime_error("load_cifar: no records");

    Dataset ds;
    ds.split = split;
    ds.class_count = variant == CifarVariant::C10 ? 10 : 100;
    ds.images = Tensor4<float>(int(total), 3, 32, 32);
    ds.labels.resize(total);

    std::size_t i = 0;
    for (const auto& blob : blobs) {
        for (std::size_t r = 0; r + record <= blob.size(); r += record, ++i) {
            ds.labels[i] = blob[r + label_off];
            if (ds.labels[i] >= ds.class_count)
                throw std::runtime_error("CIFAR label out of range: " +
                                         std::to_string(ds.labels[i]));
            const std::uint8_t* px = blob.data() + r + label_off + 1;
            float* dst = ds.images.plane(int(i), 0);
            for (std::size_t t = 0; t < 3072; ++t)
                dst[t] = float(px[t]) * (1.0f / 255.0f);
        }
    }
    return ds;
}

// Mirrors each sample horizontally with the given probability; one bernoulli
// draw per sample in batch order.
inline void augment_flip(Tensor4<float>& batch, double prob, Rng& rng) {
    if (prob < 0.0 || prob > 1.0) throw std::invalid_argument("flip prob must be in [0, 1]");
    for (int i = 0; i < batch.n; ++i) {
        if (!rng.bernoulli(prob)) continue;
        for (int d = 0; d < batch.c; ++d) {
            float* p = batch.plane(i, d);
            for (int y = 0; y < batch.h; ++y)
                for (int x0 = 0, x1 = batch.w - 1; x0 < x1; ++x0, --x1)
                    std::swap(p[y * batch.w + x0], p[y * batch.w + x1]);
        }
    }
}

enum class NormScheme { Scale255, MeanSubtract };

inline std::vector<float> compute_channel_mean(const Dataset& ds) {
    std::vector<double> acc(ds.images.c, 0.0);
    const std::size_t per_chan = std::size_t(ds.images.n) * ds.images.h * ds.images.w;
    for (int i = 0; i < ds.images.n; ++i)
        for (int d = 0; d < ds.images.c; ++d) {
            const float* p = ds.images.plane(i, d);
            for (int t = 0; t < ds.images.h * ds.images.w; ++t) acc[d] += p[t];
        }
    std::vector<float> mean(ds.images.c);
    for (int d = 0; d < ds.images.c; ++d) mean[d] = float(acc[d] / double(per_chan));
    return mean;
}

// Scale255 already happened at load, so it is a no-op here. MeanSubtract on a
// training split computes and records the per-channel mean; a test split must
// reuse the training mean.
inline void normalize(Dataset& ds, NormScheme scheme,
                      const std::vector<float>* train_mean = nullptr) {
    if (scheme == NormScheme::Scale255) return;
    std::vector<float> mean;
    if (ds.split == Split::Test) {
        if (!train_mean || train_mean->empty())
            throw std::invalid_argument(
                "normalize: MeanSubtract on a test split needs the stored training mean");
        mean = *train_mean;
    } else {
        mean = train_mean && !train_mean->empty() ? *train_mean : compute_channel_mean(ds);
    }
    if (int(mean.size()) != ds.images.c)
        throw std::invalid_argument("normalize: mean channel count mismatch");
    for (int i = 0; i < ds.images.n; ++i)
        for (int d = 0; d < ds.images.c; ++d) {
            float* p = ds.images.plane(i, d);
            for (int t = 0; t < ds.images.h * ds.images.w; ++t) p[t] -= mean[d];
        }
    ds.channel_mean = mean;
}

// Standard file names for the two dataset layouts, probing for .gz variants.
struct MnistPaths {
    std::string train_images, train_labels, test_images, test_labels;
};

inline std::optional<std::string> find_existing(const std::string& dir, const std::string& base) {
    namespace fs = std::filesystem;
    for (const auto& cand : {dir + "/" + base, dir + "/" + base + ".gz"})
        if (fs::exists(cand)) return cand;
    return std::nullopt;
}

inline std::optional<MnistPaths> find_mnist(const std::string& dir) {
    auto ti = find_existing(dir, "train-images-idx3-ubyte");
    auto tl = find_existing(dir, "train-labels-idx1-ubyte");
    auto vi = find_existing(dir, "t10k-images-idx3-ubyte");
    auto vl = find_existing(dir, "t10k-labels-idx1-ubyte");
    if (!ti || !tl || !vi || !vl) return std::nullopt;
    return MnistPaths{*ti, *tl, *vi, *vl};
}

struct CifarPaths {
    std::vector<std::string> train;
    std::vector<std::string> test;
    CifarVariant variant = CifarVariant::C10;
};

inline std::optional<CifarPaths> find_cifar(const std::string& dir, CifarVariant variant) {
    namespace fs = std::filesystem;
    CifarPaths out;
    out.variant = variant;
    if (variant == CifarVariant::C10) {
        for (const auto& sub : {std::string(""), std::string("/cifar-10-batches-bin")}) {
            out.train.clear();
            bool ok = true;
            for (int b = 1; b <= 5; ++b) {
                const std::string p = dir + sub + "/data_batch_" + std::to_string(b) + ".bin";
                if (!fs::exists(p)) {
                    ok = false;
                    break;
                }
                out.train.push_back(p);
            }
            const std::string t = dir + sub + "/test_batch.bin";
            if (ok && fs::exists(t)) {
                out.test = {t};
                return out;
            }
        }
        return std::nullopt;
    }
    for (const auto& sub : {std::string(""), std::string("/cifar-100-binary")}) {
        const std::string tr = dir + sub + "/train.bin", te = dir + sub + "/test.bin";
        if (fs::exists(tr) && fs::exists(te)) {
            out.train = {tr};
            out.test = {te};
            return out;
        }
    }
    return std::nullopt;
}

} // namespace gnpp
