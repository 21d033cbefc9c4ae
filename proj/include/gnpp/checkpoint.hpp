#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gnpp/network.hpp"
#include "gnpp/tensor.hpp"

namespace gnpp {

// Fixed little-endian layout:
//   magic "GNPPNET1" (8 bytes)
//   u32 version (=1)
//   u32 arch text length, arch text bytes
//   u64 seed, u32 epoch
//   u32 parameter tensor count
//   per tensor: u32 n,c,h,w then n*c*h*w f32 values (same order as data[])
// Round-trip is bitwise exact.

namespace detail {

constexpr char kCheckpointMagic[8] = {'G', 'N', 'P', 'P', 'N', 'E', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

struct ByteReader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;
    std::string path;

    void need(std::size_t k) const {
        if (pos + k > buf.size())
            throw std::runtime_error("truncated checkpoint: " + path);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
};

} // namespace detail

struct Checkpoint {
    std::string arch_text;
    std::uint64_t seed = 0;
    std::uint32_t epoch = 0;
    std::vector<Shape4> shapes;
    std::vector<std::vector<float>> tensors;
};

inline std::string checkpoint_serialize(Network<float>& net, std::uint32_t epoch) {
    using namespace detail;
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    put_u32(out, kCheckpointVersion);
    const std::string& arch = net.arch.source_text;
    put_u32(out, std::uint32_t(arch.size()));
    out += arch;
    put_u64(out, net.seed);
    put_u32(out, epoch);
    const auto params = net.params();
    put_u32(out, std::uint32_t(params.size()));
    for (const auto& p : params) {
        put_u32(out, std::uint32_t(p.shape.n));
        put_u32(out, std::uint32_t(p.shape.c));
        put_u32(out, std::uint32_t(p.shape.h));
        put_u32(out, std::uint32_t(p.shape.w));
        const std::size_t bytes = p.value->size() * sizeof(float);
        const std::size_t off = out.size();
        out.resize(off + bytes);
        std::memcpy(out.data() + off, p.value->data(), bytes);
    }
    return out;
}

inline void checkpoint_save(Network<float>& net, std::uint32_t epoch, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    const std::string blob = checkpoint_serialize(net, epoch);
    f.write(blob.data(), std::streamsize(blob.size()));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Checkpoint checkpoint_read(const std::string& path) {
    using namespace detail;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> buf{std::istreambuf_iterator<char>(f),
                                  std::istreambuf_iterator<char>()};
    ByteReader r{buf, 0, path};

    r.need(sizeof kCheckpointMagic);
    if (std::memcmp(buf.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path + " (expected \"GNPPNET1\", got \"" +
                                 std::string(reinterpret_cast<const char*>(buf.data()),
                                             std::min<std::size_t>(buf.size(), 8)) + "\")");
    r.pos = sizeof kCheckpointMagic;
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                                 " in " + path);

    Checkpoint ck;
    const std::uint32_t arch_len = r.u32();
    r.need(arch_len);
    ck.arch_text.assign(reinterpret_cast<const char*>(buf.data() + r.pos), arch_len);
    r.pos += arch_len;
    ck.seed = r.u64();
    ck.epoch = r.u32();
    const std::uint32_t count = r.u32();
    ck.shapes.resize(count);
    ck.tensors.resize(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        Shape4 s;
        s.n = int(r.u32());
        s.c = int(r.u32());
        s.h = int(r.u32());
        s.w = int(r.u32());
        ck.shapes[t] = s;
        const std::size_t len = std::size_t(s.count());
        r.need(len * sizeof(float));
        ck.tensors[t].resize(len);
        std::memcpy(ck.tensors[t].data(), buf.data() + r.pos, len * sizeof(float));
        r.pos += len * sizeof(float);
    }
    return ck;
}

// Rebuilds the network from the stored arch text and overwrites its
// parameters with the stored tensors.
inline Network<float> checkpoint_load(const std::string& path, Shape4 input,
                                      bool strict_placement = true) {
    const Checkpoint ck = checkpoint_read(path);
    Network<float> net = build_network<float>(parse_arch(ck.arch_text), input, ck.seed,
                                              strict_placement);
    auto params = net.params();
    if (params.size() != ck.tensors.size())
        throw std::runtime_error("checkpoint parameter count mismatch: file has " +
                                 std::to_string(ck.tensors.size()) + ", network has " +
                                 std::to_string(params.size()));
    for (std::size_t t = 0; t < params.size(); ++t) {
        if (params[t].value->size() != ck.tensors[t].size() || params[t].shape != ck.shapes[t])
            throw std::runtime_error("checkpoint tensor " + std::to_string(t) +
                                     " shape mismatch for " + params[t].name);
        *params[t].value = ck.tensors[t];
    }
    return net;
}

} // namespace gnpp
