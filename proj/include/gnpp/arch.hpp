#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gnpp/ops.hpp"
#include "gnpp/phrase_pool.hpp"
#include "gnpp/tensor.hpp"

namespace gnpp {

// Abbreviated network notation, e.g.
//   {C5(S1P0)@20-MP2(S2)}{C5(S1P0)@50-MP2(S2)}{FC500}{FC10}
// Tokens: C<k>(S<s>[P<p>])@<d>, MP<k>(S<s>), AP<k>(S<s>), FC<n>, D<ratio>,
// plus G1(<sigma>) / G2(<sigma>) for phrase pooling and GB(<std>) for the
// Gaussian-blur control. Braces only group visually; semantics depend on the
// flattened layer order alone.

struct ConvDesc {
    int k, stride, pad, out_channels;
    friend bool operator==(const ConvDesc&, const ConvDesc&) = default;
};
struct MaxPoolDesc {
    int k, stride;
    friend bool operator==(const MaxPoolDesc&, const MaxPoolDesc&) = default;
};
struct AvgPoolDesc {
    int k, stride;
    friend bool operator==(const AvgPoolDesc&, const AvgPoolDesc&) = default;
};
struct FcDesc {
    int out;
    friend bool operator==(const FcDesc&, const FcDesc&) = default;
};
struct DropoutDesc {
    double ratio;
    friend bool operator==(const DropoutDesc&, const DropoutDesc&) = default;
};
struct GnppDesc {
    Neighborhood nb_type;
    double sigma;
    friend bool operator==(const GnppDesc&, const GnppDesc&) = default;
};
struct GaussBlurDesc {
    double std_dev;
    friend bool operator==(const GaussBlurDesc&, const GaussBlurDesc&) = default;
};

using LayerDesc = std::variant<ConvDesc, MaxPoolDesc, AvgPoolDesc, FcDesc,
                               DropoutDesc, GnppDesc, GaussBlurDesc>;

struct ArchSpec {
    std::vector<LayerDesc> layers;
    std::string source_text;
};

inline bool same_layers(const ArchSpec& a, const ArchSpec& b) { return a.layers == b.layers; }

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t offset, const std::string& what)
        : std::runtime_error("arch parse error at byte " + std::to_string(offset) + ": " + what),
          offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_ = 0;
};

namespace detail {

class ArchParser {
public:
    explicit ArchParser(const std::string& text) : text_(text) {}

    std::vector<LayerDesc> run() {
        std::vector<LayerDesc> layers;
        skip_ws();
        if (eof()) fail("expected '{'");
        while (!eof()) {
            expect('{');
            layers.push_back(layer());
            skip_ws();
            while (!eof() && peek() == '-') {
                ++pos_;
                layers.push_back(layer());
                skip_ws();
            }
            if (eof()) fail("unbalanced braces: expected '}' before end of input");
            expect('}');
            skip_ws();
        }
        if (layers.empty()) fail("empty architecture");
        if (!std::holds_alternative<FcDesc>(layers.back()))
            fail("final layer must be FC");
        return layers;
    }

private:
    const std::string& text_;
    std::size_t pos_ = 0;

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r'))
            ++pos_;
    }

    void expect(char c) {
        skip_ws();
        if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    int integer() {
        skip_ws();
        if (eof() || peek() < '0' || peek() > '9') fail("expected integer");
        long v = 0;
        while (!eof() && peek() >= '0' && peek() <= '9') {
            v = v * 10 + (peek() - '0');
            if (v > 1'000'000'000) fail("integer too large");
            ++pos_;
        }
        return int(v);
    }

    // Plain decimal only (no sign, no exponent): '-' separates tokens.
    double number() {
        skip_ws();
        const std::size_t start = pos_;
        while (!eof() && ((peek() >= '0' && peek() <= '9') || peek() == '.')) ++pos_;
        if (pos_ == start) fail("expected number");
        try {
            return std::stod(text_.substr(start, pos_ - start));
        } catch (const std::exception&) {
            throw ParseError(start, "malformed number '" + text_.substr(start, pos_ - start) + "'");
        }
    }

    LayerDesc layer() {
        skip_ws();
        if (eof()) fail("expected layer token");
        const std::size_t start = pos_;
        switch (peek()) {
        case 'C': {
            ++pos_;
            ConvDesc conv{integer(), 1, 0, 0};
            expect('(');
            expect('S');
            conv.stride = integer();
            skip_ws();
            if (!eof() && peek() == 'P') {
                ++pos_;
                conv.pad = integer();
            }
            expect(')');
            expect('@');
            conv.out_channels = integer();
            if (conv.k < 1 || conv.stride < 1 || conv.out_channels < 1)
                throw ParseError(start, "conv kernel/stride/channels must be >= 1");
            return conv;
        }
        case 'M':
        case 'A': {
            const bool is_max = peek() == 'M';
            ++pos_;
            if (eof() || peek() != 'P') fail(is_max ? "expected 'MP'" : "expected 'AP'");
            ++pos_;
            const int k = integer();
            expect('(');
            expect('S');
            const int s = integer();
            expect(')');
            if (k < 1 || s < 1) throw ParseError(start, "pool window/stride must be >= 1");
            if (is_max) return MaxPoolDesc{k, s};
            return AvgPoolDesc{k, s};
        }
        case 'F': {
            ++pos_;
            if (eof() || peek() != 'C') fail("expected 'FC'");
            ++pos_;
            const int out = integer();
            if (out < 1) throw ParseError(start, "FC output count must be >= 1");
            return FcDesc{out};
        }
        case 'D': {
            ++pos_;
            const double ratio = number();
            if (ratio < 0.0 || ratio >= 1.0)
                throw ParseError(start, "dropout ratio must be in [0, 1)");
            return DropoutDesc{ratio};
        }
        case 'G': {
            ++pos_;
            if (eof()) fail("expected '1', '2' or 'B' after 'G'");
            const char which = peek();
            if (which != '1' && which != '2' && which != 'B')
                fail("expected '1', '2' or 'B' after 'G'");
            ++pos_;
            expect('(');
            const double v = number();
            expect(')');
            if (which == 'B') {
                if (!(v > 0.0)) throw ParseError(start, "blur std must be > 0");
                return GaussBlurDesc{v};
            }
            if (!(v > 0.0) || v > 1.0) throw ParseError(start, "sigma must be in (0, 1]");
            return GnppDesc{which == '1' ? Neighborhood::Type1 : Neighborhood::Type2, v};
        }
        default:
            fail(std::string("unknown layer token starting with '") + peek() + "'");
        }
    }
};

inline std::string format_decimal(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace detail

inline ArchSpec parse_arch(const std::string& text) {
    ArchSpec spec;
    spec.layers = detail::ArchParser(text).run();
    spec.source_text = text;
    return spec;
}

inline std::string render_layer(const LayerDesc& layer) {
    using detail::format_decimal;
    return std::visit(
        [](const auto& l) -> std::string {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, ConvDesc>) {
                std::string s = "C" + std::to_string(l.k) + "(S" + std::to_string(l.stride);
                if (l.pad != 0) s += "P" + std::to_string(l.pad);
                return s + ")@" + std::to_string(l.out_channels);
            } else if constexpr (std::is_same_v<L, MaxPoolDesc>) {
                return "MP" + std::to_string(l.k) + "(S" + std::to_string(l.stride) + ")";
            } else if constexpr (std::is_same_v<L, AvgPoolDesc>) {
                return "AP" + std::to_string(l.k) + "(S" + std::to_string(l.stride) + ")";
            } else if constexpr (std::is_same_v<L, FcDesc>) {
                return "FC" + std::to_string(l.out);
            } else if constexpr (std::is_same_v<L, DropoutDesc>) {
                return "D" + format_decimal(l.ratio);
            } else if constexpr (std::is_same_v<L, GnppDesc>) {
                return (l.nb_type == Neighborhood::Type1 ? std::string("G1(") : std::string("G2(")) +
                       format_decimal(l.sigma) + ")";
            } else {
                return "GB(" + format_decimal(l.std_dev) + ")";
            }
        },
        layer);
}

// Canonical text form: one brace group per layer. Reparsing yields equal layers.
inline std::string render_arch(const ArchSpec& spec) {
    std::string out;
    for (const auto& l : spec.layers) out += "{" + render_layer(l) + "}";
    return out;
}

// Per-layer output shapes. Conv/pool use the usual floor/ceil arithmetic,
// phrase pooling, blur and dropout are shape-identities, FC flattens.
inline std::vector<Shape4> shape_infer(const ArchSpec& spec, Shape4 input) {
    if (input.n < 1 || input.c < 1 || input.h < 1 || input.w < 1)
        throw std::invalid_argument("shape_infer: invalid input shape " + input.str());
    std::vector<Shape4> out;
    Shape4 cur = input;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const auto fail = [&](const std::string& msg) {
            throw std::invalid_argument("shape_infer: layer " + std::to_string(li) + " (" +
                                        render_layer(spec.layers[li]) + "): " + msg);
        };
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, ConvDesc>) {
                    const int h = conv_out_dim(cur.h, l.k, l.stride, l.pad);
                    const int w = conv_out_dim(cur.w, l.k, l.stride, l.pad);
                    if (h < 1 || w < 1) fail("output spatial dims < 1");
                    cur = {cur.n, l.out_channels, h, w};
                } else if constexpr (std::is_same_v<L, MaxPoolDesc> ||
                                     std::is_same_v<L, AvgPoolDesc>) {
                    if (l.k > cur.h && l.k > cur.w) fail("pool window larger than input in both dims");
                    const int h = pool_out_dim(cur.h, l.k, l.stride);
                    const int w = pool_out_dim(cur.w, l.k, l.stride);
                    if (h < 1 || w < 1) fail("output spatial dims < 1");
                    cur = {cur.n, cur.c, h, w};
                } else if constexpr (std::is_same_v<L, FcDesc>) {
                    cur = {cur.n, l.out, 1, 1};
                }
                // Dropout / Gnpp / GaussBlur: identity
            },
            spec.layers[li]);
        out.push_back(cur);
    }
    return out;
}

// Learnable parameter count (weights + biases); phrase pooling adds none.
inline std::uint64_t param_count(const ArchSpec& spec, Shape4 input) {
    const auto shapes = shape_infer(spec, input);
    std::uint64_t total = 0;
    Shape4 cur = input;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        if (const auto* conv = std::get_if<ConvDesc>(&spec.layers[li]))
            total += std::uint64_t(conv->out_channels) * cur.c * conv->k * conv->k +
                     conv->out_channels;
        else if (const auto* fc = std::get_if<FcDesc>(&spec.layers[li]))
            total += std::uint64_t(fc->out) * (std::uint64_t(cur.c) * cur.h * cur.w) + fc->out;
        cur = shapes[li];
    }
    return total;
}

// Phrase pooling is only meaningful between a conv layer and a pooling layer;
// strict mode rejects any G1/G2 token not immediately followed by MP/AP.
inline void validate_gnpp_placement(const ArchSpec& spec) {
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        if (!std::holds_alternative<GnppDesc>(spec.layers[li])) continue;
        const bool next_is_pool =
            li + 1 < spec.layers.size() &&
            (std::holds_alternative<MaxPoolDesc>(spec.layers[li + 1]) ||
             std::holds_alternative<AvgPoolDesc>(spec.layers[li + 1]));
        if (!next_is_pool)
            throw std::invalid_argument(
                "layer " + std::to_string(li) +
                ": G1/G2 must appear immediately before a pooling layer (strict placement)");
    }
}

inline std::vector<std::size_t> pool_layer_indices(const ArchSpec& spec) {
    std::vector<std::size_t> idx;
    for (std::size_t li = 0; li < spec.layers.size(); ++li)
        if (std::holds_alternative<MaxPoolDesc>(spec.layers[li]) ||
            std::holds_alternative<AvgPoolDesc>(spec.layers[li]))
            idx.push_back(li);
    return idx;
}

// Insert a phrase-pooling layer before each selected pooling layer (0-based
// position among the pooling layers, matching the L1/L2/L3 table convention).
inline ArchSpec with_gnpp(const ArchSpec& spec, const std::vector<int>& pool_positions,
                          Neighborhood type, double sigma) {
    const auto pools = pool_layer_indices(spec);
    std::vector<bool> mark(spec.layers.size(), false);
    for (int p : pool_positions) {
        if (p < 0 || std::size_t(p) >= pools.size())
            throw std::invalid_argument("with_gnpp: pool position " + std::to_string(p) +
                                        " out of range (arch has " +
                                        std::to_string(pools.size()) + " pooling layers)");
        mark[pools[p]] = true;
    }
    ArchSpec out;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        if (mark[li]) out.layers.push_back(GnppDesc{type, sigma});
        out.layers.push_back(spec.layers[li]);
    }
    out.source_text = render_arch(out);
    return out;
}

} // namespace gnpp
