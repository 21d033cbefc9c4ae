#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gnpp/arch.hpp"
#include "gnpp/ops.hpp"
#include "gnpp/phrase_pool.hpp"
#include "gnpp/rng.hpp"
#include "gnpp/tensor.hpp"

namespace gnpp {

// Named view onto one learnable tensor and its gradient buffer.
template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* value;
    std::vector<T>* grad;
    Shape4 shape; // (out,in,1,1) for fc weights, (1,len,1,1) for biases
};

template <typename T>
struct Layer {
    virtual ~Layer() = default;
    virtual Tensor4<T> forward(const Tensor4<T>& x, bool training, Rng& rng) = 0;
    virtual Tensor4<T> backward(const Tensor4<T>& grad_out) = 0;
    virtual void collect_params(std::vector<ParamRef<T>>&) {}
    virtual std::string name() const = 0;
};

template <typename T>
class ConvLayer final : public Layer<T> {
public:
    ConvLayer(std::string name, int in_channels, const ConvDesc& d)
        : name_(std::move(name)), desc_(d),
          kernel_(d.out_channels, in_channels, d.k, d.k),
          bias_(d.out_channels, T(0)),
          grad_kernel_(kernel_.shape()), grad_bias_(d.out_channels, T(0)) {}

    void init(Rng& rng) {
        // He initialization: N(0, sqrt(2/fan_in)), zero biases.
        const double stddev = std::sqrt(2.0 / (double(kernel_.c) * kernel_.h * kernel_.w));
        for (auto& v : kernel_.data) v = T(rng.gaussian() * stddev);
    }

    Tensor4<T> forward(const Tensor4<T>& x, bool, Rng&) override {
        input_ = x;
        return conv_forward(x, kernel_, std::span<const T>(bias_), desc_.stride, desc_.pad);
    }

    Tensor4<T> backward(const Tensor4<T>& grad_out) override {
        auto g = conv_backward(input_, kernel_, grad_out, desc_.stride, desc_.pad);
        grad_kernel_ = std::move(g.kernel);
        grad_bias_ = std::move(g.bias);
        return std::move(g.input);
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({name_ + ".kernel", &kernel_.data, &grad_kernel_.data, kernel_.shape()});
        out.push_back({name_ + ".bias", &bias_, &grad_bias_, Shape4{1, int(bias_.size()), 1, 1}});
    }

    std::string name() const override { return name_; }
    Tensor4<T>& kernel() { return kernel_; }
    std::vector<T>& bias() { return bias_; }

private:
    std::string name_;
    ConvDesc desc_;
    Tensor4<T> kernel_;
    std::vector<T> bias_;
    Tensor4<T> grad_kernel_;
    std::vector<T> grad_bias_;
    Tensor4<T> input_;
};

template <typename T>
class PoolLayer final : public Layer<T> {
public:
    PoolLayer(std::string name, PoolKind kind, int k, int stride)
        : name_(std::move(name)), kind_(kind), k_(k), stride_(stride) {}

    Tensor4<T> forward(const Tensor4<T>& x, bool, Rng&) override {
        auto [y, cache] = pool_forward(x, kind_, k_, stride_);
        cache_ = std::move(cache);
        return std::move(y);
    }

    Tensor4<T> backward(const Tensor4<T>& grad_out) override {
        return pool_backward(grad_out, cache_);
    }

    std::string name() const override { return name_; }

private:
    std::string name_;
    PoolKind kind_;
    int k_, stride_;
    PoolCache cache_;
};

template <typename T>
class ReluLayer final : public Layer<T> {
public:
    explicit ReluLayer(std::string name) : name_(std::move(name)) {}

    Tensor4<T> forward(const Tensor4<T>& x, bool, Rng&) override {
        input_ = x;
        return relu_forward(x);
    }

    Tensor4<T> backward(const Tensor4<T>& grad_out) override {
        return relu_backward(input_, grad_out);
    }

    std::string name() const override { return name_; }

private:
    std::string name_;
    Tensor4<T> input_;
};

template <typename T>
class FcLayer final : public Layer<T> {
public:
    FcLayer(std::string name, int in, int out)
        : name_(std::move(name)), weight_(out, in, 1, 1), bias_(out, T(0)),
          grad_weight_(weight_.shape()), grad_bias_(out, T(0)) {}

    void init(Rng& rng) {
        const double stddev = std::sqrt(2.0 / double(weight_.c));
        for (auto& v : weight_.data) v = T(rng.gaussian() * stddev);
    }

    Tensor4<T> forward(const Tensor4<T>& x, bool, Rng&) override {
        input_ = x;
        return fc_forward(x, weight_, std::span<const T>(bias_));
    }

    Tensor4<T> backward(const Tensor4<T>& grad_out) override {
        auto g = fc_backward(input_, weight_, grad_out);
        grad_weight_ = std::move(g.weight);
        grad_bias_ = std::move(g.bias);
        return std::move(g.input);
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({name_ + ".weight", &weight_.data, &grad_weight_.data, weight_.shape()});
        out.push_back({name_ + ".bias", &bias_, &grad_bias_, Shape4{1, int(bias_.size()), 1, 1}});
    }

    std::string name() const override { return name_; }
    Tensor4<T>& weight() { return weight_; }
    std::vector<T>& bias() { return bias_; }

private:
    std::string name_;
    Tensor4<T> weight_;
    std::vector<T> bias_;
    Tensor4<T> grad_weight_;
    std::vector<T> grad_bias_;
    Tensor4<T> input_;
};

template <typename T>
class DropoutLayer final : public Layer<T> {
public:
    DropoutLayer(std::string name, double ratio) : name_(std::move(name)), ratio_(ratio) {}

    Tensor4<T> forward(const Tensor4<T>& x, bool training, Rng& rng) override {
        auto [y, mask] = dropout_forward(x, ratio_, rng, training);
        mask_ = std::move(mask);
        training_ = training;
        return std::move(y);
    }

    Tensor4<T> backward(const Tensor4<T>& grad_out) override {
        if (!training_) return grad_out;
        return dropout_backward(grad_out, mask_, ratio_);
    }

    std::string name() const override { return name_; }

private:
    std::string name_;
    double ratio_;
    bool training_ = false;
    std::vector<std::uint8_t> mask_;
};

template <typename T>
class GnppLayer final : public Layer<T> {
public:
    GnppLayer(std::string name, const GnppDesc& d)
        : name_(std::move(name)), cfg_(gnpp_config(d.nb_type, d.sigma)) {}

    Tensor4<T> forward(const Tensor4<T>& x, bool, Rng&) override {
        auto [z, cache] = gnpp_forward(x, cfg_);
        cache_ = std::move(cache);
        return std::move(z);
    }

    Tensor4<T> backward(const Tensor4<T>& grad_out) override {
        return gnpp_backward(grad_out, cache_, cfg_);
    }

    std::string name() const override { return name_; }
    const GnppConfig& config() const { return cfg_; }

private:
    std::string name_;
    GnppConfig cfg_;
    GnppCache cache_;
};

template <typename T>
class GaussBlurLayer final : public Layer<T> {
public:
    GaussBlurLayer(std::string name, double std_dev)
        : name_(std::move(name)), std_dev_(std_dev) {}

    Tensor4<T> forward(const Tensor4<T>& x, bool, Rng&) override {
        return gaussian_blur_forward(x, std_dev_);
    }

    Tensor4<T> backward(const Tensor4<T>& grad_out) override {
        return gaussian_blur_backward(grad_out, std_dev_);
    }

    std::string name() const override { return name_; }

private:
    std::string name_;
    double std_dev_;
};

// Sequential pipeline built from an ArchSpec. Every conv and every hidden FC
// is followed by an implicit ReLU; the final FC emits raw logits.
template <typename T>
struct Network {
    ArchSpec arch;
    Shape4 input_shape; // n is a placeholder batch dim
    std::uint64_t seed = 0;
    std::vector<std::unique_ptr<Layer<T>>> layers;
    // built-layer index producing each arch layer's output (conv and hidden FC
    // entries point past their implicit ReLU)
    std::vector<std::size_t> arch_output_layer;

    Tensor4<T> forward(const Tensor4<T>& x, bool training, Rng& rng) {
        Tensor4<T> cur = x;
        for (auto& l : layers) cur = l->forward(cur, training, rng);
        return cur;
    }

    // As forward, but keeps every intermediate activation (index 0 is the
    // input, index i+1 the output of layer i). Inference mode.
    std::vector<Tensor4<T>> forward_collect(const Tensor4<T>& x, Rng& rng) {
        std::vector<Tensor4<T>> acts;
        acts.push_back(x);
        for (auto& l : layers) acts.push_back(l->forward(acts.back(), false, rng));
        return acts;
    }

    Tensor4<T> backward(const Tensor4<T>& grad_logits) {
        Tensor4<T> g = grad_logits;
        for (auto it = layers.rbegin(); it != layers.rend(); ++it) g = (*it)->backward(g);
        return g;
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (auto& l : layers) l->collect_params(out);
        return out;
    }

    std::uint64_t parameter_count() {
        std::uint64_t total = 0;
        for (const auto& p : params()) total += p.value->size();
        return total;
    }

    int class_count() const {
        return std::get<FcDesc>(arch.layers.back()).out;
    }
};

// Construct and initialize a network. Parameters are drawn from Rng(seed) in
// layer order, so identical (arch, input, seed) gives identical weights.
template <typename T>
Network<T> build_network(const ArchSpec& arch, Shape4 input, std::uint64_t seed,
                         bool strict_placement = true) {
    shape_infer(arch, input); // throws if the chain breaks
    if (strict_placement) validate_gnpp_placement(arch);

    Network<T> net;
    net.arch = arch;
    net.input_shape = input;
    net.seed = seed;
    Rng rng(seed);

    Shape4 cur = input;
    int conv_idx = 0, pool_idx = 0, fc_idx = 0, gnpp_idx = 0, drop_idx = 0, blur_idx = 0;
    const std::size_t n_layers = arch.layers.size();
    for (std::size_t li = 0; li < n_layers; ++li) {
        std::visit(
            [&](const auto& d) {
                using L = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<L, ConvDesc>) {
                    auto conv = std::make_unique<ConvLayer<T>>(
                        "conv" + std::to_string(++conv_idx), cur.c, d);
                    conv->init(rng);
                    net.layers.push_back(std::move(conv));
                    cur = {cur.n, d.out_channels, conv_out_dim(cur.h, d.k, d.stride, d.pad),
                           conv_out_dim(cur.w, d.k, d.stride, d.pad)};
                    net.layers.push_back(
                        std::make_unique<ReluLayer<T>>("relu" + std::to_string(conv_idx)));
                } else if constexpr (std::is_same_v<L, MaxPoolDesc>) {
                    net.layers.push_back(std::make_unique<PoolLayer<T>>(
                        "pool" + std::to_string(++pool_idx), PoolKind::Max, d.k, d.stride));
                    cur = {cur.n, cur.c, pool_out_dim(cur.h, d.k, d.stride),
                           pool_out_dim(cur.w, d.k, d.stride)};
                } else if constexpr (std::is_same_v<L, AvgPoolDesc>) {
                    net.layers.push_back(std::make_unique<PoolLayer<T>>(
                        "pool" + std::to_string(++pool_idx), PoolKind::Avg, d.k, d.stride));
                    cur = {cur.n, cur.c, pool_out_dim(cur.h, d.k, d.stride),
                           pool_out_dim(cur.w, d.k, d.stride)};
                } else if constexpr (std::is_same_v<L, FcDesc>) {
                    auto fc = std::make_unique<FcLayer<T>>("fc" + std::to_string(++fc_idx),
                                                           cur.c * cur.h * cur.w, d.out);
                    fc->init(rng);
                    net.layers.push_back(std::move(fc));
                    cur = {cur.n, d.out, 1, 1};
                    const bool final_fc = li + 1 == n_layers;
                    if (!final_fc)
                        net.layers.push_back(
                            std::make_unique<ReluLayer<T>>("relu_fc" + std::to_string(fc_idx)));
                } else if constexpr (std::is_same_v<L, DropoutDesc>) {
                    net.layers.push_back(std::make_unique<DropoutLayer<T>>(
                        "drop" + std::to_string(++drop_idx), d.ratio));
                } else if constexpr (std::is_same_v<L, GnppDesc>) {
                    net.layers.push_back(std::make_unique<GnppLayer<T>>(
                        "gnpp" + std::to_string(++gnpp_idx), d));
                } else if constexpr (std::is_same_v<L, GaussBlurDesc>) {
                    net.layers.push_back(std::make_unique<GaussBlurLayer<T>>(
                        "blur" + std::to_string(++blur_idx), d.std_dev));
                }
            },
            arch.layers[li]);
        net.arch_output_layer.push_back(net.layers.size() - 1);
    }
    return net;
}

} // namespace gnpp
