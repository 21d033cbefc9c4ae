#include <catch2/catch.hpp>

#include "gnpp/gradcheck.hpp"
#include "support/synth.hpp"

using namespace gnpp;

namespace {

// Delegating layer that slightly mis-scales the backward pass.
template <typename T>
class CorruptedBackward final : public Layer<T> {
public:
    explicit CorruptedBackward(std::unique_ptr<Layer<T>> inner) : inner_(std::move(inner)) {}

    Tensor4<T> forward(const Tensor4<T>& x, bool training, Rng& rng) override {
        return inner_->forward(x, training, rng);
    }
    Tensor4<T> backward(const Tensor4<T>& grad_out) override {
        auto g = inner_->backward(grad_out);
        for (auto& v : g.data) v *= T(1.01);
        return g;
    }
    void collect_params(std::vector<ParamRef<T>>& out) override { inner_->collect_params(out); }
    std::string name() const override { return inner_->name(); }

private:
    std::unique_ptr<Layer<T>> inner_;
};

} // namespace

TEST_CASE("whole-network gradient check") {
    const auto arch =
        parse_arch("{C3(S1P1)@3-G1(0.8)-MP2(S2)}{C3(S1P1)@4-G2(1.0)-AP2(S2)}{FC8-D0.5}{FC3}");
    Rng rng(51);
    Tensor4<double> x(2, 1, 8, 8);
    for (auto& v : x.data) v = 0.05 + 0.95 * rng.uniform01();
    const std::vector<int> labels = {0, 2};

    SECTION("clean network passes below 1e-4") {
        auto net = build_network<double>(arch, {2, 1, 8, 8}, 9);
        const auto report = gradcheck_network(net, x, std::span<const int>(labels));
        CHECK(report.pass(1e-4));
        // one entry per parameter tensor plus the input
        CHECK(report.entries.size() == net.params().size() + 1);
    }
    SECTION("a corrupted backward pass is detected") {
        auto net = build_network<double>(arch, {2, 1, 8, 8}, 9);
        // mis-scale the gradient flowing out of the first pooling stage
        const std::size_t victim = 3;
        net.layers[victim] = std::make_unique<CorruptedBackward<double>>(
            std::move(net.layers[victim]));
        const auto report = gradcheck_network(net, x, std::span<const int>(labels));
        CHECK_FALSE(report.pass(1e-4));
    }
}
