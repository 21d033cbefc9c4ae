#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gnpp/network.hpp"
#include "gnpp/ops.hpp"

namespace gnpp {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst = 0.0;

    bool pass(double threshold = 1e-4) const { return worst < threshold; }
};

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

// Central-difference check of every parameter and of the input, through the
// softmax cross-entropy loss. Runs in whatever scalar type the network uses;
// only the 64-bit instantiation is meaningful at the 1e-4 threshold. The rng
// is rewound before every forward so dropout masks stay fixed.
template <typename T>
GradCheckReport gradcheck_network(Network<T>& net, Tensor4<T> x, std::span<const int> labels,
                                  std::uint64_t rng_seed = 1234, double eps = 1e-5) {
    const Rng rng_start(rng_seed);

    auto eval_loss = [&]() {
        Rng rng = rng_start;
        Tensor4<T> logits = net.forward(x, true, rng);
        return softmax_xent(logits, labels).loss;
    };

    // Analytic gradients.
    Tensor4<T> analytic_input_grad;
    {
        Rng rng = rng_start;
        Tensor4<T> logits = net.forward(x, true, rng);
        auto sm = softmax_xent(logits, labels);
        analytic_input_grad = net.backward(sm.grad);
    }
    auto params = net.params();
    std::vector<std::vector<T>> analytic_param_grads;
    for (auto& p : params) analytic_param_grads.push_back(*p.grad);

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        GradCheckEntry entry{params[pi].name, 0.0};
        std::vector<T>& value = *params[pi].value;
        for (std::size_t t = 0; t < value.size(); ++t) {
            const T saved = value[t];
            value[t] = saved + T(eps);
            const double up = eval_loss();
            value[t] = saved - T(eps);
            const double down = eval_loss();
            value[t] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            entry.max_rel_err =
                std::max(entry.max_rel_err, rel_err(double(analytic_param_grads[pi][t]), numeric));
        }
        report.entries.push_back(entry);
        report.worst = std::max(report.worst, entry.max_rel_err);
    }

    GradCheckEntry input_entry{"input", 0.0};
    for (std::size_t t = 0; t < x.data.size(); ++t) {
        const T saved = x.data[t];
        x.data[t] = saved + T(eps);
        const double up = eval_loss();
        x.data[t] = saved - T(eps);
        const double down = eval_loss();
        x.data[t] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        input_entry.max_rel_err =
            std::max(input_entry.max_rel_err, rel_err(double(analytic_input_grad.data[t]), numeric));
    }
    report.entries.push_back(input_entry);
    report.worst = std::max(report.worst, input_entry.max_rel_err);
    return report;
}

} // namespace gnpp
