#pragma once

#include <charconv>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gnpp/tensor.hpp"

namespace gnpp {

// v <- momentum*v - lr*(grad + weight_decay*param); param <- param + v
template <typename T>
struct SgdState {
    double lr = 1e-3;
    double momentum = 0.0;
    double weight_decay = 0.0;
    std::vector<std::vector<T>> velocity; // one buffer per parameter, same length

    void init(std::span<const std::size_t> param_sizes) {
        velocity.clear();
        for (auto s : param_sizes) velocity.emplace_back(s, T(0));
    }
};

template <typename T>
void sgd_step_buffer(T* param, const T* grad, std::vector<T>& vel, const SgdState<T>& st) {
    const T lr = T(st.lr), mom = T(st.momentum), wd = T(st.weight_decay);
    for (std::size_t t = 0; t < vel.size(); ++t) {
        vel[t] = mom * vel[t] - lr * (grad[t] + wd * param[t]);
        param[t] += vel[t];
    }
}

// Staged schedule: run stage.epochs epochs at stage.lr, then move on.
struct LrStage {
    int epochs = 0;
    double lr = 0.0;
};

struct LrSchedule {
    std::vector<LrStage> stages;

    int total_epochs() const {
        int t = 0;
        for (const auto& s : stages) t += s.epochs;
        return t;
    }

    double lr_at(int epoch) const {
        int e = epoch;
        for (const auto& s : stages) {
            if (e < s.epochs) return s.lr;
            e -= s.epochs;
        }
        throw std::out_of_range("schedule: epoch " + std::to_string(epoch) +
                                " past total " + std::to_string(total_epochs()));
    }
};

inline void validate_schedule(const LrSchedule& sched) {
    if (sched.stages.empty())
        throw std::invalid_argument("schedule: at least one stage required");
    for (std::size_t i = 0; i < sched.stages.size(); ++i) {
        if (sched.stages[i].epochs < 1 || !(sched.stages[i].lr > 0.0))
            throw std::invalid_argument("schedule: stage epochs must be >= 1 and lr > 0");
        if (i > 0 && !(sched.stages[i].lr < sched.stages[i - 1].lr))
            throw std::invalid_argument("schedule: stage lrs must be strictly decreasing");
    }
}

// "20@1e-3,4@1e-4,1@1e-5" -> three stages.
inline LrSchedule parse_schedule(const std::string& text) {
    LrSchedule sched;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string part = text.substr(pos, comma - pos);
        const std::size_t at = part.find('@');
        if (at == std::string::npos)
            throw std::invalid_argument("schedule: expected <epochs>@<lr> in '" + part + "'");
        LrStage st;
        try {
            st.epochs = std::stoi(part.substr(0, at));
            st.lr = std::stod(part.substr(at + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("schedule: malformed stage '" + part + "'");
        }
        sched.stages.push_back(st);
        pos = comma + 1;
    }
    validate_schedule(sched);
    return sched;
}

} // namespace gnpp
