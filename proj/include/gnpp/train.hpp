#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "gnpp/arch.hpp"
#include "gnpp/checkpoint.hpp"
#include "gnpp/data.hpp"
#include "gnpp/network.hpp"
#include "gnpp/optim.hpp"
#include "gnpp/rng.hpp"

namespace gnpp {

struct RunConfig {
    std::string arch_text;
    std::string dataset = "mnist";
    LrSchedule schedule;
    int batch = 100;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::uint64_t seed = 1;
    double flip_prob = 0.0; // horizontal flip augmentation; 0 disables
    std::string out_dir;    // empty = no artifacts written
    int limit_train = 0;    // 0 = full split; caps for quick runs
    int limit_test = 0;
    bool verbose = false;
};

struct CurveRow {
    int epoch = 0;
    long iteration = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double test_error = 0.0; // percent
};

struct TrainResult {
    double final_test_error = 0.0; // percent
    std::vector<CurveRow> curve;
    std::string checkpoint_path;
};

inline std::pair<Tensor4<float>, std::vector<int>>
make_batch(const Dataset& ds, std::span<const int> indices) {
    const int plane = ds.images.c * ds.images.h * ds.images.w;
    Tensor4<float> x(int(indices.size()), ds.images.c, ds.images.h, ds.images.w);
    std::vector<int> labels(indices.size());
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const float* src = ds.images.data.data() + std::size_t(indices[b]) * plane;
        std::copy(src, src + plane, x.data.data() + std::size_t(b) * plane);
        labels[b] = ds.labels[indices[b]];
    }
    return {std::move(x), std::move(labels)};
}

// Classification error in percent over (a prefix of) a dataset, inference mode.
inline double evaluate_error(Network<float>& net, const Dataset& ds, int batch,
                             int limit = 0) {
    const int total = limit > 0 ? std::min(limit, ds.images.n) : ds.images.n;
    Rng unused(0);
    long wrong = 0;
    std::vector<int> idx(batch);
    for (int start = 0; start < total; start += batch) {
        const int nb = std::min(batch, total - start);
        idx.resize(nb);
        for (int b = 0; b < nb; ++b) idx[b] = start + b;
        auto [x, labels] = make_batch(ds, idx);
        Tensor4<float> logits = net.forward(x, false, unused);
        const auto sm = softmax_xent(logits, std::span<const int>(labels));
        for (int b = 0; b < nb; ++b)
            if (sm.predicted[b] != labels[b]) ++wrong;
    }
    return 100.0 * double(wrong) / double(total);
}

inline std::string format_curves(const std::vector<CurveRow>& rows) {
    std::string out = "epoch,iteration,lr,train_loss,test_error\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%ld,%.10g,%.10g,%.10g\n", r.epoch, r.iteration, r.lr,
                      r.train_loss, r.test_error);
        out += buf;
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(content.data(), std::streamsize(content.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string config_echo(const RunConfig& cfg) {
    std::string s;
    s += "arch=" + cfg.arch_text + "\n";
    s += "dataset=" + cfg.dataset + "\n";
    s += "schedule=";
    for (std::size_t i = 0; i < cfg.schedule.stages.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(cfg.schedule.stages[i].epochs) + "@" +
             detail::format_decimal(cfg.schedule.stages[i].lr);
    }
    s += "\n";
    s += "batch=" + std::to_string(cfg.batch) + "\n";
    s += "momentum=" + detail::format_decimal(cfg.momentum) + "\n";
    s += "weight_decay=" + detail::format_decimal(cfg.weight_decay) + "\n";
    s += "seed=" + std::to_string(cfg.seed) + "\n";
    s += "flip_prob=" + detail::format_decimal(cfg.flip_prob) + "\n";
    s += "limit_train=" + std::to_string(cfg.limit_train) + "\n";
    s += "limit_test=" + std::to_string(cfg.limit_test) + "\n";
    return s;
}

// One full training run: shuffled mini-batches, staged learning rate, SGD with
// momentum and weight decay, per-epoch test evaluation appended to the curve.
// Everything is driven by Rng(seed) streams, so a rerun with the same config
// reproduces curves and checkpoint bitwise.
inline TrainResult train_run(const RunConfig& cfg, const ArchSpec& arch, const Dataset& train,
                             const Dataset& test) {
    validate_schedule(cfg.schedule);
    if (std::get<FcDesc>(arch.layers.back()).out != train.class_count)
        throw std::invalid_argument("train: final FC width " +
                                    std::to_string(std::get<FcDesc>(arch.layers.back()).out) +
                                    " does not match dataset class count " +
                                    std::to_string(train.class_count));

    const int n_train = cfg.limit_train > 0 ? std::min(cfg.limit_train, train.images.n)
                                            : train.images.n;
    const Shape4 in_shape{cfg.batch, train.images.c, train.images.h, train.images.w};
    Network<float> net = build_network<float>(arch, in_shape, cfg.seed);

    SgdState<float> sgd;
    sgd.momentum = cfg.momentum;
    sgd.weight_decay = cfg.weight_decay;
    auto params = net.params();
    std::vector<std::size_t> sizes;
    for (const auto& p : params) sizes.push_back(p.value->size());
    sgd.init(sizes);

    Rng run_rng(cfg.seed + 1); // training-time stream: shuffle, flips, dropout

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        write_text_file(cfg.out_dir + "/config.txt", config_echo(cfg));
    }

    TrainResult result;
    std::vector<int> order(n_train);
    for (int i = 0; i < n_train; ++i) order[i] = i;

    long iteration = 0;
    const int total_epochs = cfg.schedule.total_epochs();
    for (int epoch = 0; epoch < total_epochs; ++epoch) {
        const double lr = cfg.schedule.lr_at(epoch);
        sgd.lr = lr;
        shuffle(order, run_rng);

        double loss_sum = 0.0;
        long seen = 0;
        for (int start = 0; start < n_train; start += cfg.batch) {
            const int nb = std::min(cfg.batch, n_train - start);
            auto [x, labels] = make_batch(train, std::span<const int>(order).subspan(start, nb));
            if (cfg.flip_prob > 0.0) augment_flip(x, cfg.flip_prob, run_rng);

            Tensor4<float> logits = net.forward(x, true, run_rng);
            auto sm = softmax_xent(logits, std::span<const int>(labels));
            net.backward(sm.grad);
            for (std::size_t pi = 0; pi < params.size(); ++pi)
                sgd_step_buffer(params[pi].value->data(), params[pi].grad->data(),
                                sgd.velocity[pi], sgd);

            loss_sum += sm.loss * nb;
            seen += nb;
            ++iteration;
        }

        CurveRow row;
        row.epoch = epoch;
        row.iteration = iteration;
        row.lr = lr;
        row.train_loss = loss_sum / double(seen);
        row.test_error = evaluate_error(net, test, cfg.batch, cfg.limit_test);
        result.curve.push_back(row);
        if (cfg.verbose)
            std::printf("epoch %3d/%d  lr %.2g  train_loss %.4f  test_error %.2f%%\n", epoch + 1,
                        total_epochs, lr, row.train_loss, row.test_error);
    }

    result.final_test_error = result.curve.empty() ? 100.0 : result.curve.back().test_error;
    if (!cfg.out_dir.empty()) {
        write_text_file(cfg.out_dir + "/curves.csv", format_curves(result.curve));
        result.checkpoint_path = cfg.out_dir + "/model.ckpt";
        checkpoint_save(net, std::uint32_t(total_epochs), result.checkpoint_path);
    }
    return result;
}

struct RepeatSummary {
    std::vector<double> errors; // percent, one per seed
    double mean = 0.0;
    double stddev = 0.0; // sample std (n-1), 0 for a single run
};

// Runs seeds seed..seed+repeats-1; per-seed artifacts land in out_dir/seed_<s>.
inline RepeatSummary train_repeats(RunConfig cfg, const ArchSpec& arch, const Dataset& train,
                                   const Dataset& test, int repeats) {
    if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    RepeatSummary summary;
    const std::string base_out = cfg.out_dir;
    const std::uint64_t base_seed = cfg.seed;
    for (int r = 0; r < repeats; ++r) {
        cfg.seed = base_seed + std::uint64_t(r);
        cfg.out_dir = base_out.empty() ? "" : base_out + "/seed_" + std::to_string(cfg.seed);
        summary.errors.push_back(train_run(cfg, arch, train, test).final_test_error);
    }
    double sum = 0.0;
    for (double e : summary.errors) sum += e;
    summary.mean = sum / double(repeats);
    if (repeats > 1) {
        double sq = 0.0;
        for (double e : summary.errors) sq += (e - summary.mean) * (e - summary.mean);
        summary.stddev = std::sqrt(sq / double(repeats - 1));
    }
    return summary;
}

// Sweep rows in table order: no pooling layer selected, singletons, pairs, ...
inline std::vector<std::vector<int>> pool_subsets(int pool_count) {
    std::vector<std::vector<int>> subsets;
    for (int size = 0; size <= pool_count; ++size) {
        // enumerate subsets of given size in lexicographic order
        std::vector<int> pick(size);
        auto rec = [&](auto&& self, int start, int depth) -> void {
            if (depth == size) {
                subsets.push_back(pick);
                return;
            }
            for (int p = start; p < pool_count; ++p) {
                pick[depth] = p;
                self(self, p + 1, depth + 1);
            }
        };
        rec(rec, 0, 0);
    }
    return subsets;
}

} // namespace gnpp
