// Command-line front end: train networks from an architecture string, sweep
// phrase-pooling placements, run gradient checks, and compute receptive-field /
// connection / heatmap analyses.
//
// Exit codes: 0 success, 1 usage or config error, 2 runtime error,
// 3 verification failure (gradcheck).

#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gnpp/gnpp.hpp"

namespace {

using namespace gnpp;

struct DataOptions {
    std::string dataset = "mnist";
    std::string data_dir;

    std::string resolved_dir() const {
        if (!data_dir.empty()) return data_dir;
        if (const char* env = std::getenv("GNPP_DATA_DIR")) return env;
        return ".";
    }
};

std::pair<Dataset, Dataset> load_datasets(const DataOptions& opt) {
    const std::string dir = opt.resolved_dir();
    if (opt.dataset == "mnist") {
        const auto paths = find_mnist(dir);
        if (!paths)
            throw std::invalid_argument("MNIST files not found under '" + dir +
                                        "' (expected train-images-idx3-ubyte[.gz] etc.; "
                                        "set --data-dir or GNPP_DATA_DIR)");
        return {load_mnist(paths->train_images, paths->train_labels, Split::Train),
                load_mnist(paths->test_images, paths->test_labels, Split::Test)};
    }
    const CifarVariant variant =
        opt.dataset == "cifar100" ? CifarVariant::C100 : CifarVariant::C10;
    const auto paths = find_cifar(dir, variant);
    if (!paths)
        throw std::invalid_argument(opt.dataset + " files not found under '" + dir +
                                    "' (set --data-dir or GNPP_DATA_DIR)");
    Dataset train = load_cifar(paths->train, variant, Split::Train);
    Dataset test = load_cifar(paths->test, variant, Split::Test);
    return {std::move(train), std::move(test)};
}

void add_train_flags(CLI::App* cmd, RunConfig& cfg, DataOptions& data, std::string& schedule,
                     std::string& norm, int& repeats) {
    cmd->add_option("--arch", cfg.arch_text, "architecture string")->required();
    cmd->add_option("--dataset", data.dataset, "mnist | cifar10 | cifar100")
        ->check(CLI::IsMember({"mnist", "cifar10", "cifar100"}));
    cmd->add_option("--data-dir", data.data_dir, "dataset directory (default $GNPP_DATA_DIR)");
    cmd->add_option("--schedule", schedule, "stages, e.g. 20@1e-3,4@1e-4,1@1e-5");
    cmd->add_option("--batch", cfg.batch, "mini-batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--momentum", cfg.momentum, "SGD momentum");
    cmd->add_option("--wd", cfg.weight_decay, "weight decay");
    cmd->add_option("--seed", cfg.seed, "run seed (repeats use seed..seed+R-1)");
    cmd->add_option("--repeats", repeats, "independent runs to aggregate")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--flip-prob", cfg.flip_prob, "horizontal flip probability");
    cmd->add_option("--out", cfg.out_dir, "output directory for run artifacts");
    cmd->add_option("--normalize", norm, "scale | mean")->check(CLI::IsMember({"scale", "mean"}));
    cmd->add_option("--limit-train", cfg.limit_train, "cap training samples (0 = all)");
    cmd->add_option("--limit-test", cfg.limit_test, "cap test samples (0 = all)");
    cmd->add_flag("--quiet", [&cfg](std::int64_t) { cfg.verbose = false; },
                  "suppress per-epoch progress");
}

int cmd_train(RunConfig cfg, const DataOptions& data, const std::string& schedule,
              const std::string& norm, int repeats) {
    cfg.dataset = data.dataset;
    cfg.schedule = parse_schedule(schedule);
    auto [train, test] = load_datasets(data);
    if (norm == "mean") {
        normalize(train, NormScheme::MeanSubtract);
        normalize(test, NormScheme::MeanSubtract, &train.channel_mean);
    }
    const ArchSpec arch = parse_arch(cfg.arch_text);

    if (repeats == 1) {
        const auto result = train_run(cfg, arch, train, test);
        std::printf("final test error: %.2f%%\n", result.final_test_error);
        return 0;
    }
    const auto summary = train_repeats(cfg, arch, train, test, repeats);
    for (std::size_t r = 0; r < summary.errors.size(); ++r)
        std::printf("seed %llu: %.2f%%\n", (unsigned long long)(cfg.seed + r),
                    summary.errors[r]);
    std::printf("mean test error: %.2f%% +/- %.2f%% (%d runs)\n", summary.mean, summary.stddev,
                repeats);
    return 0;
}

std::vector<Neighborhood> parse_types(const std::string& text) {
    std::vector<Neighborhood> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string part = text.substr(pos, comma - pos);
        if (part == "t1" || part == "T1" || part == "type1")
            out.push_back(Neighborhood::Type1);
        else if (part == "t2" || part == "T2" || part == "type2")
            out.push_back(Neighborhood::Type2);
        else
            throw std::invalid_argument("unknown neighborhood type '" + part + "'");
        pos = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("no neighborhood types given");
    return out;
}

std::vector<double> parse_doubles(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        out.push_back(std::stod(text.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("no values given");
    return out;
}

std::string type_tag(Neighborhood t, double sigma) {
    return (t == Neighborhood::Type1 ? std::string("T1(") : std::string("T2(")) +
           detail::format_decimal(sigma) + ")";
}

int cmd_sweep(RunConfig cfg, const DataOptions& data, const std::string& schedule,
              const std::string& norm, int repeats, const std::string& types_text,
              const std::string& sigmas_text) {
    cfg.dataset = data.dataset;
    cfg.schedule = parse_schedule(schedule);
    const auto types = parse_types(types_text);
    const auto sigmas = parse_doubles(sigmas_text);
    auto [train, test] = load_datasets(data);
    if (norm == "mean") {
        normalize(train, NormScheme::MeanSubtract);
        normalize(test, NormScheme::MeanSubtract, &train.channel_mean);
    }
    const ArchSpec base = parse_arch(cfg.arch_text);
    const int pools = int(pool_layer_indices(base).size());
    if (pools == 0) throw std::invalid_argument("sweep: architecture has no pooling layers");

    const auto subsets = pool_subsets(pools);
    const std::string base_out = cfg.out_dir;

    // baseline and any other repeated arch train once
    std::map<std::string, RepeatSummary> cache;
    auto run_for = [&](const ArchSpec& arch) -> const RepeatSummary& {
        const std::string key = render_arch(arch);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        RunConfig rc = cfg;
        if (!base_out.empty()) rc.out_dir = base_out + "/run_" + std::to_string(cache.size());
        auto summary = train_repeats(rc, arch, train, test, repeats);
        return cache.emplace(key, std::move(summary)).first->second;
    };

    // header
    std::string csv;
    std::printf("   ");
    for (int p = 0; p < pools; ++p) {
        std::printf("L%d ", p + 1);
        csv += "L" + std::to_string(p + 1) + ",";
    }
    for (auto t : types)
        for (double s : sigmas) {
            std::printf("  %12s", type_tag(t, s).c_str());
            csv += type_tag(t, s) + "_mean," + type_tag(t, s) + "_std,";
        }
    std::printf("\n");
    csv.back() = '\n';

    for (const auto& subset : subsets) {
        std::vector<bool> mark(pools, false);
        for (int p : subset) mark[p] = true;
        std::printf("   ");
        for (int p = 0; p < pools; ++p) {
            std::printf("%s ", mark[p] ? " x" : "  ");
            csv += (mark[p] ? "1," : "0,");
        }
        for (auto t : types)
            for (double s : sigmas) {
                const ArchSpec arch = subset.empty() ? base : with_gnpp(base, subset, t, s);
                const auto& summary = run_for(arch);
                std::printf("  %6.2f+-%.2f", summary.mean, summary.stddev);
                csv += detail::format_decimal(summary.mean) + "," +
                       detail::format_decimal(summary.stddev) + ",";
            }
        std::printf("\n");
        csv.back() = '\n';
    }
    if (!base_out.empty()) {
        std::filesystem::create_directories(base_out);
        write_text_file(base_out + "/sweep.csv", csv);
        std::printf("wrote %s/sweep.csv\n", base_out.c_str());
    }
    return 0;
}

int cmd_gradcheck(const std::string& arch_text, int hw, int channels, int batch,
                  std::uint64_t seed, double threshold) {
    const ArchSpec arch = parse_arch(arch_text);
    Network<double> net = build_network<double>(arch, {batch, channels, hw, hw}, seed);

    Rng rng(seed + 17);
    Tensor4<double> x(batch, channels, hw, hw);
    for (auto& v : x.data) v = 0.05 + 0.95 * rng.uniform01();
    std::vector<int> labels(batch);
    for (auto& l : labels) l = int(rng.below(std::uint64_t(net.class_count())));

    const auto report = gradcheck_network(net, x, std::span<const int>(labels), seed + 31);
    for (const auto& e : report.entries)
        std::printf("%-16s max rel err %.3e %s\n", e.name.c_str(), e.max_rel_err,
                    e.max_rel_err < threshold ? "ok" : "FAIL");
    std::printf("gradcheck %s (worst %.3e, threshold %g)\n",
                report.pass(threshold) ? "PASS" : "FAIL", report.worst, threshold);
    return report.pass(threshold) ? 0 : 3;
}

int cmd_analyze_rf(const std::string& arch_text, const std::string& csv_path) {
    const ArchSpec arch = parse_arch(arch_text);
    std::string csv = "layer,token,rf,jump,overlap_percent\n";
    std::printf("%-5s %-16s %6s %6s %9s\n", "layer", "token", "rf", "jump", "overlap");
    for (std::size_t li = 0; li < arch.layers.size(); ++li) {
        if (std::holds_alternative<FcDesc>(arch.layers[li]) ||
            std::holds_alternative<DropoutDesc>(arch.layers[li]))
            break;
        const auto info = receptive_field(arch, li);
        std::printf("%-5zu %-16s %6d %6d %8.1f%%\n", li, render_layer(arch.layers[li]).c_str(),
                    info.rf, info.jump, 100.0 * info.overlap);
        char buf[128];
        std::snprintf(buf, sizeof buf, "%zu,%s,%d,%d,%.4f\n", li,
                      render_layer(arch.layers[li]).c_str(), info.rf, info.jump,
                      100.0 * info.overlap);
        csv += buf;
    }
    if (!csv_path.empty()) write_text_file(csv_path, csv);
    return 0;
}

int cmd_analyze_connections(const std::string& arch_text, int in_c, int in_hw, int layer,
                            const std::string& gnpp_kind, const std::string& csv_path) {
    const ArchSpec arch = parse_arch(arch_text);
    const Shape4 input{1, in_c, in_hw, in_hw};
    const GnppCount kind = gnpp_kind == "type1"   ? GnppCount::Type1
                           : gnpp_kind == "type2" ? GnppCount::Type2
                                                  : GnppCount::None;
    std::size_t li = std::size_t(layer);
    if (layer < 0) { // default: last conv layer
        for (std::size_t t = 0; t < arch.layers.size(); ++t)
            if (std::holds_alternative<ConvDesc>(arch.layers[t])) li = t;
    }
    const auto conv = std::get<ConvDesc>(arch.layers[li]);
    const auto count = connection_count(arch, input, li, kind);
    int footprint = conv.k * conv.k;
    if (kind == GnppCount::Type1)
        footprint = gnpp_footprint(conv.k, gnpp_config(Neighborhood::Type1, 1.0).offsets);
    if (kind == GnppCount::Type2)
        footprint = gnpp_footprint(conv.k, gnpp_config(Neighborhood::Type2, 1.0).offsets);
    std::printf("layer %zu (%s): per-neuron spatial footprint %d, connections %llu (%.1fM)\n",
                li, render_layer(arch.layers[li]).c_str(), footprint,
                (unsigned long long)count, double(count) / 1e6);
    if (!csv_path.empty()) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "layer,token,gnpp,footprint,connections\n%zu,%s,%s,%d,%llu\n",
                      li, render_layer(arch.layers[li]).c_str(), gnpp_kind.c_str(), footprint,
                      (unsigned long long)count);
        write_text_file(csv_path, buf);
    }
    return 0;
}

int cmd_analyze_heatmap(const std::string& checkpoint, const DataOptions& data, int sample,
                        int layer, double std_factor, const std::string& out_path) {
    auto [train, test] = load_datasets(data);
    const Dataset& ds = test;
    if (sample < 0 || sample >= ds.images.n)
        throw std::invalid_argument("sample index out of range");

    const Shape4 in_shape{1, ds.images.c, ds.images.h, ds.images.w};
    Network<float> net = checkpoint_load(checkpoint, in_shape);
    if (layer < 0 || std::size_t(layer) >= net.arch.layers.size())
        throw std::invalid_argument("layer index out of range");

    std::vector<int> one = {sample};
    auto [x, labels] = make_batch(ds, one);
    Rng rng(0);
    const auto acts = net.forward_collect(x, rng);
    const auto& feats = acts[net.arch_output_layer[std::size_t(layer)] + 1];

    const auto hm = heatmap(feats, net.arch, std::size_t(layer), std_factor, in_shape);
    write_pgm(hm, out_path);
    std::printf("wrote %s (%dx%d, layer %d, label %d)\n", out_path.c_str(), hm.w, hm.h, layer,
                labels[0]);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"phrase-pooling CNN trainer and analysis tool"};
    app.require_subcommand(1);

    RunConfig cfg;
    cfg.verbose = true;
    DataOptions data;
    std::string schedule = "20@1e-3,4@1e-4,1@1e-5";
    std::string norm = "scale";
    int repeats = 1;

    auto* train_cmd = app.add_subcommand("train", "train a network");
    add_train_flags(train_cmd, cfg, data, schedule, norm, repeats);

    auto* sweep_cmd = app.add_subcommand("sweep", "train every phrase-pooling placement");
    std::string types_text = "t1,t2", sigmas_text = "1.0,0.9,0.8";
    add_train_flags(sweep_cmd, cfg, data, schedule, norm, repeats);
    sweep_cmd->add_option("--types", types_text, "neighborhood types, e.g. t1,t2");
    sweep_cmd->add_option("--sigmas", sigmas_text, "sigma values, e.g. 1.0,0.9,0.8");

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check in 64-bit mode");
    std::string grad_arch =
        "{C3(S1P1)@4-G1(0.8)-MP2(S2)}{C3(S1P1)@6-G2(1.0)-AP2(S2)}{GB(0.9)}{FC16-D0.5}{FC5}";
    int grad_hw = 8, grad_channels = 1, grad_batch = 2;
    std::uint64_t grad_seed = 1;
    double grad_threshold = 1e-4;
    grad_cmd->add_option("--arch", grad_arch, "architecture to check");
    grad_cmd->add_option("--input-hw", grad_hw, "input height/width");
    grad_cmd->add_option("--channels", grad_channels, "input channels");
    grad_cmd->add_option("--batch", grad_batch, "batch size");
    grad_cmd->add_option("--seed", grad_seed, "seed");
    grad_cmd->add_option("--threshold", grad_threshold, "max relative error allowed");

    auto* analyze = app.add_subcommand("analyze", "receptive fields, connections, heatmaps");
    analyze->require_subcommand(1);

    auto* rf_cmd = analyze->add_subcommand("rf", "receptive field per layer");
    std::string rf_arch, rf_csv;
    rf_cmd->add_option("--arch", rf_arch, "architecture string")->required();
    rf_cmd->add_option("--csv", rf_csv, "also write a CSV file");

    auto* conn_cmd = analyze->add_subcommand("connections", "latent connection counts");
    std::string conn_arch, conn_gnpp = "none", conn_csv;
    int conn_c = 3, conn_hw = 227, conn_layer = -1;
    conn_cmd->add_option("--arch", conn_arch, "architecture string")->required();
    conn_cmd->add_option("--csv", conn_csv, "also write a CSV file");
    conn_cmd->add_option("--input-c", conn_c, "input channels");
    conn_cmd->add_option("--input-hw", conn_hw, "input height/width");
    conn_cmd->add_option("--layer", conn_layer, "conv layer index (default: last conv)");
    conn_cmd->add_option("--gnpp", conn_gnpp, "none | type1 | type2")
        ->check(CLI::IsMember({"none", "type1", "type2"}));

    auto* hm_cmd = analyze->add_subcommand("heatmap", "channel-mean diffusion heatmap (PGM)");
    std::string hm_checkpoint, hm_out = "heatmap.pgm";
    int hm_sample = 0, hm_layer = 0;
    double hm_std_factor = 0.25;
    hm_cmd->add_option("--checkpoint", hm_checkpoint, "trained model")->required();
    hm_cmd->add_option("--dataset", data.dataset, "mnist | cifar10 | cifar100")
        ->check(CLI::IsMember({"mnist", "cifar10", "cifar100"}));
    hm_cmd->add_option("--data-dir", data.data_dir, "dataset directory");
    hm_cmd->add_option("--sample", hm_sample, "test-set sample index");
    hm_cmd->add_option("--layer", hm_layer, "architecture layer index");
    hm_cmd->add_option("--std-factor", hm_std_factor, "gaussian std as a fraction of rf");
    hm_cmd->add_option("--out", hm_out, "output PGM path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1; // usage errors exit 1; --help exits 0
    }

    try {
        if (train_cmd->parsed()) return cmd_train(cfg, data, schedule, norm, repeats);
        if (sweep_cmd->parsed())
            return cmd_sweep(cfg, data, schedule, norm, repeats, types_text, sigmas_text);
        if (grad_cmd->parsed())
            return cmd_gradcheck(grad_arch, grad_hw, grad_channels, grad_batch, grad_seed,
                                 grad_threshold);
        if (analyze->parsed()) {
            if (rf_cmd->parsed()) return cmd_analyze_rf(rf_arch, rf_csv);
            if (conn_cmd->parsed())
                return cmd_analyze_connections(conn_arch, conn_c, conn_hw, conn_layer, conn_gnpp,
                                               conn_csv);
            if (hm_cmd->parsed())
                return cmd_analyze_heatmap(hm_checkpoint, data, hm_sample, hm_layer,
                                           hm_std_factor, hm_out);
        }
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 2;
    }
    return 1;
}
