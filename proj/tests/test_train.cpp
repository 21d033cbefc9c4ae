#include <catch2/catch.hpp>

#include <filesystem>

#include "gnpp/train.hpp"
#include "support/synth.hpp"

using namespace gnpp;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(const std::string& arch, const std::string& sched) {
    RunConfig cfg;
    cfg.arch_text = arch;
    cfg.dataset = "synthetic";
    cfg.schedule = parse_schedule(sched);
    cfg.batch = 20;
    cfg.momentum = 0.9;
    cfg.weight_decay = 5e-4;
    cfg.seed = 3;
    return cfg;
}

} // namespace

TEST_CASE("training learns the blob task and records a curve") {
    const auto train = synth::blob_dataset(400, 4, 12, 1, Split::Train);
    const auto test = synth::blob_dataset(160, 4, 12, 2, Split::Test);
    const auto arch = parse_arch("{C3(S1P1)@6-MP2(S2)}{FC16}{FC4}");
    auto cfg = tiny_config(arch.source_text, "3@0.01");
    const auto result = train_run(cfg, arch, train, test);

    REQUIRE(result.curve.size() == 3);
    CHECK(result.curve[0].iteration == 20);
    CHECK(result.curve[2].iteration == 60);
    CHECK(result.curve[0].lr == Approx(0.01));
    CHECK(result.curve.back().train_loss < result.curve.front().train_loss);
    CHECK(result.final_test_error < 40.0); // chance is 75%
}

TEST_CASE("phrase pooling and blur variants train end to end") {
    const auto train = synth::blob_dataset(200, 4, 12, 4, Split::Train);
    const auto test = synth::blob_dataset(80, 4, 12, 5, Split::Test);
    for (const char* text : {"{C3(S1P1)@4-G1(0.8)-MP2(S2)}{FC4}",
                             "{C3(S1P1)@4-G2(1.0)-MP2(S2)}{FC4}",
                             "{C3(S1P1)@4-GB(0.8)-MP2(S2)}{FC4}",
                             "{C3(S1P1)@4-MP2(S2)-D0.2}{FC4}"}) {
        INFO(text);
        const auto arch = parse_arch(text);
        auto cfg = tiny_config(text, "2@0.01");
        const auto result = train_run(cfg, arch, train, test);
        CHECK(result.curve.size() == 2);
        CHECK(std::isfinite(result.curve.back().train_loss));
    }
}

TEST_CASE("reruns with one seed are bitwise identical") {
    const auto train = synth::blob_dataset(200, 4, 12, 7, Split::Train);
    const auto test = synth::blob_dataset(80, 4, 12, 8, Split::Test);
    const auto arch = parse_arch("{C3(S1P1)@4-G1(1.0)-MP2(S2)}{FC8}{FC4}");

    const auto out_a = fs::temp_directory_path() / "gnpp_det_a";
    const auto out_b = fs::temp_directory_path() / "gnpp_det_b";
    auto cfg = tiny_config(arch.source_text, "2@0.01,1@0.001");
    cfg.flip_prob = 0.5;

    cfg.out_dir = out_a.string();
    const auto ra = train_run(cfg, arch, train, test);
    cfg.out_dir = out_b.string();
    const auto rb = train_run(cfg, arch, train, test);

    CHECK(format_curves(ra.curve) == format_curves(rb.curve));
    const auto ca = detail::read_file_raw((out_a / "curves.csv").string());
    const auto cb = detail::read_file_raw((out_b / "curves.csv").string());
    CHECK(ca == cb);
    const auto ka = detail::read_file_raw((out_a / "model.ckpt").string());
    const auto kb = detail::read_file_raw((out_b / "model.ckpt").string());
    CHECK(ka == kb);
    CHECK(fs::exists(out_a / "config.txt"));

    // a different seed must actually change the run
    cfg.seed = 99;
    cfg.out_dir.clear();
    const auto rc = train_run(cfg, arch, train, test);
    CHECK(format_curves(rc.curve) != format_curves(ra.curve));

    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("repeats aggregate mean and sample std over consecutive seeds") {
    const auto train = synth::blob_dataset(120, 4, 12, 9, Split::Train);
    const auto test = synth::blob_dataset(60, 4, 12, 10, Split::Test);
    const auto arch = parse_arch("{C3(S1P1)@4-MP2(S2)}{FC4}");
    auto cfg = tiny_config(arch.source_text, "1@0.01");
    const auto summary = train_repeats(cfg, arch, train, test, 3);
    REQUIRE(summary.errors.size() == 3);
    double mean = (summary.errors[0] + summary.errors[1] + summary.errors[2]) / 3.0;
    CHECK(summary.mean == Approx(mean));
    double sq = 0.0;
    for (double e : summary.errors) sq += (e - mean) * (e - mean);
    CHECK(summary.stddev == Approx(std::sqrt(sq / 2.0)));
}

TEST_CASE("config validation") {
    const auto train = synth::blob_dataset(40, 4, 12, 11, Split::Train);
    const auto test = synth::blob_dataset(20, 4, 12, 12, Split::Test);
    const auto arch = parse_arch("{C3(S1P1)@4-MP2(S2)}{FC10}"); // 10 classes vs 4
    auto cfg = tiny_config(arch.source_text, "1@0.01");
    CHECK_THROWS_WITH(train_run(cfg, arch, train, test), Catch::Contains("class count"));
}

TEST_CASE("pool subsets enumerate in table order") {
    const auto subsets = pool_subsets(2);
    REQUIRE(subsets.size() == 4);
    CHECK(subsets[0].empty());
    CHECK(subsets[1] == std::vector<int>{0});
    CHECK(subsets[2] == std::vector<int>{1});
    CHECK(subsets[3] == std::vector<int>{0, 1});
    CHECK(pool_subsets(3).size() == 8);
}
