#include <catch2/catch.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support/synth.hpp"

// Drives the installed CLI binary end to end. The path arrives via the
// GNPP_CLI environment variable (set by ctest); the suite is skipped when it
// is absent so the test binary still runs standalone.

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("GNPP_CLI");
    return p ? p : "";
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

} // namespace

TEST_CASE("cli sweep emits the placement table") {
    const std::string cli = cli_path();
    if (cli.empty()) {
        WARN("GNPP_CLI not set; skipping CLI integration test");
        return;
    }
    const fs::path work = fs::temp_directory_path() / "gnpp_cli_sweep";
    fs::remove_all(work);
    const std::string data = (work / "data").string();
    synth::write_mnist_dir(data, 300, 100, 12, 31);

    // two pooling layers, one type, two sigmas -> 4 subset rows x 2 columns
    const std::string cmd =
        "\"" + cli + "\" sweep --arch \"{C3(S1P1)@4-MP2(S2)}{C3(S1P1)@4-MP2(S2)}{FC10}\"" +
        " --dataset mnist --data-dir \"" + data +
        "\" --schedule 1@1e-2 --batch 50 --seed 5 --types t1 --sigmas 1.0,0.8 --quiet --out \"" +
        (work / "out").string() + "\"";
    REQUIRE(run(cmd) == 0);

    const auto rows = read_csv((work / "out" / "sweep.csv").string());
    REQUIRE(rows.size() == 5); // header + 2^2 subsets
    REQUIRE(rows[0].size() == 2 + 4); // L1,L2 + (mean,std) x 2 sigmas
    CHECK(rows[0][0] == "L1");
    CHECK(rows[0][2] == "T1(1)_mean");

    // baseline row: no pools selected, identical across sigma columns
    CHECK(rows[1][0] == "0");
    CHECK(rows[1][1] == "0");
    CHECK(rows[1][2] == rows[1][4]);
    CHECK(rows[1][3] == rows[1][5]);

    // subset rows enumerate {}, {L1}, {L2}, {L1,L2}
    CHECK(rows[2][0] == "1");
    CHECK(rows[2][1] == "0");
    CHECK(rows[3][0] == "0");
    CHECK(rows[3][1] == "1");
    CHECK(rows[4][0] == "1");
    CHECK(rows[4][1] == "1");

    fs::remove_all(work);
}

TEST_CASE("cli train writes the run artifacts") {
    const std::string cli = cli_path();
    if (cli.empty()) {
        WARN("GNPP_CLI not set; skipping CLI integration test");
        return;
    }
    const fs::path work = fs::temp_directory_path() / "gnpp_cli_train";
    fs::remove_all(work);
    const std::string data = (work / "data").string();
    synth::write_mnist_dir(data, 200, 80, 12, 32);

    const std::string out = (work / "run").string();
    const std::string cmd = "\"" + cli +
                            "\" train --arch \"{C3(S1P1)@4-G2(0.9)-MP2(S2)}{FC10}\"" +
                            " --dataset mnist --data-dir \"" + data +
                            "\" --schedule 2@1e-2,1@1e-3 --batch 40 --seed 8 --flip-prob 0.5 "
                            "--quiet --out \"" + out + "\"";
    REQUIRE(run(cmd) == 0);

    CHECK(fs::exists(out + "/curves.csv"));
    CHECK(fs::exists(out + "/model.ckpt"));
    CHECK(fs::exists(out + "/config.txt"));

    const auto rows = read_csv(out + "/curves.csv");
    REQUIRE(rows.size() == 4); // header + 3 epochs
    CHECK(rows[0] == std::vector<std::string>{"epoch", "iteration", "lr", "train_loss",
                                              "test_error"});
    CHECK(rows[1][0] == "0");
    CHECK(rows[3][2] == "0.001");

    std::ifstream cfg(out + "/config.txt");
    std::string text((std::istreambuf_iterator<char>(cfg)), std::istreambuf_iterator<char>());
    CHECK(text.find("seed=8") != std::string::npos);
    CHECK(text.find("flip_prob=0.5") != std::string::npos);

    fs::remove_all(work);
}
