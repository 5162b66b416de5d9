#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "quweit/cli.hpp"

using quweit::cli_run;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CaptureOut {
    std::ostringstream ss;
    std::streambuf* old;
    CaptureOut() : old(std::cout.rdbuf(ss.rdbuf())) {}
    ~CaptureOut() { std::cout.rdbuf(old); }
    std::string text() const { return ss.str(); }
};

std::string scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// metrics.csv with the wallclock column blanked out
std::string metrics_without_wallclock(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        const auto last_comma = line.rfind(',');
        out << line.substr(0, last_comma) << "\n";
    }
    return out.str();
}

const std::vector<std::string> kTinyTrain = {
    "--set", "train.steps=8",        "--set", "train.batch_size=2",
    "--set", "train.context=32",     "--set", "train.eval_interval=4",
    "--set", "train.eval_batches=1", "--set", "train.warmup_steps=2",
    "--set", "train.log_interval=4", "--set", "train.calibration_sequences=2",
    "--set", "model.n_layers=1",     "--set", "model.latent_dim=32",
    "--set", "model.context=32",
};

int run_train(const std::string& out_dir, const std::string& mode) {
    std::vector<std::string> args = {"train", "--preset", "nano-shakespeare", "--mode", mode,
                                     "--out", out_dir};
    args.insert(args.end(), kTinyTrain.begin(), kTinyTrain.end());
    CaptureOut cap;
    return cli_run(args);
}

}  // namespace

TEST_CASE("workload preset prints the reference column") {
    CaptureOut cap;
    CHECK(cli_run({"workload", "--preset", "gpt3"}) == 0);
    const std::string out = cap.text();
    CHECK(out.find("43,486,543,872") != std::string::npos);
    CHECK(out.find("4,831,838,208") != std::string::npos);
    CHECK(out.find("14,495,514,624") != std::string::npos);
    CHECK(out.find("57,982,058,496") != std::string::npos);
}

TEST_CASE("cost compare reports the totals and the energy ratio") {
    CaptureOut cap;
    CHECK(cli_run({"cost", "--preset", "ivit-t", "--profile", "fpga-32x32", "--compare", "--json"}) ==
          0);
    const json j = json::parse(cap.text());
    CHECK(j.at("baseline_energy_j").get<double>() * 1e6 == doctest::Approx(338.10).epsilon(0.005));
    CHECK(j.at("quweit_energy_j").get<double>() * 1e6 == doctest::Approx(149.55).epsilon(0.005));
    CHECK(j.at("ratio").get<double>() == doctest::Approx(2.26).epsilon(0.005));

    CaptureOut cap2;
    CHECK(cli_run({"cost", "--preset", "ivit-t", "--profile", "fpga-32x32", "--compare"}) == 0);
    CHECK(cap2.text().find("ratio 2.26x") != std::string::npos);
}

TEST_CASE("cost table prints the cycle column") {
    CaptureOut cap;
    CHECK(cli_run({"cost", "--preset", "ivit-t", "--profile", "fpga-32x32", "--mlp-pe-table",
                   "--json"}) == 0);
    const json rows = json::parse(cap.text());
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].at("cycles") == 921600);
    CHECK(rows[1].at("cycles") == 239616);
    CHECK(rows[2].at("cycles") == 64512);
    CHECK(rows[3].at("cycles") == 18432);
    CHECK(rows[4].at("cycles") == 196);
}

TEST_CASE("usage errors exit 2, help exits 0") {
    CaptureOut cap;
    CHECK(cli_run({"workload", "--preset", "no-such-preset"}) == 2);
    CHECK(cli_run({"workload"}) == 2);  // neither preset nor config
    CHECK(cli_run({"frobnicate"}) == 2);
    CHECK(cli_run({"workload", "--preset", "gpt3", "--set", "model.bogus_key=1"}) == 2);
    CHECK(cli_run({"cost", "--preset", "ivit-t", "--profile", "tpu-9000"}) == 2);
    for (const char* sub :
         {"train", "eval", "generate", "workload", "cost", "export-netlist", "verify-netlist"})
        CHECK(cli_run({sub, "--help"}) == 0);
    CHECK(cli_run({"--help"}) == 0);
}

TEST_CASE("train/eval/generate/export/verify round trip through the CLI") {
    const std::string dir = scratch_dir("quweit_cli_roundtrip");
    CHECK(run_train(dir, "weightless") == 0);
    CHECK(fs::exists(fs::path(dir) / "metrics.csv"));
    CHECK(fs::exists(fs::path(dir) / "checkpoint.json"));
    const std::string qckpt = (fs::path(dir) / "checkpoint_quantized.json").string();
    REQUIRE(fs::exists(qckpt));

    {
        CaptureOut cap;
        CHECK(cli_run({"eval", "--ckpt", (fs::path(dir) / "checkpoint.json").string(), "--batches",
                       "2"}) == 0);
        CHECK(cap.text().find("val loss") != std::string::npos);
    }
    {
        CaptureOut cap;
        CHECK(cli_run({"generate", "--ckpt", (fs::path(dir) / "checkpoint.json").string(), "--prompt",
                       "the king", "--steps", "16", "--seed", "7"}) == 0);
        CHECK(cap.text().size() >= 16);
    }
    {
        CaptureOut cap;
        CHECK(cli_run({"export-netlist", "--ckpt", qckpt, "--out", dir}) == 0);
        CHECK(fs::exists(fs::path(dir) / "block0.v"));
        const std::string hdl = slurp(fs::path(dir) / "block0.v");
        CHECK(hdl.find("module weightless_block_0") != std::string::npos);
    }
    {
        CaptureOut cap;
        CHECK(cli_run({"verify-netlist", "--ckpt", qckpt, "--vectors", "500", "--out", dir}) == 0);
        const json report = json::parse(slurp(fs::path(dir) / "equivalence_block0.json"));
        CHECK(report.at("mismatches") == 0);
        CHECK(report.at("vectors_tested").get<int>() >= 500);
    }

    // exporting an unquantized checkpoint is refused as a domain error
    CHECK(cli_run({"export-netlist", "--ckpt", (fs::path(dir) / "checkpoint.json").string(), "--out",
                   dir}) == 1);
}

TEST_CASE("verify-netlist flags corrupted checkpoints with exit 1") {
    const std::string dir = scratch_dir("quweit_cli_corrupt");
    REQUIRE(run_train(dir, "weightless") == 0);
    const fs::path qckpt = fs::path(dir) / "checkpoint_quantized.json";
    std::string bytes = slurp(qckpt);
    for (std::size_t i = bytes.size() / 2; i < bytes.size(); ++i)
        if (bytes[i] >= '1' && bytes[i] <= '8') {
            bytes[i] = char(bytes[i] + 1);
            break;
        }
    std::ofstream(qckpt, std::ios::binary) << bytes;
    CaptureOut cap;
    CHECK(cli_run({"verify-netlist", "--ckpt", qckpt.string(), "--vectors", "10"}) == 1);
}

TEST_CASE("warm start copies matching baseline weights into a weightless model") {
    const std::string base = scratch_dir("quweit_cli_warm_base");
    REQUIRE(run_train(base, "mlp") == 0);
    const std::string dir = scratch_dir("quweit_cli_warm");
    std::vector<std::string> args = {"train", "--preset", "nano-shakespeare",
                                     "--mode", "weightless", "--out", dir,
                                     "--init-from", (fs::path(base) / "checkpoint.json").string()};
    args.insert(args.end(), kTinyTrain.begin(), kTinyTrain.end());
    CaptureOut cap;
    CHECK(cli_run(args) == 0);
    CHECK(cap.text().find("warm start") != std::string::npos);
}

TEST_CASE("identical train invocations produce identical artifacts") {
    const std::string a = scratch_dir("quweit_cli_repro_a");
    const std::string b = scratch_dir("quweit_cli_repro_b");
    REQUIRE(run_train(a, "mlp") == 0);
    REQUIRE(run_train(b, "mlp") == 0);
    CHECK(slurp(fs::path(a) / "checkpoint.json") == slurp(fs::path(b) / "checkpoint.json"));
    CHECK(metrics_without_wallclock(fs::path(a) / "metrics.csv") ==
          metrics_without_wallclock(fs::path(b) / "metrics.csv"));
}
