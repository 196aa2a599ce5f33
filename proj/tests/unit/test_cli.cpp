#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli/cli.hpp"
#include "cli/config_file.hpp"
#include "neuroflag/dataset/dataset_file.hpp"
#include "neuroflag/model/checkpoint.hpp"
#include "test_support.hpp"

using namespace neuroflag;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "neuroflag");
  return cli::run(args);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("exit codes") {
    testing::TempDir dir("cli_codes");
    const auto out = dir.file("o");
    CHECK(run({}) == cli::kExitUsage);
    CHECK(run({"--help"}) == cli::kExitOk);
    CHECK(run({"bogus"}) == cli::kExitUsage);
    CHECK(run({"simulate", "--frames", "abc"}) == cli::kExitUsage);
    CHECK(run({"simulate", "--dt", "-1", "--out", out}) == cli::kExitUsage);
    CHECK(run({"simulate", "--wind", "gale", "--out", out}) == cli::kExitUsage);
    CHECK(run({"make-dataset", "--frames-dir", dir.file("missing"), "--out", out}) == cli::kExitUsage);
    CHECK(run({"train", "--data", dir.file("missing"), "--out", out}) == cli::kExitUsage);
    CHECK(run({"eval", "--checkpoint", dir.file("missing.nfck"), "--report", dir.file("r.json")}) == cli::kExitUsage);
    CHECK(run({"simulate", "--wind", "strong", "--frames", "10", "--spring-constant", "1e9", "--dt", "0.1", "--out",
               out}) == cli::kExitDiverged);
    CHECK(run({"gradcheck"}) == cli::kExitOk);
    CHECK(run({"gradcheck", "--tolerance", "1e-15"}) == cli::kExitInternal);
  }

  TEST_CASE("config files fill unset options and flags take precedence") {
    testing::TempDir dir("cli_config");
    const auto cfg = dir.file("sim.cfg");
    write(cfg, "# comment\nframes = 30\nseed = 7\nwind = \"none\"\nwarmup = 10\n");
    REQUIRE(run({"simulate", "--config", cfg, "--frames", "20", "--out", dir.file("o")}) == cli::kExitOk);
    const auto resolved = slurp(dir.file("o/run_config.txt"));
    CHECK(resolved.find("frames = 20\n") != std::string::npos);
    CHECK(resolved.find("seed = 7\n") != std::string::npos);
    CHECK(resolved.find("wind = none\n") != std::string::npos);
    CHECK(dataset::load_frames(dir.file("o/frames_none.nflg")).size() == 20);
    CHECK_FALSE(fs::exists(dir.file("o/frames_strong.nflg")));
    CHECK(fs::exists(dir.file("o/timing.txt")));

    write(cfg, "no_such_key = 1\n");
    CHECK(run({"simulate", "--config", cfg, "--out", dir.file("o")}) == cli::kExitUsage);
    write(cfg, "missing equals sign\n");
    CHECK(run({"simulate", "--config", cfg, "--out", dir.file("o")}) == cli::kExitUsage);
    CHECK(run({"simulate", "--config", dir.file("absent.cfg")}) == cli::kExitUsage);
  }

  TEST_CASE("commands are idempotent and relocatable") {
    testing::TempDir dir("cli_idem");
    const std::vector<std::string> sim{"simulate", "--frames", "150", "--warmup", "20"};
    auto with_out = [](std::vector<std::string> a, std::initializer_list<std::string> extra) {
      a.insert(a.end(), extra);
      return a;
    };
    REQUIRE(run(with_out(sim, {"--out", dir.file("a/frames")})) == 0);
    const auto first = testing::file_bytes(dir.file("a/frames/frames_strong.nflg"));
    const auto first_cfg = testing::file_bytes(dir.file("a/frames/run_config.txt"));
    REQUIRE(run(with_out(sim, {"--out", dir.file("a/frames")})) == 0);
    CHECK(testing::file_bytes(dir.file("a/frames/frames_strong.nflg")) == first);
    CHECK(testing::file_bytes(dir.file("a/frames/run_config.txt")) == first_cfg);
    REQUIRE(run(with_out(sim, {"--out", dir.file("b/frames")})) == 0);
    for (const char* c : {"strong", "moderate", "none"}) {
      const auto name = std::string("/frames/frames_") + c + ".nflg";
      CHECK(testing::file_bytes(dir.file("a" + name)) == testing::file_bytes(dir.file("b" + name)));
    }

    for (const char* root : {"a", "b"}) {
      const std::string r = root;
      REQUIRE(run({"make-dataset", "--frames-dir", dir.file(r + "/frames"), "--out", dir.file(r + "/data"),
                   "--train-frames", "90", "--test-frames", "60", "--window", "8"}) == 0);
      REQUIRE(run({"train", "--data", dir.file(r + "/data"), "--out", dir.file(r + "/train"), "--layers", "1", "--dim",
                   "16", "--heads", "2", "--mlp-expansion", "2", "--batch-size", "8", "--max-steps", "6",
                   "--val-interval", "3", "--log-every", "0"}) == 0);
    }
    for (const char* f : {"data/train.nflg", "data/val.nflg", "data/test.nflg", "data/test_frames_none.nflg",
                          "train/model.nfck", "train/loss.csv"}) {
      CHECK_MESSAGE(testing::file_bytes(dir.file(std::string("a/") + f)) ==
                        testing::file_bytes(dir.file(std::string("b/") + f)),
                    std::string(f));
    }
    CHECK(fs::exists(dir.file("a/data/run_config.txt")));
    CHECK(fs::exists(dir.file("a/train/run_config.txt")));

    // Resuming with a different architecture is a configuration error.
    CHECK(run({"train", "--data", dir.file("a/data"), "--out", dir.file("a/train2"), "--resume",
               dir.file("a/train/model.nfck"), "--layers", "2", "--dim", "16", "--heads", "2", "--mlp-expansion", "2",
               "--batch-size", "8", "--max-steps", "8", "--log-every", "0"}) == cli::kExitUsage);
    // Resuming with the same architecture continues the step count.
    REQUIRE(run({"train", "--data", dir.file("a/data"), "--out", dir.file("a/train"), "--resume",
                 dir.file("a/train/model.nfck"), "--layers", "1", "--dim", "16", "--heads", "2", "--mlp-expansion",
                 "2", "--batch-size", "8", "--max-steps", "9", "--val-interval", "3", "--log-every", "0"}) == 0);
    CHECK(model::load_checkpoint(dir.file("a/train/model.nfck")).step == 9);
  }

  TEST_CASE("reduced pipeline runs end to end within ten minutes") {
    testing::TempDir dir("cli_pipeline");
    const auto t0 = std::chrono::steady_clock::now();
    REQUIRE(run({"simulate", "--frames", "600", "--out", dir.file("frames")}) == 0);
    REQUIRE(run({"make-dataset", "--frames-dir", dir.file("frames"), "--out", dir.file("data"), "--train-frames",
                 "300", "--test-frames", "200", "--max-train-windows", "500"}) == 0);
    CHECK(dataset::load_windows(dir.file("data/train.nflg")).size() == 500);
    REQUIRE(run({"train", "--data", dir.file("data"), "--out", dir.file("train"), "--layers", "2", "--max-steps", "200",
                 "--val-interval", "50", "--log-every", "50"}) == 0);
    REQUIRE(run({"eval", "--checkpoint", dir.file("train/model.nfck"), "--data", dir.file("data"), "--report",
                 dir.file("eval/report.json"), "--closed-loop-frames", "50"}) == 0);
    REQUIRE(run({"rollout", "--checkpoint", dir.file("train/model.nfck"), "--data", dir.file("data"), "--out",
                 dir.file("rollout"), "--frames", "100", "--condition", "strong", "--traces"}) == 0);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MESSAGE("reduced pipeline took " << seconds << " s");
    CHECK(seconds < 600.0);

    const auto report = nlohmann::json::parse(slurp(dir.file("eval/report.json")));
    CHECK(report.at("schema") == "neuroflag.rollout_report/1");
    CHECK(report.at("reports").size() == 6);
    for (const auto& r : report.at("reports")) CHECK(std::isfinite(r.at("mu").get<double>()));
    CHECK(dataset::load_frames(dir.file("rollout/rollout_strong.nflg")).size() == 100);
    CHECK(fs::exists(dir.file("rollout/traces_strong/particle_10_10.csv")));
    CHECK(fs::exists(dir.file("rollout/rollout_report.json")));
    for (const char* d : {"frames", "data", "train", "eval", "rollout"}) {
      CHECK_MESSAGE(fs::exists(dir.file(std::string(d) + "/run_config.txt")), d);
    }
    const auto loss = slurp(dir.file("train/loss.csv"));
    CHECK(std::count(loss.begin(), loss.end(), '\n') == 202);
  }
}
