#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "effort/commands.hpp"
#include "effort/config.hpp"
#include "effort/recording_io.hpp"
#include "oracles.hpp"

using namespace effort;
namespace fs = std::filesystem;

namespace {

const char* kShortIni =
    "[session]\n"
    "trial_duration_s = 6\n"
    "rest_s = 2\n"
    "isometric_burst_s = 0.5\n"
    "\n"
    "[train]\n"
    "epochs = 20\n";

fs::path scratch(const std::string& name) {
  const fs::path p =
      fs::temp_directory_path() / ("effort_cmd_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path short_config_file() {
  static const fs::path p = [] {
    const fs::path dir = scratch("cfg");
    const fs::path f = dir / "short.ini";
    std::ofstream(f) << kShortIni;
    return f;
  }();
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EFFORTSIM_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("CLI exit codes separate usage, config and runtime failures") {
  const fs::path dir = scratch("exit");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("simulate") == 2);
  CHECK(run_cli("simulate --out " + dir.string() + " --fatigue maybe") == 2);
  CHECK(run_cli("sweep --seeds '' --out " + dir.string()) == 2);
  CHECK(run_cli("simulate --config /no/such.ini --out " + dir.string()) == 3);
  std::ofstream(dir / "bad.ini") << "[train]\nepochz = 3\n";
  CHECK(run_cli("print-config --config " + (dir / "bad.ini").string()) == 3);
  CHECK(run_cli("train --recording /no/such/recording.csv --out " + dir.string()) == 4);
  CHECK(run_cli("print-config") == 0);
}

TEST_CASE("simulate, train and evaluate produce deterministic artifacts") {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  const std::string cfg = short_config_file().string();
  for (const fs::path& d : {a, b}) {
    REQUIRE(run_cli("simulate --config " + cfg + " --seed 5 --out " + d.string()) == 0);
    REQUIRE(run_cli("train --config " + cfg + " --recording " + d.string() + " --seed 5 --out " +
                    (d / "model").string()) == 0);
    REQUIRE(run_cli("evaluate --config " + cfg + " --weights " + (d / "model/weights.txt").string() +
                    " --recording " + d.string() + " --out " + (d / "eval").string()) == 0);
  }
  for (const std::string f : {"recording.csv", "emg.bin", "calibration.csv", "config.ini",
                              "model/weights.txt", "model/loss_curve.csv", "eval/rms.csv"}) {
    CAPTURE(f);
    CHECK(sha256_file(a / f) == sha256_file(b / f));
  }
  // Manifests differ only in the paths they record.
  auto strip_paths = [](const fs::path& file) {
    auto j = nlohmann::json::parse(oracle::read_file(file.string()));
    j.erase("output_dir");
    j.erase("config_path");
    for (const char* list : {"inputs", "outputs"})
      for (auto& e : j[list]) e.erase("path");
    return j;
  };
  for (const std::string f : {"manifest.json", "model/train_manifest.json",
                              "eval/evaluate_manifest.json"}) {
    CAPTURE(f);
    CHECK(strip_paths(a / f) == strip_paths(b / f));
  }

  // The manifest names every output with its hash.
  const auto m = nlohmann::json::parse(oracle::read_file((a / "manifest.json").string()));
  CHECK(m["command"] == "simulate");
  CHECK(m["tool_version"] == kToolVersion);
  bool saw_recording = false;
  for (const auto& o : m["outputs"]) {
    if (o["role"] == "recording") {
      saw_recording = true;
      CHECK(o["sha256"] == sha256_file(a / "recording.csv"));
    }
  }
  CHECK(saw_recording);

  // Loss curve: header plus one row per epoch.
  std::ifstream lc(a / "model/loss_curve.csv");
  std::string line;
  std::getline(lc, line);
  CHECK(line == "epoch,mse");
  int rows = 0;
  while (std::getline(lc, line)) rows += !line.empty();
  CHECK(rows == 20);

  // RMS report schema.
  std::ifstream rms(a / "eval/rms.csv");
  std::getline(rms, line);
  CHECK(line.rfind("# units: K in N·m/rad, theta in deg", 0) == 0);
  std::getline(rms, line);
  CHECK(line == "output,First,Second,Third,Whole");
  std::getline(rms, line);
  CHECK(line.rfind("K,", 0) == 0);
  std::getline(rms, line);
  CHECK(line.rfind("theta,", 0) == 0);

  // The recording re-reads with the expected frame count.
  std::ifstream rec(a / "recording.csv");
  CHECK(read_recording_csv(rec).size() == 18 * 60);
  const auto side = read_emg_sidecar(a / "emg.bin");
  CHECK(side.samples.size() == 18u * 6u * 2000u);
}

TEST_CASE("zero epochs leaves the seeded initialization in place") {
  const fs::path d = scratch("zero");
  const std::string cfg = short_config_file().string();
  REQUIRE(run_cli("simulate --config " + cfg + " --seed 2 --out " + d.string()) == 0);
  REQUIRE(run_cli("train --config " + cfg + " --epochs 0 --seed 9 --recording " +
                  (d / "recording.csv").string() + " --out " + (d / "m").string()) == 0);
  std::ifstream in(d / "m/weights.txt");
  const auto wf = read_weights(in);
  CHECK(wf.weights == initial_weights(9));
  CHECK(wf.seed == 9);
}

TEST_CASE("a network that outputs the single label exactly scores zero RMS") {
  auto cfg = load_config_or_default("");
  const TargetScaler s = cfg.scaler();
  const Label y(7.0, 45.0);
  NetworkWeights w;  // zero input weights: every hidden unit sits at 0.5
  const Vec2 target = s.scale(y);
  for (int k = 0; k < 2; ++k) w.w_out.row(k).setConstant(target(k) / 3.0);
  std::vector<LabeledSample> test(30);
  for (std::size_t i = 0; i < test.size(); ++i) {
    test[i].M = Vec6::Random().cwiseAbs().normalized();
    test[i].label = y;
    test[i].t_session = static_cast<double>(i);
  }
  const auto r = evaluate_rms(w, s, test);
  CHECK(r.whole(0) < 1e-12);
  CHECK(r.whole(1) < 1e-12);
  REQUIRE(r.sections);
  for (const auto& sec : *r.sections) CHECK(sec.norm() < 1e-12);
}

TEST_CASE("rms table and csv carry units") {
  RmsReport r;
  r.sections = std::array<Vec2, 3>{Vec2(1, 10), Vec2(2, 20), Vec2(3, 30)};
  r.section_sizes = {2, 2, 3};
  r.whole = Vec2(2.5, 25);
  r.count = 7;
  std::ostringstream csv, table;
  write_rms_csv(csv, r);
  write_rms_table(table, r);
  CHECK(csv.str().find("K,1,2,3,2.5") != std::string::npos);
  CHECK(csv.str().find("theta,10,20,30,25") != std::string::npos);
  CHECK(table.str().find("K [N·m/rad]") != std::string::npos);
  CHECK(table.str().find("theta [deg]") != std::string::npos);
}

TEST_CASE("sweep rejects an empty seed list") {
  SweepOptions o;
  o.out_dir = scratch("empty_sweep");
  std::ostringstream out;
  CHECK_THROWS_AS(cmd_sweep(o, out), std::invalid_argument);
}

TEST_CASE("fatigue override reaches the resolved config") {
  const fs::path d = scratch("fatigue_off");
  REQUIRE(run_cli("simulate --config " + short_config_file().string() +
                  " --fatigue off --seed 1 --out " + d.string()) == 0);
  const auto cfg = load_session_config(d / "config.ini");
  CHECK(cfg.fatigue_beta == Vec6::Zero());
  std::ifstream in(d / "recording.csv");
  for (const auto& f : read_recording_csv(in)) CHECK(f.fatigue == Vec6::Ones());
}

TEST_CASE("short two-seed sweep aggregates per-seed reports") {
  const fs::path d = scratch("sweep");
  SweepOptions o;
  o.config_path = short_config_file().string();
  o.seeds = {1, 2};
  o.out_dir = d;
  o.format = ReportFormat::Csv;
  std::ostringstream out;
  const auto res = cmd_sweep(o, out);
  REQUIRE(res.outcomes.size() == 2);
  CHECK(res.outcomes[0].seed == 1);
  CHECK(fs::exists(d / "rms_seed_1.csv"));
  CHECK(fs::exists(d / "rms_seed_2.csv"));
  CHECK(fs::exists(d / "sweep_manifest.json"));
  const std::string text = oracle::read_file((d / "sweep.csv").string());
  CHECK(text.find("row,output,First,Second,Third,Whole") != std::string::npos);
  CHECK(text.find("seed_2,theta,") != std::string::npos);
  CHECK(text.find("median,K,") != std::string::npos);
  CHECK(text.find("iqr,K,") != std::string::npos);
  // Median of two values is their mean.
  const double m0 = 0.5 * (res.outcomes[0].report.whole(0) + res.outcomes[1].report.whole(0));
  CHECK(res.aggregate.median[3](0) == doctest::Approx(m0).epsilon(1e-12));
  // The sweep matches independent single-seed pipelines.
  auto cfg = load_session_config(o.config_path);
  cfg.fatigue_beta = default_fatigue_beta();
  const auto single = run_pipeline(cfg, 2);
  CHECK(single.report.whole == res.outcomes[1].report.whole);
}

TEST_CASE("quantile interpolates linearly") {
  CHECK(quantile({3, 1, 2, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({1, 2, 3, 4, 5}, 0.25) == doctest::Approx(2.0));
  CHECK(quantile({7}, 0.75) == 7.0);
}
