// Acceptance checks. Usage: effort_acceptance <criterion>|all
// Prints one PASS/FAIL line per criterion; exit status 0 only if all pass.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>

#include "json.hpp"

#include "effort/commands.hpp"
#include "effort/config.hpp"
#include "effort/rtserver.hpp"
#include "oracles.hpp"

using namespace effort;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kEdgeDbTarget = -3.0;
constexpr double kBandEdgeTolDb = 0.5;
constexpr double kLowpassTolDb = 0.1;
constexpr double kFilterOracleRel = 1e-9;
constexpr double kFilterBudgetS = 1.0;
constexpr int kGradientDraws = 100;
constexpr double kGradientRelTol = 1e-6;
constexpr double kGradientFdStep = 1e-6;
constexpr double kGradientBudgetS = 10.0;
constexpr double kPlantTolRad = 1e-6;
constexpr double kPlantDt = 1e-3;
constexpr double kConvergenceMin = 8.0;
constexpr double kSimplexSumTol = 1e-9;
constexpr int kScaleDraws = 1000;
constexpr double kScaleInvarianceTol = 1e-12;
constexpr int kDegradationSeeds = 10;
constexpr double kDegradationBudgetS = 600.0;
constexpr double kStatedThetaBound = 67.5;  // half the 135 deg label span
constexpr double kStatedKBound = 3.0;       // half the 7 - 1 label gap
constexpr std::uint64_t kDeterminismSeed = 7;
constexpr double kLiveDurationS = 60.0;
constexpr double kLiveNeutralPhaseS = 20.0;
constexpr double kLiveMinRateHz = 30.0;
constexpr double kLiveTorqueTol = 0.01;
constexpr double kLiveZeroTorqueTol = 1e-9;
constexpr double kLiveBaselineTol = 0.03;
constexpr double kLiveOffset = 0.1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  bool primary;
  std::function<Outcome()> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p =
      fs::temp_directory_path() / fmt::format("effort_accept_{}_{}", ::getpid(), name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SessionConfig default_config(bool fatigue) {
  SessionConfig cfg = load_config_or_default("");
  if (!fatigue) cfg.fatigue_beta.setZero();
  return cfg;
}

// Filter responses against the prewarped analog prototype.
Outcome filter_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const ProcessingOptions o;
  const auto bp = design_bandpass(o.band_lo, o.band_hi, o.sample_rate, 1);
  const auto lp = design_lowpass(o.lowpass, o.sample_rate, 1);
  bool ok = true;
  const double lo_db = bp.magnitude_db(o.band_lo);
  const double hi_db = bp.magnitude_db(o.band_hi);
  const double lp_db = lp.magnitude_db(o.lowpass);
  ok &= std::abs(lo_db - kEdgeDbTarget) <= kBandEdgeTolDb;
  ok &= std::abs(hi_db - kEdgeDbTarget) <= kBandEdgeTolDb;
  ok &= std::abs(lp_db - kEdgeDbTarget) <= kLowpassTolDb;

  // Exact zeros: the cascade numerator vanishes identically at z = +1 and z = -1.
  double num_dc = 1.0, num_nyq = 1.0;
  for (const Biquad& q : bp.sections()) {
    num_dc *= q.b0 + q.b1 + q.b2;
    num_nyq *= q.b0 - q.b1 + q.b2;
  }
  ok &= num_dc == 0.0 && num_nyq == 0.0;

  double worst = 0.0;
  for (int i = 1; i < 2000; ++i) {
    const double f = 0.5 * i;
    const double ref_bp = oracle::bandpass_mag(f, o.band_lo, o.band_hi, o.sample_rate);
    const double ref_lp = oracle::lowpass_mag(f, o.lowpass, o.sample_rate);
    worst = std::max(worst, std::abs(bp.magnitude(f) - ref_bp) / std::max(ref_bp, 1e-300));
    if (ref_lp > 1e-12)
      worst = std::max(worst, std::abs(lp.magnitude(f) - ref_lp) / ref_lp);
  }
  ok &= worst < kFilterOracleRel;
  const double secs = seconds_since(t0);
  ok &= secs < kFilterBudgetS;
  return {ok, fmt::format("band edges {:.4f}/{:.4f} dB, low-pass {:.4f} dB, numerator at "
                          "DC/Nyquist {}/{}, max rel dev from prototype {:.2e}, {:.3f} s",
                          lo_db, hi_db, lp_db, num_dc, num_nyq, worst, secs)};
}

// Backprop gradient against central finite differences.
Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const SessionConfig cfg = default_config(false);
  const TargetScaler s = cfg.scaler();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uw(-1.0, 1.0), ua(0.01, 1.0), uk(1.0, 7.0),
      ut(-45.0, 90.0);
  double worst = 0.0;
  for (int d = 0; d < kGradientDraws; ++d) {
    NetworkWeights w;
    for (int i = 0; i < w.w_in.size(); ++i) w.w_in.data()[i] = uw(rng);
    for (int i = 0; i < w.w_out.size(); ++i) w.w_out.data()[i] = uw(rng);
    LabeledSample smp;
    for (int i = 0; i < kMuscles; ++i) smp.M(i) = ua(rng);
    smp.M /= smp.M.sum();
    smp.label = Label(uk(rng), ut(rng));
    const std::vector<LabeledSample> batch{smp};
    auto loss = [&](const NetworkWeights& v) {
      return 0.5 * (forward(v, s, smp.M).raw - s.scale(smp.label)).squaredNorm();
    };
    const Gradient g = loss_gradient(w, batch, s);
    std::vector<double> analytic, numeric;
    auto probe = [&](double* entry, double grad) {
      const double keep = *entry;
      *entry = keep + kGradientFdStep;
      const double up = loss(w);
      *entry = keep - kGradientFdStep;
      const double down = loss(w);
      *entry = keep;
      analytic.push_back(grad);
      numeric.push_back((up - down) / (2.0 * kGradientFdStep));
    };
    for (int i = 0; i < w.w_in.size(); ++i) probe(w.w_in.data() + i, g.d_in.data()[i]);
    for (int i = 0; i < w.w_out.size(); ++i) probe(w.w_out.data() + i, g.d_out.data()[i]);
    worst = std::max(worst, oracle::relative_error(analytic, numeric));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst < kGradientRelTol && secs < kGradientBudgetS;
  return {ok, fmt::format("{} draws, max relative error {:.2e}, {:.3f} s", kGradientDraws, worst,
                          secs)};
}

double plant_step_error(const ImpedanceParams& p, double tau, double dt, double horizon,
                        const TrajectoryConfig& traj) {
  PlantState st = neutral_state(traj, 0.0);
  double worst = 0.0;
  const auto n = static_cast<long>(std::lround(horizon / dt));
  for (long i = 0; i < n; ++i) {
    st = step_plant(st, TorqueVec(tau, -tau), p, traj, dt);
    const Vec2 e = deviation(st, traj);
    const double ref = oracle::step_response(p.inertia, p.damping, p.stiffness, tau, st.time);
    worst = std::max({worst, std::abs(e(0) - ref), std::abs(e(1) + ref)});
  }
  return worst;
}

// Plant step response against the closed-form second-order solution.
Outcome plant_oracle() {
  const SessionConfig cfg = default_config(false);
  const LevelTable& lv = cfg.levels;
  const double tau = 0.5;
  bool ok = true;
  double worst = 0.0;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (ImpedanceLevel il : {ImpedanceLevel::Low, ImpedanceLevel::High}) {
    const ImpedanceParams p = lv.impedance(il);
    for (SpeedLevel sl : {SpeedLevel::Low, SpeedLevel::High, SpeedLevel::SuperHigh}) {
      TrajectoryConfig traj = cfg.trajectory;
      traj.period_s = lv.period(sl);
      worst = std::max(worst, plant_step_error(p, tau, kPlantDt, traj.period_s, traj));
    }
    // Error ratios under dt halving, in the asymptotic range above round-off.
    TrajectoryConfig traj = cfg.trajectory;
    for (double dt : {0.016, 0.008}) {
      const double ratio = plant_step_error(p, tau, dt, 2.0, traj) /
                           plant_step_error(p, tau, dt / 2.0, 2.0, traj);
      min_ratio = std::min(min_ratio, ratio);
    }
  }
  ok = worst < kPlantTolRad && min_ratio >= kConvergenceMin;
  return {ok, fmt::format("max |e - closed form| {:.2e} rad over one period at dt = 1 ms; "
                          "min convergence ratio {:.2f}",
                          worst, min_ratio)};
}

// Protocol against the checked-in golden table and its factorial structure.
Outcome protocol_golden() {
  const auto p = build_protocol();
  std::ifstream in(EFFORT_FIXTURE_DIR "/protocol_golden.csv");
  if (!in) return {false, "golden fixture missing"};
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  bool same = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (rows >= p.size()) {
      same = false;
      break;
    }
    const TrialConfig& t = p[rows];
    const std::string mine =
        fmt::format("{},{},{},{:g},{:g},{:g},{}", t.index, to_string(t.impedance_level),
                    to_string(t.speed_level), t.orientation_deg, t.duration_s, t.rest_s,
                    t.is_isometric ? 1 : 0);
    same &= mine == line;
    ++rows;
  }
  same &= rows == p.size();

  std::set<std::tuple<int, int, double>> combos;
  std::set<int> imps, speeds;
  std::set<double> orients;
  for (int i = 1; i <= 16; ++i) {
    combos.insert({static_cast<int>(p[i].impedance_level), static_cast<int>(p[i].speed_level),
                   p[i].orientation_deg});
    imps.insert(static_cast<int>(p[i].impedance_level));
    speeds.insert(static_cast<int>(p[i].speed_level));
    orients.insert(p[i].orientation_deg);
  }
  const bool factorial = combos.size() == 16 && imps.size() == 2 && speeds.size() == 2 &&
                         orients.size() == 4;
  const bool last = p.size() == 18 && p[17].impedance_level == ImpedanceLevel::Low &&
                    p[17].speed_level == SpeedLevel::SuperHigh && p[17].orientation_deg == 0.0;
  const bool ok = same && factorial && last && p[0].is_isometric;
  return {ok, fmt::format("{} entries, golden match {}, 2x2x4 factorial {}, trial 17 {}/{}/{:g} deg",
                          p.size(), same, factorial, to_string(p[17].impedance_level),
                          to_string(p[17].speed_level), p[17].orientation_deg)};
}

// Distribution frames lie on the simplex; normalization is scale invariant.
Outcome simplex_suite() {
  const auto rec = run_session(default_config(true), 1);
  std::size_t checked = 0, bad = 0, degenerate = 0;
  for (const auto& f : rec.frames) {
    if (f.degenerate) {
      ++degenerate;
      continue;
    }
    ++checked;
    if ((f.distribution.array() < 0.0).any() ||
        std::abs(f.distribution.sum() - 1.0) >= kSimplexSumTol)
      ++bad;
  }
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ua(0.0, 1.0), ue(-3.0, 3.0);
  double worst = 0.0;
  for (int d = 0; d < kScaleDraws; ++d) {
    Vec6 a;
    for (int i = 0; i < kMuscles; ++i) a(i) = ua(rng);
    const double c = std::pow(10.0, ue(rng));
    const auto m1 = effort_distribution(a);
    const auto m2 = effort_distribution(c * a);
    worst = std::max(worst, (m1.M - m2.M).cwiseAbs().maxCoeff());
  }
  const bool ok = bad == 0 && checked > 0 && worst < kScaleInvarianceTol;
  return {ok, fmt::format("{} frames checked ({} degenerate skipped), {} off-simplex; "
                          "{} scale draws, max |M(a) - M(ca)| {:.2e}",
                          checked, degenerate, bad, kScaleDraws, worst)};
}

SweepResult run_sweep(bool fatigue, const fs::path& dir) {
  SweepOptions o;
  o.seeds.resize(kDegradationSeeds);
  for (int i = 0; i < kDegradationSeeds; ++i) o.seeds[i] = static_cast<std::uint64_t>(i + 1);
  o.fatigue = fatigue;
  o.out_dir = dir;
  o.format = ReportFormat::Csv;
  std::ostringstream sink;
  return cmd_sweep(o, sink);
}

std::string medians(const SweepAggregate& a, int out) {
  return fmt::format("{:.3f}/{:.3f}/{:.3f}", a.median[0](out), a.median[1](out), a.median[2](out));
}

// Qualitative degradation: section ordering with fatigue, none without.
Outcome degradation() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = scratch_dir("degradation");
  const auto on = run_sweep(true, dir / "fatigue_on");
  const auto off = run_sweep(false, dir / "fatigue_off");
  const double secs = seconds_since(t0);
  fs::remove_all(dir);

  bool ok = secs < kDegradationBudgetS;
  std::string detail;
  const char* names[2] = {"K", "theta"};
  for (int o = 0; o < 2; ++o) {
    const auto& m = on.aggregate.median;
    const double iqr = on.aggregate.max_section_iqr(o);
    const bool ordered = m[0](o) <= m[1](o) && m[1](o) <= m[2](o);
    const bool spread = m[2](o) - m[0](o) > iqr;
    const auto& n = off.aggregate.median;
    const double off_range = std::max({n[0](o), n[1](o), n[2](o)}) -
                             std::min({n[0](o), n[1](o), n[2](o)});
    const bool flat = off_range <= iqr;
    ok &= ordered && spread && flat;
    detail += fmt::format(
        "{}: on {} (ordered {}, Third-First {:.3f} vs IQR {:.3f}), off {} (range {:.3f} <= IQR {}); ",
        names[o], medians(on.aggregate, o), ordered, m[2](o) - m[0](o), iqr,
        medians(off.aggregate, o), off_range, flat);
  }
  detail += fmt::format("{} seeds x 2, {:.1f} s", kDegradationSeeds, secs);
  return {ok, detail};
}

// Network beats the midpoint predictor without fatigue.
Outcome learnability() {
  const SessionConfig cfg = default_config(false);
  std::vector<double> k_labels, theta_labels;
  for (const auto& t : build_protocol())
    if (is_estimation_trial(t.index)) {
      const Label y = cfg.levels.label(t);
      k_labels.push_back(y(0));
      theta_labels.push_back(y(1));
    }
  const double k_floor = std::min(kStatedKBound, oracle::midpoint_rms(k_labels));
  const double theta_floor = std::min(kStatedThetaBound, oracle::midpoint_rms(theta_labels));
  const auto r = run_pipeline(cfg, 1).report;
  const bool ok = r.whole(0) < k_floor && r.whole(1) < theta_floor;
  return {ok, fmt::format("whole-test RMS K {:.3f} < {:.3f} N·m/rad, theta {:.2f} < {:.2f} deg "
                          "(midpoint predictor; stated bound {:.1f})",
                          r.whole(0), k_floor, r.whole(1), theta_floor, kStatedThetaBound)};
}

nlohmann::json manifest_without_paths(const fs::path& file) {
  auto j = nlohmann::json::parse(oracle::read_file(file.string()));
  j.erase("output_dir");
  j.erase("config_path");
  for (const char* list : {"inputs", "outputs"})
    for (auto& e : j[list]) e.erase("path");
  return j;
}

// Two full simulate, train, evaluate runs agree byte for byte.
Outcome determinism() {
  const fs::path root = scratch_dir("determinism");
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    cmd_simulate({"", kDeterminismSeed, d, {}});
    cmd_train({"", d, kDeterminismSeed, d / "model", {}});
    EvaluateOptions e;
    e.weights = d / "model" / "weights.txt";
    e.recording = d;
    e.out_dir = d / "eval";
    std::ostringstream sink;
    cmd_evaluate(e, sink);
  }
  std::size_t same = 0, total = 0;
  std::string diff;
  for (const std::string f : {"recording.csv", "emg.bin", "calibration.csv", "config.ini",
                              "model/weights.txt", "model/loss_curve.csv", "eval/rms.csv"}) {
    ++total;
    if (sha256_file(root / "a" / f) == sha256_file(root / "b" / f)) {
      ++same;
    } else {
      diff += f + " ";
    }
  }
  for (const std::string f : {"manifest.json", "model/train_manifest.json",
                              "eval/evaluate_manifest.json"}) {
    ++total;
    if (manifest_without_paths(root / "a" / f) == manifest_without_paths(root / "b" / f)) {
      ++same;
    } else {
      diff += f + " ";
    }
  }
  fs::remove_all(root);
  return {same == total,
          fmt::format("{}/{} artifacts identical (manifests compared without paths){}", same,
                      total, diff.empty() ? "" : "; differ: " + diff)};
}

// Scripted client over a real socket: neutral echo, then a constant offset at high stiffness.
Outcome live_loop() {
  namespace asio = boost::asio;
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;
  using tcp = asio::ip::tcp;
  using nlohmann::json;

  ServerOptions opt;
  opt.cfg = default_config(true);
  opt.seed = 1;
  opt.port = 0;
  SessionServer server(opt);
  std::thread th([&] { server.run(); });

  const auto protocol = build_protocol(opt.cfg.timing.trial_duration_s, opt.cfg.timing.rest_s);
  int high_trial = -1;
  for (const auto& t : protocol)
    if (t.index > 1 && is_estimation_trial(t.index) &&
        t.impedance_level == ImpedanceLevel::High) {
      high_trial = t.index;
      break;
    }
  const double h = 1.0 / opt.cfg.timing.live_tick_hz;

  asio::io_context ioc;
  websocket::stream<tcp::socket> ws(ioc);
  tcp::resolver resolver(ioc);
  asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  ws.next_layer().set_option(tcp::no_delay(true));
  ws.handshake("127.0.0.1", "/session");
  ws.write(asio::buffer(std::string(R"({"type":"start"})")));

  TrajectoryConfig traj;
  int trial = 0;
  bool offset_phase = false;
  int fresh_run = 0;
  std::size_t states = 0, neutral_checked = 0, neutral_bad = 0, offset_checked = 0,
              offset_bad = 0, stale = 0, misaligned = 0, dist_frames = 0;
  double worst_zero = 0.0, worst_offset = 0.0;
  Vec6 dist_sum = Vec6::Zero();
  beast::flat_buffer buf;
  const auto t0 = std::chrono::steady_clock::now();
  while (seconds_since(t0) < kLiveDurationS) {
    buf.clear();
    ws.read(buf);
    const json f = json::parse(beast::buffers_to_string(buf.data()));
    if (f["type"] == "geometry") {
      trial = f["trial"].get<int>();
      traj.center = Point2(f["center"][0].get<double>(), f["center"][1].get<double>());
      traj.circle_radius = f["circle_radius"].get<double>();
      traj.ellipse_semi_major = f["semi_major"].get<double>();
      traj.ellipse_semi_minor = f["semi_minor"].get<double>();
      traj.orientation_deg = f["orientation_deg"].get<double>();
      traj.period_s = f["period_s"].get<double>();
      traj.tolerance_halfwidth = f["tolerance_halfwidth"].get<double>();
      fresh_run = 0;
      continue;
    }
    if (f["type"] != "state") continue;
    ++states;
    const double t = f["t"].get<double>();
    if (f["stale"].get<bool>()) {
      ++stale;
      fresh_run = 0;
    } else {
      ++fresh_run;
    }
    // Torque uses finite differences over three ticks; judge only windows in which
    // every tick consumed the position stamped for it.
    const bool aligned = !f["pos_t"].is_null() && std::abs(f["pos_t"].get<double>() - t) < 1e-9;
    if (!aligned) {
      fresh_run = 0;
      ++misaligned;
    }
    const bool judged = fresh_run >= 3 && f["phase"] == "trial";
    const Vec2 tau(f["torque"][0].get<double>(), f["torque"][1].get<double>());
    if (!offset_phase && trial == 1 && judged) {
      ++neutral_checked;
      worst_zero = std::max(worst_zero, tau.cwiseAbs().maxCoeff());
      neutral_bad += tau.cwiseAbs().maxCoeff() > kLiveZeroTorqueTol;
      if (f["new_frame"].get<bool>() && t > 2.0) {
        for (int m = 0; m < kMuscles; ++m) dist_sum(m) += f["dist"][m].get<double>();
        ++dist_frames;
      }
    }
    if (offset_phase && trial == high_trial && judged && t > 5 * h) {
      ++offset_checked;
      const double dev = std::max(std::abs(tau(0) - opt.cfg.levels.high_stiffness * kLiveOffset),
                                  std::abs(tau(1)));
      worst_offset = std::max(worst_offset, dev);
      offset_bad += dev > kLiveTorqueTol;
    }
    if (!offset_phase && seconds_since(t0) >= kLiveNeutralPhaseS) {
      offset_phase = true;
      for (int i = 1; i < high_trial; ++i)
        ws.write(asio::buffer(std::string(R"({"type":"next_trial"})")));
      continue;
    }
    Point2 p = neutral_point(traj, t + h);
    if (offset_phase) p(0) += kLiveOffset;
    ws.write(asio::buffer(json{{"type", "pos"}, {"x1", p(0)}, {"x2", p(1)}, {"t", t + h}}.dump()));
  }
  const double secs = seconds_since(t0);
  beast::error_code ec;
  ws.close(websocket::close_code::normal, ec);
  server.stop();
  th.join();

  const double rate = states / secs;
  const Vec6 baseline = opt.cfg.synergy.baseline / opt.cfg.synergy.baseline.sum();
  const double dist_dev =
      dist_frames ? (dist_sum / static_cast<double>(dist_frames) - baseline).cwiseAbs().maxCoeff()
                  : 1.0;
  const bool ok = rate >= kLiveMinRateHz && neutral_checked > 0 && neutral_bad == 0 &&
                  offset_checked > 0 && offset_bad == 0 && dist_dev <= kLiveBaselineTol;
  return {ok, fmt::format("{:.1f} Hz over {:.1f} s ({} stale ticks, {} misaligned); neutral: {} ticks, max |tau| "
                          "{:.1e}, mean dist dev from baseline {:.4f}; offset on trial {}: {} "
                          "ticks, max |tau - 0.7| {:.1e}",
                          rate, secs, stale, misaligned, neutral_checked, worst_zero, dist_dev, high_trial,
                          offset_checked, worst_offset)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"filter", true, filter_oracle},
      {"gradient", true, gradient_check},
      {"plant", true, plant_oracle},
      {"protocol", true, protocol_golden},
      {"simplex", true, simplex_suite},
      {"degradation", true, degradation},
      {"learnability", true, learnability},
      {"determinism", true, determinism},
      {"live_loop", false, live_loop},
  };
  const std::string which = argc > 1 ? argv[1] : "all";
  bool any = false, all_pass = true;
  for (const auto& c : criteria) {
    if (which != "all" && which != c.name) continue;
    any = true;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    all_pass &= r.pass;
    std::cout << fmt::format("{} [{}] {} ({:.2f} s): {}\n", r.pass ? "PASS" : "FAIL",
                             c.primary ? "primary" : "secondary", c.name, seconds_since(t0),
                             r.detail)
              << std::flush;
  }
  if (!any) {
    std::cerr << "unknown criterion '" << which << "'; use one of:";
    for (const auto& c : criteria) std::cerr << " " << c.name;
    std::cerr << " all\n";
    return 2;
  }
  return all_pass ? 0 : 1;
}
