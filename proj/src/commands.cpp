#include "effort/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "effort/config.hpp"
#include "effort/recording_io.hpp"

namespace effort {

namespace fs = std::filesystem;

namespace {

std::string to_hex(const unsigned char* d, unsigned n) {
  std::string s;
  s.reserve(2 * n);
  for (unsigned i = 0; i < n; ++i) s += fmt::format("{:02x}", d[i]);
  return s;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("sha256: digest init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* p, std::size_t n) {
    if (EVP_DigestUpdate(ctx_, p, n) != 1) throw std::runtime_error("sha256: update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_DigestFinal_ex(ctx_, md, &len) != 1)
      throw std::runtime_error("sha256: final failed");
    return to_hex(md, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
  return os;
}

void finish(std::ofstream& os, const fs::path& p) {
  os.close();
  if (os.fail()) throw std::runtime_error("write failed: " + p.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("cannot create output directory " + dir.string());
}

fs::path resolve_recording(const fs::path& p) {
  return fs::is_directory(p) ? p / "recording.csv" : p;
}

SessionRecording load_recording(const fs::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open recording " + csv.string());
  SessionRecording rec;
  try {
    rec.frames = read_recording_csv(in);
  } catch (const RecordingFormatError& e) {
    throw RecordingFormatError(csv.string() + ": " + e.what());
  }
  return rec;
}

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* const kOutputs[2] = {"K", "theta"};

double section_value(const RmsReport& r, int section, int output) {
  if (section == 3) return r.whole(output);
  if (!r.sections) return std::numeric_limits<double>::quiet_NaN();
  return (*r.sections)[static_cast<std::size_t>(section)](output);
}

}  // namespace

std::string sha256_bytes(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for hashing");
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["tool_version"] = tool_version;
  j["config"] = config_path.empty() ? nlohmann::ordered_json(nullptr)
                                    : nlohmann::ordered_json(config_path);
  j["seeds"] = seeds;
  j["output_dir"] = output_dir;
  j["parameters"] = parameters;
  auto files = [](const auto& list) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& [role, path] : list) {
      arr.push_back({{"role", role},
                     {"path", path.string()},
                     {"bytes", fs::file_size(path)},
                     {"sha256", sha256_file(path)}});
    }
    return arr;
  };
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  return j;
}

void RunManifest::write(const fs::path& path) const {
  auto os = open_out(path);
  os << to_json().dump(2) << '\n';
  finish(os, path);
}

SessionConfig load_config_or_default(const std::string& path) {
  if (path.empty()) {
    SessionConfig cfg;
    cfg.fatigue_beta = default_fatigue_beta();
    cfg.validate();
    return cfg;
  }
  return load_session_config(path);
}

void Overrides::apply(SessionConfig& cfg) const {
  if (split_fraction) cfg.split.train_fraction = *split_fraction;
  if (epochs) cfg.train.epochs = *epochs;
  if (lr) cfg.train.lr = *lr;
  if (fatigue) {
    if (!*fatigue) {
      cfg.fatigue_beta.setZero();
    } else if ((cfg.fatigue_beta.array() == 0.0).all()) {
      cfg.fatigue_beta = default_fatigue_beta();
    }
  }
  try {
    cfg.split.validate();
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("command line", 0, e.what());
  }
}

namespace {

nlohmann::ordered_json overrides_json(const Overrides& o) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (o.split_fraction) j["split_fraction"] = *o.split_fraction;
  if (o.epochs) j["epochs"] = *o.epochs;
  if (o.lr) j["lr"] = *o.lr;
  if (o.fatigue) j["fatigue"] = *o.fatigue ? "on" : "off";
  return j;
}

}  // namespace

SimulateResult cmd_simulate(const SimulateOptions& opt) {
  SessionConfig cfg = load_config_or_default(opt.config_path);
  opt.overrides.apply(cfg);
  ensure_dir(opt.out_dir);

  SimulateResult res;
  res.recording_csv = opt.out_dir / "recording.csv";
  res.emg_sidecar = opt.out_dir / "emg.bin";
  res.calibration_csv = opt.out_dir / "calibration.csv";
  res.manifest = opt.out_dir / "manifest.json";
  const fs::path resolved = opt.out_dir / "config.ini";

  EmgSidecarWriter sidecar(res.emg_sidecar,
                           static_cast<std::uint32_t>(std::lround(cfg.emg.sample_rate)));
  const SessionRecording rec =
      run_session(cfg, opt.seed, [&](std::span<const Vec6> block) { sidecar.append(block); });
  sidecar.close();

  {
    auto os = open_out(res.recording_csv);
    write_recording_csv(os, rec.frames);
    finish(os, res.recording_csv);
  }
  {
    auto os = open_out(res.calibration_csv);
    write_calibration_csv(os, rec.calibration);
    finish(os, res.calibration_csv);
  }
  {
    auto os = open_out(resolved);
    os << to_ini(cfg);
    finish(os, resolved);
  }
  res.frames = rec.frames.size();
  res.raw_samples = rec.raw_samples;

  RunManifest m;
  m.command = "simulate";
  m.config_path = opt.config_path;
  m.seeds = {opt.seed};
  m.output_dir = opt.out_dir.string();
  m.parameters = overrides_json(opt.overrides);
  m.parameters["frames"] = res.frames;
  m.parameters["raw_samples"] = res.raw_samples;
  m.parameters["session_end_s"] = rec.session_end_s;
  if (!opt.config_path.empty()) m.inputs.emplace_back("config", opt.config_path);
  m.outputs = {{"resolved_config", resolved},
               {"recording", res.recording_csv},
               {"emg_sidecar", res.emg_sidecar},
               {"calibration", res.calibration_csv}};
  m.write(res.manifest);
  return res;
}

TrainCommandResult cmd_train(const TrainOptions& opt) {
  SessionConfig cfg = load_config_or_default(opt.config_path);
  opt.overrides.apply(cfg);
  cfg.train.seed = opt.seed;
  const fs::path csv = resolve_recording(opt.recording);
  const SessionRecording rec = load_recording(csv);
  const DatasetSplit split = split_dataset(rec, cfg.split);
  const TargetScaler scaler = cfg.scaler();
  const TrainResult tr = train(split.train, scaler, cfg.train);

  ensure_dir(opt.out_dir);
  TrainCommandResult res;
  res.weights = opt.out_dir / "weights.txt";
  res.loss_curve_csv = opt.out_dir / "loss_curve.csv";
  res.manifest = opt.out_dir / "train_manifest.json";
  res.train_samples = split.train.size();
  res.test_samples = split.test.size();
  {
    auto os = open_out(res.weights);
    write_weights(os, WeightsFile{tr.weights, scaler, opt.seed});
    finish(os, res.weights);
  }
  {
    auto os = open_out(res.loss_curve_csv);
    os << "epoch,mse\n";
    for (std::size_t e = 0; e < tr.loss_curve.size(); ++e)
      os << e + 1 << ',' << fmt_num(tr.loss_curve[e]) << '\n';
    finish(os, res.loss_curve_csv);
  }

  RunManifest m;
  m.command = "train";
  m.config_path = opt.config_path;
  m.seeds = {opt.seed};
  m.output_dir = opt.out_dir.string();
  m.parameters = overrides_json(opt.overrides);
  m.parameters["epochs"] = cfg.train.epochs;
  m.parameters["lr"] = cfg.train.lr;
  m.parameters["batch_size"] = cfg.train.batch_size;
  m.parameters["train_fraction"] = cfg.split.train_fraction;
  m.parameters["train_samples"] = res.train_samples;
  if (!opt.config_path.empty()) m.inputs.emplace_back("config", opt.config_path);
  m.inputs.emplace_back("recording", csv);
  m.outputs = {{"weights", res.weights}, {"loss_curve", res.loss_curve_csv}};
  m.write(res.manifest);
  return res;
}

void write_rms_csv(std::ostream& os, const RmsReport& r) {
  os << "# units: K in N·m/rad, theta in deg; test samples per section "
     << r.section_sizes[0] << "/" << r.section_sizes[1] << "/" << r.section_sizes[2]
     << ", whole " << r.count << "\n";
  os << "output,First,Second,Third,Whole\n";
  for (int o = 0; o < 2; ++o) {
    os << kOutputs[o];
    for (int s = 0; s < 4; ++s) os << ',' << fmt_num(section_value(r, s, o));
    os << '\n';
  }
}

void write_rms_table(std::ostream& os, const RmsReport& r) {
  os << fmt::format("{:<18}{:>10}{:>10}{:>10}{:>10}\n", "RMS error", "First", "Second",
                    "Third", "Whole");
  // Padded by hand: the middle dot is two bytes but one column wide.
  const char* labels[2] = {"K [N·m/rad]       ", "theta [deg]       "};
  for (int o = 0; o < 2; ++o) {
    os << labels[o];
    for (int s = 0; s < 4; ++s) os << fmt::format("{:>10.3f}", section_value(r, s, o));
    os << '\n';
  }
  os << fmt::format("{:<18}{:>10}{:>10}{:>10}{:>10}\n", "samples", r.section_sizes[0],
                    r.section_sizes[1], r.section_sizes[2], r.count);
}

RmsReport cmd_evaluate(const EvaluateOptions& opt, std::ostream& out) {
  SessionConfig cfg = load_config_or_default(opt.config_path);
  opt.overrides.apply(cfg);
  WeightsFile wf;
  {
    std::ifstream in(opt.weights, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open weights " + opt.weights.string());
    wf = read_weights(in);
  }
  const fs::path csv = resolve_recording(opt.recording);
  const SessionRecording rec = load_recording(csv);
  const DatasetSplit split = split_dataset(rec, cfg.split);
  const RmsReport report = evaluate_rms(wf.weights, wf.scaler, split.test);

  if (opt.format == ReportFormat::Csv) {
    write_rms_csv(out, report);
  } else {
    write_rms_table(out, report);
  }

  if (opt.out_dir) {
    ensure_dir(*opt.out_dir);
    const fs::path rms = *opt.out_dir / "rms.csv";
    auto os = open_out(rms);
    write_rms_csv(os, report);
    finish(os, rms);
    RunManifest m;
    m.command = "evaluate";
    m.config_path = opt.config_path;
    m.seeds = {wf.seed};
    m.output_dir = opt.out_dir->string();
    m.parameters = overrides_json(opt.overrides);
    m.parameters["test_samples"] = report.count;
    if (!opt.config_path.empty()) m.inputs.emplace_back("config", opt.config_path);
    m.inputs.emplace_back("weights", opt.weights);
    m.inputs.emplace_back("recording", csv);
    m.outputs = {{"rms", rms}};
    m.write(*opt.out_dir / "evaluate_manifest.json");
  }
  return report;
}

SeedOutcome run_pipeline(const SessionConfig& cfg, std::uint64_t seed) {
  const SessionRecording rec = run_session(cfg, seed);
  const DatasetSplit split = split_dataset(rec, cfg.split);
  TrainHyper hyper = cfg.train;
  hyper.seed = seed;
  const TargetScaler scaler = cfg.scaler();
  const TrainResult tr = train(split.train, scaler, hyper);
  return SeedOutcome{seed, evaluate_rms(tr.weights, scaler, split.test)};
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

SweepAggregate aggregate_sweep(const std::vector<SeedOutcome>& outcomes) {
  if (outcomes.empty()) throw std::invalid_argument("aggregate_sweep: no outcomes");
  SweepAggregate a;
  for (int s = 0; s < 4; ++s) {
    for (int o = 0; o < 2; ++o) {
      std::vector<double> v;
      for (const auto& oc : outcomes) v.push_back(section_value(oc.report, s, o));
      a.median[static_cast<std::size_t>(s)](o) = quantile(v, 0.5);
      a.iqr[static_cast<std::size_t>(s)](o) = quantile(v, 0.75) - quantile(v, 0.25);
    }
  }
  for (int o = 0; o < 2; ++o) {
    a.max_section_iqr(o) = std::max({a.iqr[0](o), a.iqr[1](o), a.iqr[2](o)});
  }
  return a;
}

SweepResult cmd_sweep(const SweepOptions& opt, std::ostream& out) {
  if (opt.seeds.empty()) throw std::invalid_argument("sweep: empty seed list");
  SessionConfig cfg = load_config_or_default(opt.config_path);
  Overrides ov = opt.overrides;
  ov.fatigue = opt.fatigue;
  ov.apply(cfg);
  ensure_dir(opt.out_dir);

  SweepResult res;
  res.outcomes.resize(opt.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&] {
    for (std::size_t i = next++; i < opt.seeds.size(); i = next++) {
      try {
        res.outcomes[i] = run_pipeline(cfg, opt.seeds[i]);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::clamp<unsigned>(std::thread::hardware_concurrency(), 1u,
                                                  static_cast<unsigned>(opt.seeds.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);

  res.aggregate = aggregate_sweep(res.outcomes);

  std::vector<std::pair<std::string, fs::path>> outputs;
  for (const auto& oc : res.outcomes) {
    const fs::path p = opt.out_dir / fmt::format("rms_seed_{}.csv", oc.seed);
    auto os = open_out(p);
    write_rms_csv(os, oc.report);
    finish(os, p);
    outputs.emplace_back(fmt::format("rms_seed_{}", oc.seed), p);
  }

  std::ostringstream csv;
  csv << "# units: K in N·m/rad, theta in deg; fatigue " << (opt.fatigue ? "on" : "off")
      << "\n";
  csv << "row,output,First,Second,Third,Whole\n";
  auto row = [&](const std::string& name, int o, auto value) {
    csv << name << ',' << kOutputs[o];
    for (int s = 0; s < 4; ++s) csv << ',' << fmt_num(value(s));
    csv << '\n';
  };
  for (const auto& oc : res.outcomes) {
    for (int o = 0; o < 2; ++o)
      row(fmt::format("seed_{}", oc.seed), o, [&](int s) { return section_value(oc.report, s, o); });
  }
  for (int o = 0; o < 2; ++o)
    row("median", o, [&](int s) { return res.aggregate.median[static_cast<std::size_t>(s)](o); });
  for (int o = 0; o < 2; ++o)
    row("iqr", o, [&](int s) { return res.aggregate.iqr[static_cast<std::size_t>(s)](o); });

  const fs::path sweep_csv = opt.out_dir / "sweep.csv";
  {
    auto os = open_out(sweep_csv);
    os << csv.str();
    finish(os, sweep_csv);
  }
  outputs.emplace_back("sweep", sweep_csv);

  if (opt.format == ReportFormat::Csv) {
    out << csv.str();
  } else {
    out << fmt::format("{} seeds, fatigue {}\n", res.outcomes.size(), opt.fatigue ? "on" : "off");
    out << fmt::format("{:<18}{:>10}{:>10}{:>10}{:>10}\n", "median RMS", "First", "Second",
                       "Third", "Whole");
    const char* labels[2] = {"K [N·m/rad]       ", "theta [deg]       "};
    for (int o = 0; o < 2; ++o) {
      out << labels[o];
      for (int s = 0; s < 4; ++s)
        out << fmt::format("{:>10.3f}", res.aggregate.median[static_cast<std::size_t>(s)](o));
      out << '\n';
    }
    out << fmt::format("max section IQR: K {:.3f}, theta {:.3f}\n", res.aggregate.max_section_iqr(0),
                       res.aggregate.max_section_iqr(1));
  }

  RunManifest m;
  m.command = "sweep";
  m.config_path = opt.config_path;
  m.seeds = opt.seeds;
  m.output_dir = opt.out_dir.string();
  m.parameters = overrides_json(ov);
  if (!opt.config_path.empty()) m.inputs.emplace_back("config", opt.config_path);
  m.outputs = outputs;
  m.write(opt.out_dir / "sweep_manifest.json");
  return res;
}

}  // namespace effort
