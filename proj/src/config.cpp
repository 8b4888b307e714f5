#include "effort/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace effort {

ConfigError::ConfigError(std::string source, int line, const std::string& msg)
    : std::runtime_error(line > 0 ? fmt::format("{}:{}: {}", source, line, msg)
                                  : fmt::format("{}: {}", source, msg)),
      source_(std::move(source)),
      line_(line) {}

namespace {

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(const std::string& line) {
  const auto pos = line.find_first_of("#;");
  return pos == std::string::npos ? line : line.substr(0, pos);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  }
  return true;
}

}  // namespace

IniDocument parse_ini(const std::string& text, const std::string& source) {
  IniDocument doc;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  std::set<std::string> seen_sections;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source, lineno, "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!valid_name(section))
        throw ConfigError(source, lineno, fmt::format("invalid section name '{}'", section));
      if (!seen_sections.insert(section).second)
        throw ConfigError(source, lineno, fmt::format("duplicate section [{}]", section));
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source, lineno, fmt::format("expected 'key = value', got '{}'", line));
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!valid_name(key))
      throw ConfigError(source, lineno, fmt::format("invalid key '{}'", key));
    auto& sec = doc[section];
    if (sec.count(key))
      throw ConfigError(source, lineno,
                        fmt::format("duplicate key '{}' (first set on line {})", key,
                                    sec[key].line));
    sec[key] = IniEntry{value, lineno};
  }
  return doc;
}

namespace {

class SectionReader {
 public:
  SectionReader(const IniDocument& doc, std::string name, std::string source)
      : name_(std::move(name)), source_(std::move(source)) {
    if (auto it = doc.find(name_); it != doc.end()) entries_ = &it->second;
  }

  /// Rejects keys that no reader consumed.
  void finish() const {
    if (!entries_) return;
    for (const auto& [k, e] : *entries_) {
      if (!used_.count(k))
        throw ConfigError(source_, e.line, fmt::format("unknown key '{}' in [{}]", k, name_));
    }
  }

  void number(const char* key, double& out) {
    if (const IniEntry* e = find(key)) out = parse_double(e->value, *e, key);
  }

  void positive_int(const char* key, int& out) {
    if (const IniEntry* e = find(key)) {
      int v = 0;
      const auto* end = e->value.data() + e->value.size();
      auto [p, ec] = std::from_chars(e->value.data(), end, v);
      if (ec != std::errc() || p != end)
        fail(*e, fmt::format("'{}' expects an integer, got '{}'", key, e->value));
      out = v;
    }
  }

  void uint64(const char* key, std::uint64_t& out) {
    if (const IniEntry* e = find(key)) {
      std::uint64_t v = 0;
      const auto* end = e->value.data() + e->value.size();
      auto [p, ec] = std::from_chars(e->value.data(), end, v);
      if (ec != std::errc() || p != end)
        fail(*e, fmt::format("'{}' expects a non-negative integer, got '{}'", key, e->value));
      out = v;
    }
  }

  void boolean(const char* key, bool& out) {
    if (const IniEntry* e = find(key)) {
      const std::string& v = e->value;
      if (v == "true" || v == "on" || v == "yes" || v == "1") {
        out = true;
      } else if (v == "false" || v == "off" || v == "no" || v == "0") {
        out = false;
      } else {
        fail(*e, fmt::format("'{}' expects true/false, got '{}'", key, v));
      }
    }
  }

  template <int N>
  bool vector(const char* key, Eigen::Matrix<double, N, 1>& out) {
    const IniEntry* e = find(key);
    if (!e) return false;
    std::vector<double> vals;
    std::string item;
    std::istringstream ss(e->value);
    while (std::getline(ss, item, ',')) vals.push_back(parse_double(trim(item), *e, key));
    if (static_cast<int>(vals.size()) != N)
      fail(*e, fmt::format("'{}' expects {} comma-separated values, got {}", key, N, vals.size()));
    for (int i = 0; i < N; ++i) out(i) = vals[static_cast<std::size_t>(i)];
    return true;
  }

  template <class Enum>
  void choice(const char* key, Enum& out,
              std::initializer_list<std::pair<std::string_view, Enum>> options) {
    const IniEntry* e = find(key);
    if (!e) return;
    std::string names;
    for (const auto& [n, v] : options) {
      if (e->value == n) {
        out = v;
        return;
      }
      names += names.empty() ? std::string(n) : ", " + std::string(n);
    }
    fail(*e, fmt::format("'{}' must be one of {}, got '{}'", key, names, e->value));
  }

  const IniEntry* find(const char* key) {
    if (!entries_) return nullptr;
    auto it = entries_->find(key);
    if (it == entries_->end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  [[noreturn]] void fail(const IniEntry& e, const std::string& msg) const {
    throw ConfigError(source_, e.line, fmt::format("[{}] {}", name_, msg));
  }

 private:
  double parse_double(const std::string& s, const IniEntry& e, const char* key) const {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || p != end || !std::isfinite(v))
      fail(e, fmt::format("'{}' expects a finite number, got '{}'", key, s));
    return v;
  }

  const std::map<std::string, IniEntry>* entries_ = nullptr;
  std::set<std::string> used_;
  std::string name_;
  std::string source_;
};

int first_line(const IniDocument& doc, const std::string& section) {
  auto it = doc.find(section);
  if (it == doc.end() || it->second.empty()) return 0;
  int line = it->second.begin()->second.line;
  for (const auto& [k, e] : it->second) line = std::min(line, e.line);
  return line;
}

const std::set<std::string> kSections = {"session", "trajectory", "impedance_overrides",
                                         "subject", "synergy",    "fatigue",
                                         "emg",     "split",      "train"};

}  // namespace

SessionConfig session_config_from_ini(const IniDocument& doc, const std::string& source) {
  for (const auto& [name, entries] : doc) {
    if (!kSections.count(name)) {
      const int line = entries.empty() ? 0 : entries.begin()->second.line;
      if (name.empty())
        throw ConfigError(source, line, "key outside of any section");
      throw ConfigError(source, line, fmt::format("unknown section [{}]", name));
    }
  }

  SessionConfig cfg;
  {
    SectionReader r(doc, "session", source);
    r.number("trial_duration_s", cfg.timing.trial_duration_s);
    r.number("rest_s", cfg.timing.rest_s);
    r.number("dt", cfg.timing.dt);
    r.number("isometric_burst_s", cfg.timing.isometric_burst_s);
    r.number("isometric_level", cfg.timing.isometric_level);
    r.number("live_tick_hz", cfg.timing.live_tick_hz);
    r.finish();
  }
  {
    SectionReader r(doc, "trajectory", source);
    r.number("center_x1", cfg.trajectory.center(0));
    r.number("center_x2", cfg.trajectory.center(1));
    r.number("circle_radius", cfg.trajectory.circle_radius);
    r.number("semi_major", cfg.trajectory.ellipse_semi_major);
    r.number("semi_minor", cfg.trajectory.ellipse_semi_minor);
    r.number("tolerance_halfwidth", cfg.trajectory.tolerance_halfwidth);
    r.finish();
  }
  {
    SectionReader r(doc, "impedance_overrides", source);
    r.number("inertia", cfg.levels.inertia);
    r.number("damping", cfg.levels.damping);
    r.number("low_stiffness", cfg.levels.low_stiffness);
    r.number("high_stiffness", cfg.levels.high_stiffness);
    r.number("low_period_s", cfg.levels.low_period_s);
    r.number("high_period_s", cfg.levels.high_period_s);
    r.number("super_high_period_s", cfg.levels.super_high_period_s);
    r.finish();
  }
  {
    SectionReader r(doc, "subject", source);
    r.number("kp", cfg.subject.kp);
    r.number("kd", cfg.subject.kd);
    r.number("reaction_delay_s", cfg.subject.reaction_delay);
    r.number("noise_std", cfg.subject.noise_std);
    r.finish();
  }
  {
    SectionReader r(doc, "synergy", source);
    for (int m = 0; m < kMuscles; ++m) {
      Eigen::Matrix<double, 4, 1> row;
      if (r.vector<4>(kMuscleNames[static_cast<std::size_t>(m)].data(), row))
        cfg.synergy.gains.row(m) = row.transpose();
    }
    r.vector<6>("baseline", cfg.synergy.baseline);
    r.finish();
  }
  {
    SectionReader r(doc, "fatigue", source);
    bool enabled = true;
    r.boolean("enabled", enabled);
    Vec6 beta = default_fatigue_beta();
    const IniEntry* beta_entry = nullptr;
    if (r.vector<6>("beta", beta)) beta_entry = r.find("beta");
    r.number("recovery_rate", cfg.recovery_rate);
    if (beta_entry && !enabled)
      r.fail(*beta_entry, "'beta' given while fatigue is disabled");
    cfg.fatigue_beta = enabled ? beta : Vec6::Zero();
    r.finish();
  }
  {
    SectionReader r(doc, "emg", source);
    r.number("sample_rate", cfg.emg.sample_rate);
    r.number("shaping_lo", cfg.emg.band_lo);
    r.number("shaping_hi", cfg.emg.band_hi);
    r.number("gain", cfg.emg.gain);
    r.number("noise_floor", cfg.emg.noise_floor);
    r.number("band_lo", cfg.processing.band_lo);
    r.number("band_hi", cfg.processing.band_hi);
    r.number("lowpass_hz", cfg.processing.lowpass);
    r.number("frame_rate_hz", cfg.processing.frame_rate);
    r.number("running_mean_window_s", cfg.processing.running_mean_window_s);
    r.boolean("normalize_before_filter", cfg.processing.normalize_before_filter);
    cfg.processing.sample_rate = cfg.emg.sample_rate;
    r.finish();
  }
  {
    SectionReader r(doc, "split", source);
    r.choice("mode", cfg.split.mode,
             {{"per-trial-temporal", SplitMode::PerTrialTemporal},
              {"session-temporal", SplitMode::SessionTemporal}});
    r.number("train_fraction", cfg.split.train_fraction);
    r.choice("samples", cfg.split.samples,
             {{"per-frame", SampleMode::PerFrame},
              {"per-trial-average", SampleMode::PerTrialAverage}});
    r.finish();
  }
  {
    SectionReader r(doc, "train", source);
    r.number("lr", cfg.train.lr);
    r.positive_int("epochs", cfg.train.epochs);
    r.positive_int("batch_size", cfg.train.batch_size);
    r.uint64("seed", cfg.train.seed);
    r.finish();
  }

  // Semantic checks are reported against the section that carries the field.
  const std::pair<const char*, std::function<void()>> checks[] = {
      {"trajectory", [&] {
         TrajectoryConfig probe = cfg.trajectory;
         probe.validate();
       }},
      {"impedance_overrides", [&] {
         cfg.levels.impedance(ImpedanceLevel::Low).validate();
         cfg.levels.impedance(ImpedanceLevel::High).validate();
       }},
      {"subject", [&] { cfg.subject.validate(); }},
      {"synergy", [&] { cfg.synergy.validate(); }},
      {"emg", [&] {
         cfg.emg.validate();
         cfg.processing.validate();
       }},
      {"split", [&] { cfg.split.validate(); }},
      {"train", [&] { cfg.train.validate(); }},
      {"session", [&] { cfg.validate(); }},
  };
  for (const auto& [section, check] : checks) {
    try {
      check();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source, first_line(doc, section),
                        fmt::format("[{}] {}", section, e.what()));
    }
  }
  return cfg;
}

SessionConfig parse_session_config(const std::string& text, const std::string& source) {
  return session_config_from_ini(parse_ini(text, source), source);
}

SessionConfig load_session_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), 0, "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_session_config(ss.str(), path.string());
}

namespace {

template <int N>
std::string join(const Eigen::Matrix<double, N, 1>& v) {
  std::string s;
  for (int i = 0; i < N; ++i) s += fmt::format("{}{}", i ? ", " : "", v(i));
  return s;
}

}  // namespace

std::string to_ini(const SessionConfig& cfg) {
  std::string o;
  auto kv = [&](std::string_view k, const auto& v) { o += fmt::format("{} = {}\n", k, v); };
  o += "[session]\n";
  kv("trial_duration_s", cfg.timing.trial_duration_s);
  kv("rest_s", cfg.timing.rest_s);
  kv("dt", cfg.timing.dt);
  kv("isometric_burst_s", cfg.timing.isometric_burst_s);
  kv("isometric_level", cfg.timing.isometric_level);
  kv("live_tick_hz", cfg.timing.live_tick_hz);
  o += "\n[trajectory]\n";
  kv("center_x1", cfg.trajectory.center(0));
  kv("center_x2", cfg.trajectory.center(1));
  kv("circle_radius", cfg.trajectory.circle_radius);
  kv("semi_major", cfg.trajectory.ellipse_semi_major);
  kv("semi_minor", cfg.trajectory.ellipse_semi_minor);
  kv("tolerance_halfwidth", cfg.trajectory.tolerance_halfwidth);
  o += "\n[impedance_overrides]\n";
  kv("inertia", cfg.levels.inertia);
  kv("damping", cfg.levels.damping);
  kv("low_stiffness", cfg.levels.low_stiffness);
  kv("high_stiffness", cfg.levels.high_stiffness);
  kv("low_period_s", cfg.levels.low_period_s);
  kv("high_period_s", cfg.levels.high_period_s);
  kv("super_high_period_s", cfg.levels.super_high_period_s);
  o += "\n[subject]\n";
  kv("kp", cfg.subject.kp);
  kv("kd", cfg.subject.kd);
  kv("reaction_delay_s", cfg.subject.reaction_delay);
  kv("noise_std", cfg.subject.noise_std);
  o += "\n[synergy]\n";
  for (int m = 0; m < kMuscles; ++m) {
    Eigen::Matrix<double, 4, 1> row = cfg.synergy.gains.row(m).transpose();
    kv(kMuscleNames[static_cast<std::size_t>(m)], join<4>(row));
  }
  kv("baseline", join<6>(cfg.synergy.baseline));
  o += "\n[fatigue]\n";
  const bool enabled = (cfg.fatigue_beta.array() != 0.0).any();
  kv("enabled", enabled ? "true" : "false");
  if (enabled) kv("beta", join<6>(cfg.fatigue_beta));
  kv("recovery_rate", cfg.recovery_rate);
  o += "\n[emg]\n";
  kv("sample_rate", cfg.emg.sample_rate);
  kv("shaping_lo", cfg.emg.band_lo);
  kv("shaping_hi", cfg.emg.band_hi);
  kv("gain", cfg.emg.gain);
  kv("noise_floor", cfg.emg.noise_floor);
  kv("band_lo", cfg.processing.band_lo);
  kv("band_hi", cfg.processing.band_hi);
  kv("lowpass_hz", cfg.processing.lowpass);
  kv("frame_rate_hz", cfg.processing.frame_rate);
  kv("running_mean_window_s", cfg.processing.running_mean_window_s);
  kv("normalize_before_filter", cfg.processing.normalize_before_filter ? "true" : "false");
  o += "\n[split]\n";
  kv("mode", cfg.split.mode == SplitMode::PerTrialTemporal ? "per-trial-temporal"
                                                           : "session-temporal");
  kv("train_fraction", cfg.split.train_fraction);
  kv("samples", cfg.split.samples == SampleMode::PerFrame ? "per-frame" : "per-trial-average");
  o += "\n[train]\n";
  kv("lr", cfg.train.lr);
  kv("epochs", cfg.train.epochs);
  kv("batch_size", cfg.train.batch_size);
  kv("seed", cfg.train.seed);
  return o;
}

}  // namespace effort
