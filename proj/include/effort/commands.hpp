#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "effort/protocol.hpp"

namespace effort {

inline constexpr const char* kToolVersion = "0.1.0";

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);

/// Run record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string tool_version = kToolVersion;
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, std::filesystem::path>> inputs;
  std::vector<std::pair<std::string, std::filesystem::path>> outputs;

  nlohmann::ordered_json to_json() const;
  void write(const std::filesystem::path& path) const;
};

/// Loads a config file, or the built-in defaults when `path` is empty.
SessionConfig load_config_or_default(const std::string& path);

/// CLI-level overrides shared by several commands.
struct Overrides {
  std::optional<double> split_fraction;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<bool> fatigue;

  void apply(SessionConfig& cfg) const;
};

struct SimulateOptions {
  std::string config_path;  // empty: defaults
  std::uint64_t seed = 1;
  std::filesystem::path out_dir;
  Overrides overrides;
};

struct SimulateResult {
  std::filesystem::path recording_csv;
  std::filesystem::path emg_sidecar;
  std::filesystem::path calibration_csv;
  std::filesystem::path manifest;
  std::size_t frames = 0;
  std::uint64_t raw_samples = 0;
};

SimulateResult cmd_simulate(const SimulateOptions& opt);

struct TrainOptions {
  std::string config_path;
  std::filesystem::path recording;  // recording CSV or a simulate output directory
  std::uint64_t seed = 1;           // weight initialization and shuffling
  std::filesystem::path out_dir;
  Overrides overrides;
};

struct TrainCommandResult {
  std::filesystem::path weights;
  std::filesystem::path loss_curve_csv;
  std::filesystem::path manifest;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
};

TrainCommandResult cmd_train(const TrainOptions& opt);

enum class ReportFormat { Csv, Table };

struct EvaluateOptions {
  std::string config_path;
  std::filesystem::path weights;
  std::filesystem::path recording;
  std::optional<std::filesystem::path> out_dir;  // rms.csv and manifest when set
  Overrides overrides;
  ReportFormat format = ReportFormat::Table;
};

RmsReport cmd_evaluate(const EvaluateOptions& opt, std::ostream& out);

/// RMS report as CSV: columns output, First, Second, Third, Whole.
void write_rms_csv(std::ostream& os, const RmsReport& r);
void write_rms_table(std::ostream& os, const RmsReport& r);

/// Section RMS of one seed's simulate, split, train and evaluate run.
struct SeedOutcome {
  std::uint64_t seed = 0;
  RmsReport report;
};

/// Runs the whole pipeline in memory for one seed. Training uses the same seed.
SeedOutcome run_pipeline(const SessionConfig& cfg, std::uint64_t seed);

struct SweepAggregate {
  // [section][output]; sections are First, Second, Third, Whole.
  std::array<Vec2, 4> median{};
  std::array<Vec2, 4> iqr{};
  Vec2 max_section_iqr = Vec2::Zero();  // over First, Second, Third
};

SweepAggregate aggregate_sweep(const std::vector<SeedOutcome>& outcomes);

struct SweepOptions {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  bool fatigue = true;
  std::filesystem::path out_dir;
  Overrides overrides;
  ReportFormat format = ReportFormat::Table;
};

struct SweepResult {
  std::vector<SeedOutcome> outcomes;
  SweepAggregate aggregate;
};

SweepResult cmd_sweep(const SweepOptions& opt, std::ostream& out);

/// Linear-interpolated quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> v, double q);

}  // namespace effort
