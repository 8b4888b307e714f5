#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "effort/dynamics.hpp"
#include "effort/emgproc.hpp"
#include "effort/estimator.hpp"
#include "effort/musclesim.hpp"
#include "effort/trajectory.hpp"

namespace effort {

enum class ImpedanceLevel { Low, High };
enum class SpeedLevel { Low, High, SuperHigh };

std::string_view to_string(ImpedanceLevel l);
std::string_view to_string(SpeedLevel l);

/// One row of the experiment plan.
struct TrialConfig {
  int index = 0;
  ImpedanceLevel impedance_level = ImpedanceLevel::Low;
  SpeedLevel speed_level = SpeedLevel::Low;
  double orientation_deg = 0.0;
  double duration_s = 60.0;
  double rest_s = 60.0;
  bool is_isometric = false;

  bool operator==(const TrialConfig&) const = default;
};

/// Numeric resolution of the impedance and speed labels.
struct LevelTable {
  double inertia = 0.035;        // kg·m²/rad, both levels
  double damping = 0.4;          // N·m·s/rad, both levels
  double low_stiffness = 1.0;    // N·m/rad
  double high_stiffness = 7.0;   // N·m/rad
  double low_period_s = 8.0;
  double high_period_s = 4.0;
  double super_high_period_s = 2.0;

  ImpedanceParams impedance(ImpedanceLevel l) const;
  double period(SpeedLevel l) const;
  Label label(const TrialConfig& t) const;  // (K, theta)
};

/// Trial 0 (isometric calibration), trials 1-16 (2x2x4 factorial) and
/// trial 17 (Low impedance, Super-high speed, 0 deg).
std::vector<TrialConfig> build_protocol(double duration_s = 60.0, double rest_s = 60.0);

/// Trials that feed the estimator (1-16).
bool is_estimation_trial(int trial_index);

enum class SplitMode { PerTrialTemporal, SessionTemporal };
enum class SampleMode { PerFrame, PerTrialAverage };

struct SplitPolicy {
  SplitMode mode = SplitMode::PerTrialTemporal;
  double train_fraction = 0.5;
  SampleMode samples = SampleMode::PerFrame;

  void validate() const;
};

struct SessionTiming {
  double trial_duration_s = 60.0;
  double rest_s = 60.0;
  double dt = 0.001;               // plant step
  double isometric_burst_s = 5.0;  // per muscle, followed by equal relaxation
  double isometric_level = 3.0;    // envelope drive during a burst
  double live_tick_hz = 50.0;
};

struct SessionConfig {
  TrajectoryConfig trajectory;  // orientation and period are set per trial
  LevelTable levels;
  SubjectModel subject;
  SynergyMatrix synergy = SynergyMatrix::defaults();
  Vec6 fatigue_beta = Vec6::Constant(0.0);
  double recovery_rate = 0.0;  // 1/s during rests
  EmgSynthConfig emg;
  ProcessingOptions processing;
  SessionTiming timing;
  SplitPolicy split;
  TrainHyper train;

  void validate() const;
  TargetScaler scaler() const;
  TrajectoryConfig trajectory_for(const TrialConfig& t) const;
};

/// Per-muscle fatigue rates used when fatigue is enabled.
Vec6 default_fatigue_beta();

struct FrameRow {
  double t_session = 0.0;
  int trial = 0;
  Point2 neutral = Point2::Zero();
  Point2 target = Point2::Zero();
  Point2 actual = Point2::Zero();
  Vec2 deviation = Vec2::Zero();
  TorqueVec subject_torque = TorqueVec::Zero();
  TorqueVec impedance_torque = TorqueVec::Zero();
  std::uint64_t raw_offset = 0;  // first sample in the EMG sidecar
  std::uint32_t raw_count = 0;
  Vec6 activation = Vec6::Zero();
  Vec6 distribution = Vec6::Zero();
  bool degenerate = false;
  Vec6 fatigue = Vec6::Ones();
  Label label = Label::Zero();  // NaN for the isometric trial
};

struct SessionRecording {
  std::vector<FrameRow> frames;
  MaxActivations calibration;
  double session_end_s = 0.0;
  std::uint64_t raw_samples = 0;
};

/// Receives raw EMG blocks in session order.
using RawEmgSink = std::function<void(std::span<const Vec6>)>;

class SessionError : public std::runtime_error {
 public:
  SessionError(int trial, const std::string& msg)
      : std::runtime_error("trial " + std::to_string(trial) + ": " + msg), trial_(trial) {}
  int trial() const { return trial_; }

 private:
  int trial_;
};

/// Derives an independent 64-bit stream seed from a session seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Synthetic isometric calibration trial: one maximal burst per muscle.
/// Appends the fatigue multipliers at each frame end to `frame_fatigue`.
std::vector<Vec6> synthesize_isometric(const SessionConfig& cfg, EmgSynthesizer& synth,
                                       FatigueState& fatigue,
                                       std::vector<Vec6>* frame_fatigue = nullptr);

SessionRecording run_session(const SessionConfig& cfg, std::uint64_t seed,
                             const RawEmgSink& sink = {});

struct DatasetSplit {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

/// Trials 0 and 17 and degenerate frames are never included.
DatasetSplit split_dataset(const SessionRecording& rec, const SplitPolicy& policy);

/// One sample per trial: mean distribution, mean session time.
std::vector<LabeledSample> average_per_trial(std::span<const LabeledSample> samples);

// Live mode: a position trace replaces the synthetic subject.

struct LiveTick {
  double t_trial = 0.0;
  Point2 neutral = Point2::Zero();
  Point2 target = Point2::Zero();
  Point2 actual = Point2::Zero();
  Vec2 deviation = Vec2::Zero();
  TorqueVec torque = TorqueVec::Zero();
  Vec6 activation = Vec6::Zero();
  MuscleDistribution distribution;
  bool new_frame = false;
};

/// Impedance, muscle and processing chain driven by reported positions at
/// the control tick rate. The torque the user exerts is taken to be the
/// impedance torque of the deviation, i.e. the negative of the reaction.
class LivePipeline {
 public:
  LivePipeline(const SessionConfig& cfg, const MaxActivations& calib, std::uint64_t seed);

  void begin_trial(const TrialConfig& trial);
  LiveTick tick(const Point2& position);

  const FatigueState& fatigue() const { return fatigue_; }
  const TrialConfig& trial() const { return trial_; }
  const TrajectoryConfig& trajectory() const { return traj_; }
  double trial_time() const { return t_trial_; }
  double tick_period() const { return 1.0 / cfg_.timing.live_tick_hz; }
  const MaxActivations& calibration() const { return calib_; }

 private:
  SessionConfig cfg_;
  MaxActivations calib_;
  EmgSynthesizer synth_;
  EmgProcessor processor_;
  FatigueState fatigue_;
  TrialConfig trial_;
  TrajectoryConfig traj_;
  ImpedanceParams imp_;
  double t_trial_ = 0.0;
  int ticks_in_trial_ = 0;
  Vec2 prev_e_ = Vec2::Zero();
  Vec2 prev_edot_ = Vec2::Zero();
  Vec6 prev_envelope_ = Vec6::Zero();
  MuscleDistribution last_dist_;
  Vec6 last_activation_ = Vec6::Zero();
  int samples_per_tick_;
};

/// Calibration used by live sessions: the synthetic isometric trial.
MaxActivations live_calibration(const SessionConfig& cfg, std::uint64_t seed);

/// Offline replay of a position trace (one position per tick) through the
/// live pipeline for one trial.
std::vector<LiveTick> replay_live(const SessionConfig& cfg, std::uint64_t seed,
                                  const TrialConfig& trial,
                                  std::span<const Point2> positions);

}  // namespace effort
