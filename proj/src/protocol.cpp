#include "effort/protocol.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace effort {

std::string_view to_string(ImpedanceLevel l) {
  return l == ImpedanceLevel::Low ? "Low" : "High";
}

std::string_view to_string(SpeedLevel l) {
  switch (l) {
    case SpeedLevel::Low: return "Low";
    case SpeedLevel::High: return "High";
    case SpeedLevel::SuperHigh: return "SuperHigh";
  }
  return "?";
}

ImpedanceParams LevelTable::impedance(ImpedanceLevel l) const {
  return ImpedanceParams{inertia, damping,
                         l == ImpedanceLevel::Low ? low_stiffness : high_stiffness};
}

double LevelTable::period(SpeedLevel l) const {
  switch (l) {
    case SpeedLevel::Low: return low_period_s;
    case SpeedLevel::High: return high_period_s;
    case SpeedLevel::SuperHigh: return super_high_period_s;
  }
  return low_period_s;
}

Label LevelTable::label(const TrialConfig& t) const {
  if (t.is_isometric) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return Label(nan, nan);
  }
  return Label(impedance(t.impedance_level).stiffness, t.orientation_deg);
}

std::vector<TrialConfig> build_protocol(double duration_s, double rest_s) {
  using IL = ImpedanceLevel;
  using SL = SpeedLevel;
  std::vector<TrialConfig> p;
  p.push_back(TrialConfig{0, IL::Low, SL::Low, 0.0, duration_s, rest_s, true});
  // Blocks of four orientations: (Low,Low) (High,Low) (High,High) (Low,High).
  const std::array<std::pair<IL, SL>, 4> blocks = {
      std::pair{IL::Low, SL::Low}, std::pair{IL::High, SL::Low},
      std::pair{IL::High, SL::High}, std::pair{IL::Low, SL::High}};
  const std::array<double, 4> orientations = {90.0, 45.0, 0.0, -45.0};
  int idx = 1;
  for (const auto& [imp, speed] : blocks) {
    for (double th : orientations) {
      p.push_back(TrialConfig{idx++, imp, speed, th, duration_s, rest_s, false});
    }
  }
  p.push_back(TrialConfig{17, IL::Low, SL::SuperHigh, 0.0, duration_s, rest_s, false});
  return p;
}

bool is_estimation_trial(int trial_index) { return trial_index >= 1 && trial_index <= 16; }

void SplitPolicy::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("SplitPolicy: train_fraction must lie in (0, 1)");
}

Vec6 default_fatigue_beta() {
  // Tuned so multipliers end a default session around 1.3-1.6.
  return (Vec6() << 0.00244, 0.00160, 0.00223, 0.00221, 0.00176, 0.00236).finished();
}

void SessionConfig::validate() const {
  TrajectoryConfig probe = trajectory;
  probe.orientation_deg = 0.0;
  probe.validate();
  levels.impedance(ImpedanceLevel::Low).validate();
  levels.impedance(ImpedanceLevel::High).validate();
  for (SpeedLevel s : {SpeedLevel::Low, SpeedLevel::High, SpeedLevel::SuperHigh}) {
    if (!(levels.period(s) > 0.0))
      throw std::invalid_argument("SessionConfig: periods must be > 0");
  }
  subject.validate();
  synergy.validate();
  if ((fatigue_beta.array() < 0.0).any() || !fatigue_beta.allFinite())
    throw std::invalid_argument("SessionConfig: fatigue beta must be >= 0");
  if (!(recovery_rate >= 0.0))
    throw std::invalid_argument("SessionConfig: recovery_rate must be >= 0");
  emg.validate();
  processing.validate();
  if (std::abs(emg.sample_rate - processing.sample_rate) > 0.0)
    throw std::invalid_argument("SessionConfig: synthesis and processing rates differ");
  if (!(timing.dt > 0.0) || !(timing.trial_duration_s > 0.0) || !(timing.rest_s >= 0.0))
    throw std::invalid_argument("SessionConfig: timing values out of range");
  const double samples_per_step = timing.dt * emg.sample_rate;
  if (std::abs(samples_per_step - 2.0) > 1e-9)
    throw std::invalid_argument("SessionConfig: EMG must run at exactly twice the plant rate");
  const double steps_per_frame = 1.0 / (timing.dt * processing.frame_rate);
  if (std::abs(steps_per_frame - std::round(steps_per_frame)) > 1e-9)
    throw std::invalid_argument("SessionConfig: frame period must be a multiple of dt");
  const double frames = timing.trial_duration_s * processing.frame_rate;
  if (std::abs(frames - std::round(frames)) > 1e-9)
    throw std::invalid_argument("SessionConfig: trial duration must hold whole frames");
  if (6.0 * 2.0 * timing.isometric_burst_s > timing.trial_duration_s + 1e-9 ||
      !(timing.isometric_burst_s > 0.0) || !(timing.isometric_level > 0.0))
    throw std::invalid_argument("SessionConfig: isometric bursts must fit in one trial");
  const double spt = emg.sample_rate / timing.live_tick_hz;
  if (!(timing.live_tick_hz > 0.0) || std::abs(spt - std::round(spt)) > 1e-9)
    throw std::invalid_argument("SessionConfig: live tick must hold whole EMG samples");
  split.validate();
  train.validate();
}

TargetScaler SessionConfig::scaler() const {
  return TargetScaler::from_range(Vec2(levels.low_stiffness, -45.0),
                                  Vec2(levels.high_stiffness, 90.0));
}

TrajectoryConfig SessionConfig::trajectory_for(const TrialConfig& t) const {
  TrajectoryConfig c = trajectory;
  c.orientation_deg = t.orientation_deg;
  c.period_s = levels.period(t.speed_level);
  return c;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

constexpr std::uint64_t kSubjectStream = 1;
constexpr std::uint64_t kEmgStream = 2;
constexpr std::uint64_t kLiveEmgStream = 3;

long long whole(double x) { return std::llround(x); }

}  // namespace

std::vector<Vec6> synthesize_isometric(const SessionConfig& cfg, EmgSynthesizer& synth,
                                       FatigueState& fatigue,
                                       std::vector<Vec6>* frame_fatigue) {
  const double fs = cfg.emg.sample_rate;
  const double dt = 1.0 / fs;
  const long long total = whole(cfg.timing.trial_duration_s * fs);
  const long long burst = whole(cfg.timing.isometric_burst_s * fs);
  std::vector<Vec6> raw;
  raw.reserve(static_cast<std::size_t>(total));
  for (long long n = 0; n < total; ++n) {
    const long long slot = n / (2 * burst);
    const bool active = slot < kMuscles && (n % (2 * burst)) < burst;
    Vec6 drive = cfg.synergy.baseline;
    if (active) drive[static_cast<int>(slot)] += cfg.timing.isometric_level;
    const Vec6 env = fatigue.multiplier.cwiseProduct(drive);
    raw.push_back(synth.sample(env));
    fatigue = fatigue_update(fatigue, env, dt);
    if (frame_fatigue && (n + 1) % cfg.processing.samples_per_frame() == 0)
      frame_fatigue->push_back(fatigue.multiplier);
  }
  return raw;
}

SessionRecording run_session(const SessionConfig& cfg, std::uint64_t seed,
                             const RawEmgSink& sink) {
  cfg.validate();
  const auto protocol =
      build_protocol(cfg.timing.trial_duration_s, cfg.timing.rest_s);

  SubjectModel subject_model = cfg.subject;
  subject_model.rng_seed = derive_seed(seed, kSubjectStream);
  SubjectController subject(subject_model, cfg.timing.dt);
  EmgSynthesizer synth(cfg.emg, derive_seed(seed, kEmgStream));
  FatigueState fatigue = FatigueState::with_beta(cfg.fatigue_beta);

  const double dt = cfg.timing.dt;
  const long long steps = whole(cfg.timing.trial_duration_s / dt);
  const long long steps_per_frame = whole(1.0 / (dt * cfg.processing.frame_rate));
  const double frame_period = 1.0 / cfg.processing.frame_rate;
  const auto samples_per_frame = static_cast<std::uint32_t>(cfg.processing.samples_per_frame());
  const double slot = cfg.timing.trial_duration_s + cfg.timing.rest_s;

  SessionRecording rec;
  std::vector<Vec6> raw;
  raw.reserve(static_cast<std::size_t>(2 * steps));

  for (const TrialConfig& trial : protocol) {
    const double t0 = trial.index * slot;
    const Label label = cfg.levels.label(trial);
    std::vector<FrameRow> rows;
    raw.clear();

    if (trial.is_isometric) {
      std::vector<Vec6> frame_fatigue;
      raw = synthesize_isometric(cfg, synth, fatigue, &frame_fatigue);
      try {
        rec.calibration = calibrate_isometric(raw, cfg.processing);
      } catch (const DeadChannelError& e) {
        throw SessionError(trial.index, e.what());
      }
      rows.resize(frame_fatigue.size());
      for (std::size_t f = 0; f < rows.size(); ++f) {
        rows[f].neutral = rows[f].target = rows[f].actual = cfg.trajectory.center;
        rows[f].fatigue = frame_fatigue[f];
      }
    } else {
      const TrajectoryConfig traj = cfg.trajectory_for(trial);
      const ImpedanceParams imp = cfg.levels.impedance(trial.impedance_level);
      PlantState state = neutral_state(traj, 0.0);
      subject.reset(state);
      Vec6 prev_env = Vec6::Zero();
      TorqueVec tau = TorqueVec::Zero();

      for (long long k = 0; k < steps; ++k) {
        const Point2 target = target_point(traj, state.time);
        tau = subject.command(state, target);
        const Vec6 env = activation_envelope(cfg.synergy, tau, fatigue);
        // Two EMG samples per plant step; the half-step one uses the
        // interpolated envelope.
        if (k > 0) raw.push_back(synth.sample(0.5 * (prev_env + env)));
        raw.push_back(synth.sample(env));
        prev_env = env;
        fatigue = fatigue_update(fatigue, env, dt);
        try {
          state = step_plant(state, tau, imp, traj, dt);
        } catch (const DynamicsError& e) {
          throw SessionError(trial.index, e.what());
        }
        state.time = static_cast<double>(k + 1) * dt;

        if ((k + 1) % steps_per_frame == 0) {
          FrameRow r;
          r.neutral = neutral_point(traj, state.time);
          r.target = target_point(traj, state.time);
          r.actual = state.position;
          r.deviation = r.actual - r.neutral;
          const Vec2 edot = deviation_rate(state, traj);
          r.subject_torque = tau;
          r.impedance_torque = impedance_torque(
              imp, r.deviation, edot, deviation_acceleration(imp, r.deviation, edot, tau));
          r.fatigue = fatigue.multiplier;
          rows.push_back(r);
        }
      }
      raw.push_back(synth.sample(prev_env));
    }

    std::vector<Vec6> activations;
    try {
      activations = process(raw, rec.calibration, cfg.processing);
    } catch (const std::exception& e) {
      throw SessionError(trial.index, e.what());
    }
    if (activations.size() != rows.size())
      throw SessionError(trial.index, "frame count mismatch between EMG and kinematics");

    for (std::size_t f = 0; f < rows.size(); ++f) {
      FrameRow& r = rows[f];
      r.t_session = t0 + static_cast<double>(f + 1) * frame_period;
      r.trial = trial.index;
      r.raw_offset = rec.raw_samples + f * samples_per_frame;
      r.raw_count = samples_per_frame;
      r.activation = activations[f];
      const MuscleDistribution d = effort_distribution(r.activation);
      r.distribution = d.M;
      r.degenerate = d.degenerate;
      r.label = label;
    }
    if (sink) sink(raw);
    rec.raw_samples += raw.size();
    rec.frames.insert(rec.frames.end(), rows.begin(), rows.end());

    // Rest: the clock advances, nothing is recorded, fatigue is frozen
    // apart from the optional recovery hook.
    if (cfg.recovery_rate > 0.0) {
      fatigue.accumulated_effort *= std::exp(-cfg.recovery_rate * cfg.timing.rest_s);
      fatigue.multiplier =
          Vec6::Ones() + fatigue.beta.cwiseProduct(fatigue.accumulated_effort);
    }
  }
  rec.session_end_s = static_cast<double>(protocol.size()) * slot;
  return rec;
}

DatasetSplit split_dataset(const SessionRecording& rec, const SplitPolicy& policy) {
  policy.validate();
  std::map<int, std::vector<LabeledSample>> by_trial;
  std::vector<LabeledSample> all;
  for (const FrameRow& r : rec.frames) {
    if (!is_estimation_trial(r.trial) || r.degenerate) continue;
    LabeledSample s{r.distribution, r.label, r.t_session, r.trial};
    by_trial[r.trial].push_back(s);
    all.push_back(s);
  }

  DatasetSplit out;
  if (policy.mode == SplitMode::PerTrialTemporal) {
    for (const auto& [trial, samples] : by_trial) {
      const auto n_train = static_cast<std::size_t>(
          std::floor(policy.train_fraction * static_cast<double>(samples.size())));
      out.train.insert(out.train.end(), samples.begin(), samples.begin() + n_train);
      out.test.insert(out.test.end(), samples.begin() + n_train, samples.end());
    }
  } else {
    const auto n_train = static_cast<std::size_t>(
        std::floor(policy.train_fraction * static_cast<double>(all.size())));
    out.train.assign(all.begin(), all.begin() + n_train);
    out.test.assign(all.begin() + n_train, all.end());
  }
  if (policy.samples == SampleMode::PerTrialAverage) {
    out.train = average_per_trial(out.train);
    out.test = average_per_trial(out.test);
  }
  if (out.train.empty() || out.test.empty())
    throw std::invalid_argument("split_dataset: a split side is empty");
  return out;
}

std::vector<LabeledSample> average_per_trial(std::span<const LabeledSample> samples) {
  std::vector<LabeledSample> out;
  std::size_t i = 0;
  while (i < samples.size()) {
    std::size_t j = i;
    LabeledSample acc = samples[i];
    acc.M.setZero();
    acc.t_session = 0.0;
    for (; j < samples.size() && samples[j].trial == samples[i].trial; ++j) {
      acc.M += samples[j].M;
      acc.t_session += samples[j].t_session;
    }
    const double n = static_cast<double>(j - i);
    acc.M /= n;
    acc.t_session /= n;
    out.push_back(acc);
    i = j;
  }
  return out;
}

MaxActivations live_calibration(const SessionConfig& cfg, std::uint64_t seed) {
  EmgSynthesizer synth(cfg.emg, derive_seed(seed, kEmgStream));
  FatigueState fatigue = FatigueState::with_beta(Vec6::Zero());
  const auto raw = synthesize_isometric(cfg, synth, fatigue);
  return calibrate_isometric(raw, cfg.processing);
}

LivePipeline::LivePipeline(const SessionConfig& cfg, const MaxActivations& calib,
                           std::uint64_t seed)
    : cfg_(cfg),
      calib_(calib),
      synth_(cfg.emg, derive_seed(seed, kLiveEmgStream)),
      processor_(EmgProcessor::running(cfg.processing, calib)),
      fatigue_(FatigueState::with_beta(cfg.fatigue_beta)),
      samples_per_tick_(static_cast<int>(std::lround(cfg.emg.sample_rate /
                                                     cfg.timing.live_tick_hz))) {
  cfg_.validate();
  begin_trial(build_protocol(cfg.timing.trial_duration_s, cfg.timing.rest_s).at(1));
}

void LivePipeline::begin_trial(const TrialConfig& trial) {
  trial_ = trial;
  traj_ = cfg_.trajectory_for(trial);
  imp_ = cfg_.levels.impedance(trial.impedance_level);
  t_trial_ = 0.0;
  ticks_in_trial_ = 0;
  prev_e_.setZero();
  prev_edot_.setZero();
}

LiveTick LivePipeline::tick(const Point2& position) {
  const double h = tick_period();
  ++ticks_in_trial_;
  t_trial_ = static_cast<double>(ticks_in_trial_) * h;

  LiveTick out;
  out.t_trial = t_trial_;
  out.neutral = neutral_point(traj_, t_trial_);
  out.target = target_point(traj_, t_trial_);
  out.actual = position;
  out.deviation = position - out.neutral;

  // Backward differences; the first tick of a trial has no history.
  Vec2 edot = Vec2::Zero();
  Vec2 eddot = Vec2::Zero();
  if (ticks_in_trial_ > 1) edot = (out.deviation - prev_e_) / h;
  if (ticks_in_trial_ > 2) eddot = (edot - prev_edot_) / h;
  prev_e_ = out.deviation;
  prev_edot_ = edot;
  out.torque = impedance_torque(imp_, out.deviation, edot, eddot);

  const Vec6 env = activation_envelope(cfg_.synergy, out.torque, fatigue_);
  if (ticks_in_trial_ == 1) prev_envelope_ = env;
  for (int i = 1; i <= samples_per_tick_; ++i) {
    const double w = static_cast<double>(i) / samples_per_tick_;
    const Vec6 e = (1.0 - w) * prev_envelope_ + w * env;
    if (auto frame = processor_.push(synth_.sample(e))) {
      last_activation_ = *frame;
      last_dist_ = effort_distribution(*frame);
      out.new_frame = true;
    }
  }
  prev_envelope_ = env;
  fatigue_ = fatigue_update(fatigue_, env, h);
  out.activation = last_activation_;
  out.distribution = last_dist_;
  return out;
}

std::vector<LiveTick> replay_live(const SessionConfig& cfg, std::uint64_t seed,
                                  const TrialConfig& trial,
                                  std::span<const Point2> positions) {
  LivePipeline pipe(cfg, live_calibration(cfg, seed), seed);
  pipe.begin_trial(trial);
  std::vector<LiveTick> out;
  out.reserve(positions.size());
  for (const auto& p : positions) out.push_back(pipe.tick(p));
  return out;
}

}  // namespace effort
