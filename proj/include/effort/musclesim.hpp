#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "effort/common.hpp"
#include "effort/emgproc.hpp"

namespace effort {

using Vec4 = Eigen::Vector4d;
using SynergyGains = Eigen::Matrix<double, kMuscles, 4>;

/// Split of a torque into nonnegative signed channels (tau1+, tau1-, tau2+, tau2-).
Vec4 torque_channels(const TorqueVec& tau);

/// Muscle x signed-torque-channel gains plus resting tone.
struct SynergyMatrix {
  SynergyGains gains = SynergyGains::Zero();
  Vec6 baseline = Vec6::Zero();

  void validate() const;
  static SynergyMatrix defaults();
};

/// Lumped time-varying muscle term: multiplier = 1 + beta * accumulated_effort.
struct FatigueState {
  Vec6 multiplier = Vec6::Ones();
  Vec6 beta = Vec6::Zero();              // 1/(N·m·s)
  Vec6 accumulated_effort = Vec6::Zero();  // N·m·s

  static FatigueState with_beta(const Vec6& beta);
};

/// envelope = multiplier ⊙ (A * channels(tau) + baseline)
Vec6 activation_envelope(const SynergyMatrix& syn, const TorqueVec& subject_tau,
                         const FatigueState& fat);

FatigueState fatigue_update(const FatigueState& fat, const Vec6& envelope, double dt);

struct RawEmgFrame {
  double t = 0.0;
  Vec6 channels = Vec6::Zero();  // synthetic mV
};

struct EmgSynthConfig {
  double sample_rate = 2000.0;
  double band_lo = 40.0;
  double band_hi = 400.0;
  double gain = 1.0;          // mV per unit envelope
  double noise_floor = 0.005; // mV, sensor noise standard deviation

  void validate() const;
};

/// Amplitude-modulated band-limited Gaussian noise per channel. The shaping
/// filter is normalized to unit output variance, so a constant envelope g
/// yields a signal component of RMS gain*g.
class EmgSynthesizer {
 public:
  EmgSynthesizer(const EmgSynthConfig& cfg, std::uint64_t seed);

  Vec6 sample(const Vec6& envelope);

  /// n samples at a constant envelope, stamped from t0 at the sample rate.
  std::vector<RawEmgFrame> synth(const Vec6& envelope, std::size_t n, double t0);

  const EmgSynthConfig& config() const { return cfg_; }

 private:
  EmgSynthConfig cfg_;
  BiquadCascade shaper_;
  double shaper_norm_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace effort
