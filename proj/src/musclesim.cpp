#include "effort/musclesim.hpp"

#include <cmath>
#include <stdexcept>

namespace effort {

Vec4 torque_channels(const TorqueVec& tau) {
  return Vec4(std::max(tau.x(), 0.0), std::max(-tau.x(), 0.0),
              std::max(tau.y(), 0.0), std::max(-tau.y(), 0.0));
}

void SynergyMatrix::validate() const {
  if (!gains.allFinite() || !baseline.allFinite())
    throw std::invalid_argument("SynergyMatrix: entries must be finite");
  if ((gains.array() < 0.0).any() || (baseline.array() < 0.0).any())
    throw std::invalid_argument("SynergyMatrix: entries must be >= 0");
  for (int c = 0; c < 4; ++c) {
    if (!(gains.col(c).maxCoeff() > 0.0))
      throw std::invalid_argument("SynergyMatrix: torque channel " + std::to_string(c) +
                                  " drives no muscle");
  }
  for (int m = 0; m < kMuscles; ++m) {
    if (!(gains.row(m).maxCoeff() > 0.0))
      throw std::invalid_argument("SynergyMatrix: muscle " + std::string(kMuscleNames[m]) +
                                  " has no torque channel");
  }
}

SynergyMatrix SynergyMatrix::defaults() {
  SynergyMatrix s;
  //             tau1+  tau1-  tau2+  tau2-
  s.gains << 1.00, 0.00, 0.15, 0.00,   // brachialis
             0.00, 0.20, 0.00, 1.00,   // posterior deltoid
             0.25, 0.00, 1.00, 0.00,   // anterior deltoid
             0.90, 0.00, 0.00, 0.30,   // biceps
             0.00, 1.00, 0.00, 0.10,   // triceps
             0.00, 0.30, 0.80, 0.00;   // chest (adduction)
  s.baseline = Vec6::Constant(0.02);
  return s;
}

FatigueState FatigueState::with_beta(const Vec6& beta) {
  if ((beta.array() < 0.0).any() || !beta.allFinite())
    throw std::invalid_argument("FatigueState: beta must be finite and >= 0");
  FatigueState f;
  f.beta = beta;
  return f;
}

Vec6 activation_envelope(const SynergyMatrix& syn, const TorqueVec& subject_tau,
                         const FatigueState& fat) {
  const Vec6 drive = syn.gains * torque_channels(subject_tau) + syn.baseline;
  return fat.multiplier.cwiseProduct(drive);
}

FatigueState fatigue_update(const FatigueState& fat, const Vec6& envelope, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("fatigue_update: dt must be > 0");
  FatigueState next = fat;
  next.accumulated_effort += envelope * dt;
  next.multiplier = Vec6::Ones() + fat.beta.cwiseProduct(next.accumulated_effort);
  return next;
}

void EmgSynthConfig::validate() const {
  if (!(gain >= 0.0) || !(noise_floor >= 0.0))
    throw std::invalid_argument("EmgSynthConfig: gain and noise_floor must be >= 0");
}

EmgSynthesizer::EmgSynthesizer(const EmgSynthConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      shaper_(design_bandpass(cfg.band_lo, cfg.band_hi, cfg.sample_rate)),
      shaper_norm_(1.0),
      rng_(seed) {
  cfg_.validate();
  // White noise of unit variance leaves the shaper with variance sum(h[n]^2).
  BiquadCascade probe(shaper_.sections(), cfg.sample_rate, 1);
  double energy = 0.0;
  for (int n = 0; n < 40000; ++n) {
    const double h = probe.process(0, n == 0 ? 1.0 : 0.0);
    energy += h * h;
  }
  shaper_norm_ = 1.0 / std::sqrt(energy);
}

Vec6 EmgSynthesizer::sample(const Vec6& envelope) {
  Vec6 out;
  for (int c = 0; c < kMuscles; ++c) {
    const double shaped = shaper_norm_ * shaper_.process(c, normal_(rng_));
    const double floor = normal_(rng_);
    out[c] = cfg_.gain * envelope[c] * shaped + cfg_.noise_floor * floor;
  }
  return out;
}

std::vector<RawEmgFrame> EmgSynthesizer::synth(const Vec6& envelope, std::size_t n,
                                               double t0) {
  std::vector<RawEmgFrame> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(RawEmgFrame{t0 + static_cast<double>(i) / cfg_.sample_rate,
                              sample(envelope)});
  }
  return out;
}

}  // namespace effort
