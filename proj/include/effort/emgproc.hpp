#pragma once

#include <array>
#include <complex>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "effort/common.hpp"

namespace effort {

/// One second-order section, H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(double omega) const;  // omega in rad/sample
  std::array<std::complex<double>, 2> poles() const;
};

/// Multi-channel cascade of biquads in transposed direct form II. State is
/// held per channel per section, so chunked and one-shot processing agree
/// bit for bit.
class BiquadCascade {
 public:
  BiquadCascade(std::vector<Biquad> sections, double sample_rate,
                int channels = kMuscles);

  double process(int channel, double x);
  void reset();

  std::complex<double> response(double freq_hz) const;
  double magnitude(double freq_hz) const { return std::abs(response(freq_hz)); }
  double magnitude_db(double freq_hz) const;

  const std::vector<Biquad>& sections() const { return sections_; }
  double sample_rate() const { return fs_; }
  int channels() const { return channels_; }

 private:
  std::vector<Biquad> sections_;
  double fs_;
  int channels_;
  std::vector<std::array<double, 2>> state_;  // [channel * n_sections + section]
};

/// Second-order analog Butterworth band-pass prototype mapped with the
/// bilinear transform; both edges are prewarped, giving two biquads.
/// Throws std::invalid_argument unless 0 < f_lo < f_hi < fs/2.
BiquadCascade design_bandpass(double f_lo, double f_hi, double fs,
                              int channels = kMuscles);

/// Second-order Butterworth low-pass, bilinear with prewarping (one biquad).
BiquadCascade design_lowpass(double fc, double fs, int channels = kMuscles);

struct MaxActivations {
  Vec6 value = Vec6::Ones();

  void validate() const;
};

class DeadChannelError : public std::runtime_error {
 public:
  DeadChannelError(int channel, const std::string& msg)
      : std::runtime_error(msg), channel_(channel) {}
  int channel() const { return channel_; }

 private:
  int channel_;
};

struct ProcessingOptions {
  double sample_rate = 2000.0;
  double band_lo = 30.0;
  double band_hi = 950.0;
  double lowpass = 50.0;
  double frame_rate = 10.0;
  double running_mean_window_s = 5.0;
  // Divide by the calibration maximum before filtering (the listed order).
  // When false the division is applied after the low-pass instead.
  bool normalize_before_filter = true;

  int samples_per_frame() const;
  void validate() const;
};

/// Raw EMG -> activation chain: mean removal, calibration scaling,
/// band-pass, full-wave rectification, low-pass, block-average decimation.
class EmgProcessor {
 public:
  /// Offline mode: `mean` is the per-channel mean of the whole trial.
  EmgProcessor(const ProcessingOptions& opts, const MaxActivations& calib,
               const Vec6& mean);

  /// Causal mode: mean over the trailing `running_mean_window_s` seconds.
  static EmgProcessor running(const ProcessingOptions& opts,
                              const MaxActivations& calib);

  /// Feeds one raw sample; returns an activation frame when a decimation
  /// block completes.
  std::optional<Vec6> push(const Vec6& raw);

  /// Feeds a chunk, appending completed frames to `out`.
  void push(std::span<const Vec6> raw, std::vector<Vec6>& out);

  /// Output of the rectifier for the most recent sample.
  const Vec6& last_rectified() const { return rectified_; }

  const ProcessingOptions& options() const { return opts_; }

 private:
  EmgProcessor(const ProcessingOptions& opts, const MaxActivations& calib,
               const Vec6& mean, bool running);

  Vec6 current_mean(const Vec6& raw);

  ProcessingOptions opts_;
  MaxActivations calib_;
  BiquadCascade bandpass_;
  BiquadCascade lowpass_;
  int block_;
  int filled_ = 0;
  Vec6 accum_ = Vec6::Zero();
  Vec6 rectified_ = Vec6::Zero();

  Vec6 fixed_mean_;
  bool running_;
  std::vector<Vec6> window_;
  std::size_t window_pos_ = 0;
  std::size_t window_count_ = 0;
  Vec6 window_sum_ = Vec6::Zero();
};

Vec6 channel_mean(std::span<const Vec6> raw);

/// Offline processing of one trial with the whole-trial mean.
std::vector<Vec6> process(std::span<const Vec6> raw, const MaxActivations& calib,
                          const ProcessingOptions& opts = {});

/// Per-channel maximum of the processed activation over the isometric
/// trial, computed without calibration scaling. Throws DeadChannelError if
/// any channel's maximum is not positive.
MaxActivations calibrate_isometric(std::span<const Vec6> raw,
                                   const ProcessingOptions& opts = {});

struct MuscleDistribution {
  Vec6 M = Vec6::Constant(1.0 / kMuscles);
  bool degenerate = false;
};

/// Normalizes activations by their sum. When the sum is below `eps` the
/// uniform vector is returned with `degenerate` set.
MuscleDistribution effort_distribution(const Vec6& activation, double eps = 1e-12);

}  // namespace effort
