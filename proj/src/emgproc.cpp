#include "effort/emgproc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace effort {

namespace {

using cplx = std::complex<double>;

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

Biquad section_from_pole(cplx z_pole, double b0, double b1, double b2) {
  Biquad q;
  q.b0 = b0;
  q.b1 = b1;
  q.b2 = b2;
  q.a1 = -2.0 * z_pole.real();
  q.a2 = std::norm(z_pole);
  return q;
}

void check_stable(const std::vector<Biquad>& sections) {
  for (const auto& s : sections) {
    for (const auto& p : s.poles()) {
      if (!(std::abs(p) < 1.0))
        throw std::logic_error("designed filter section is not stable");
    }
  }
}

}  // namespace

cplx Biquad::response(double omega) const {
  const cplx zi = std::polar(1.0, -omega);
  const cplx zi2 = zi * zi;
  return (b0 + b1 * zi + b2 * zi2) / (1.0 + a1 * zi + a2 * zi2);
}

std::array<cplx, 2> Biquad::poles() const {
  // Roots of z^2 + a1 z + a2.
  const cplx disc = std::sqrt(cplx(a1 * a1 - 4.0 * a2, 0.0));
  return {(-a1 + disc) / 2.0, (-a1 - disc) / 2.0};
}

BiquadCascade::BiquadCascade(std::vector<Biquad> sections, double sample_rate,
                             int channels)
    : sections_(std::move(sections)),
      fs_(sample_rate),
      channels_(channels),
      state_(static_cast<std::size_t>(channels) * sections_.size(), {0.0, 0.0}) {}

double BiquadCascade::process(int channel, double x) {
  auto* st = &state_[static_cast<std::size_t>(channel) * sections_.size()];
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const Biquad& q = sections_[i];
    auto& w = st[i];
    const double y = q.b0 * x + w[0];
    w[0] = q.b1 * x - q.a1 * y + w[1];
    w[1] = q.b2 * x - q.a2 * y;
    x = y;
  }
  return x;
}

void BiquadCascade::reset() {
  std::fill(state_.begin(), state_.end(), std::array<double, 2>{0.0, 0.0});
}

cplx BiquadCascade::response(double freq_hz) const {
  const double omega = 2.0 * std::numbers::pi * freq_hz / fs_;
  cplx h(1.0, 0.0);
  for (const auto& s : sections_) h *= s.response(omega);
  return h;
}

double BiquadCascade::magnitude_db(double freq_hz) const {
  return 20.0 * std::log10(magnitude(freq_hz));
}

BiquadCascade design_bandpass(double f_lo, double f_hi, double fs, int channels) {
  if (!(fs > 0.0) || !(f_lo > 0.0) || !(f_lo < f_hi) || !(f_hi < fs / 2.0)) {
    throw std::invalid_argument(
        "design_bandpass: need 0 < f_lo < f_hi < fs/2 (got f_lo=" +
        std::to_string(f_lo) + ", f_hi=" + std::to_string(f_hi) +
        ", fs=" + std::to_string(fs) + ")");
  }
  const double w_lo = 2.0 * fs * std::tan(std::numbers::pi * f_lo / fs);
  const double w_hi = 2.0 * fs * std::tan(std::numbers::pi * f_hi / fs);
  const double bw = w_hi - w_lo;
  const double w0sq = w_lo * w_hi;

  // Upper-half-plane low-pass prototype pole; its conjugate yields the
  // conjugate band-pass poles.
  const cplx p = std::polar(1.0, 3.0 * std::numbers::pi / 4.0);
  // s^2 - p*bw*s + w0^2 = 0
  const cplx disc = std::sqrt(p * p * bw * bw - 4.0 * w0sq);
  const cplx s1 = (p * bw + disc) / 2.0;
  const cplx s2 = (p * bw - disc) / 2.0;

  // Zeros at z = +1 and z = -1 for each section: numerator 1 - z^-2.
  std::vector<Biquad> sections = {
      section_from_pole(bilinear(s1, fs), 1.0, 0.0, -1.0),
      section_from_pole(bilinear(s2, fs), 1.0, 0.0, -1.0)};

  // The analog prototype has unit gain at w0; its digital image sits at
  // 2*atan(w0 / 2fs).
  const double omega0 = 2.0 * std::atan(std::sqrt(w0sq) / (2.0 * fs));
  cplx h(1.0, 0.0);
  for (const auto& s : sections) h *= s.response(omega0);
  const double g = 1.0 / std::sqrt(std::abs(h));
  for (auto& s : sections) {
    s.b0 *= g;
    s.b1 *= g;
    s.b2 *= g;
  }
  check_stable(sections);
  return BiquadCascade(std::move(sections), fs, channels);
}

BiquadCascade design_lowpass(double fc, double fs, int channels) {
  if (!(fs > 0.0) || !(fc > 0.0) || !(fc < fs / 2.0)) {
    throw std::invalid_argument("design_lowpass: need 0 < fc < fs/2 (got fc=" +
                                std::to_string(fc) + ", fs=" + std::to_string(fs) + ")");
  }
  const double k = std::tan(std::numbers::pi * fc / fs);
  const double k2 = k * k;
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
  Biquad q;
  q.b0 = k2 * norm;
  q.b1 = 2.0 * q.b0;
  q.b2 = q.b0;
  q.a1 = 2.0 * (k2 - 1.0) * norm;
  q.a2 = (1.0 - std::numbers::sqrt2 * k + k2) * norm;
  std::vector<Biquad> sections{q};
  check_stable(sections);
  return BiquadCascade(std::move(sections), fs, channels);
}

void MaxActivations::validate() const {
  for (int i = 0; i < kMuscles; ++i) {
    if (!(value[i] > 0.0) || !std::isfinite(value[i])) {
      throw DeadChannelError(i, "dead channel " + std::to_string(i + 1) + " (" +
                                    std::string(kMuscleNames[i]) +
                                    "): calibration maximum must be > 0");
    }
  }
}

int ProcessingOptions::samples_per_frame() const {
  return static_cast<int>(std::lround(sample_rate / frame_rate));
}

void ProcessingOptions::validate() const {
  const double nyquist = sample_rate / 2.0;
  if (!(band_lo > 0.0) || !(band_lo < band_hi) || !(band_hi < nyquist))
    throw std::invalid_argument("ProcessingOptions: need 0 < band_lo < band_hi < sample_rate/2");
  if (!(lowpass > 0.0) || !(lowpass < nyquist))
    throw std::invalid_argument("ProcessingOptions: need 0 < lowpass < sample_rate/2");
  if (!(frame_rate > 0.0) || !(frame_rate <= sample_rate))
    throw std::invalid_argument("ProcessingOptions: frame_rate must be in (0, sample_rate]");
  if (std::abs(sample_rate / frame_rate - samples_per_frame()) > 1e-9)
    throw std::invalid_argument("ProcessingOptions: sample_rate must be a multiple of frame_rate");
  if (!(running_mean_window_s > 0.0))
    throw std::invalid_argument("ProcessingOptions: running_mean_window_s must be > 0");
}

EmgProcessor::EmgProcessor(const ProcessingOptions& opts, const MaxActivations& calib,
                           const Vec6& mean)
    : EmgProcessor(opts, calib, mean, false) {}

EmgProcessor EmgProcessor::running(const ProcessingOptions& opts,
                                   const MaxActivations& calib) {
  return EmgProcessor(opts, calib, Vec6::Zero(), true);
}

EmgProcessor::EmgProcessor(const ProcessingOptions& opts, const MaxActivations& calib,
                           const Vec6& mean, bool running)
    : opts_(opts),
      calib_(calib),
      bandpass_(design_bandpass(opts.band_lo, opts.band_hi, opts.sample_rate)),
      lowpass_(design_lowpass(opts.lowpass, opts.sample_rate)),
      block_(opts.samples_per_frame()),
      fixed_mean_(mean),
      running_(running) {
  opts_.validate();
  calib_.validate();
  if (running_) {
    const auto n = static_cast<std::size_t>(
        std::lround(opts_.running_mean_window_s * opts_.sample_rate));
    window_.assign(std::max<std::size_t>(n, 1), Vec6::Zero());
  }
}

Vec6 EmgProcessor::current_mean(const Vec6& raw) {
  if (!running_) return fixed_mean_;
  const std::size_t n = window_.size();
  if (window_count_ == n) window_sum_ -= window_[window_pos_];
  window_[window_pos_] = raw;
  window_sum_ += raw;
  window_count_ = std::min(window_count_ + 1, n);
  window_pos_ = (window_pos_ + 1) % n;
  if (window_pos_ == 0) {
    // Re-sum once per revolution so rounding in the running sum cannot drift.
    window_sum_.setZero();
    for (const auto& v : window_) window_sum_ += v;
  }
  return window_sum_ / static_cast<double>(window_count_);
}

std::optional<Vec6> EmgProcessor::push(const Vec6& raw) {
  const Vec6 mean = current_mean(raw);
  for (int c = 0; c < kMuscles; ++c) {
    double x = raw[c] - mean[c];
    if (opts_.normalize_before_filter) x /= calib_.value[c];
    x = bandpass_.process(c, x);
    x = std::abs(x);
    rectified_[c] = x;
    x = lowpass_.process(c, x);
    if (!opts_.normalize_before_filter) x /= calib_.value[c];
    accum_[c] += x;
  }
  if (++filled_ < block_) return std::nullopt;

  // The low-pass can undershoot slightly below zero on sharp transients;
  // an activation is clamped at zero.
  Vec6 frame = (accum_ / static_cast<double>(block_)).cwiseMax(0.0);
  accum_.setZero();
  filled_ = 0;
  return frame;
}

void EmgProcessor::push(std::span<const Vec6> raw, std::vector<Vec6>& out) {
  for (const auto& s : raw) {
    if (auto f = push(s)) out.push_back(*f);
  }
}

Vec6 channel_mean(std::span<const Vec6> raw) {
  Vec6 sum = Vec6::Zero();
  for (const auto& s : raw) sum += s;
  return raw.empty() ? sum : Vec6(sum / static_cast<double>(raw.size()));
}

std::vector<Vec6> process(std::span<const Vec6> raw, const MaxActivations& calib,
                          const ProcessingOptions& opts) {
  EmgProcessor proc(opts, calib, channel_mean(raw));
  std::vector<Vec6> out;
  out.reserve(raw.size() / static_cast<std::size_t>(opts.samples_per_frame()) + 1);
  proc.push(raw, out);
  return out;
}

MaxActivations calibrate_isometric(std::span<const Vec6> raw,
                                   const ProcessingOptions& opts) {
  const auto frames = process(raw, MaxActivations{}, opts);
  MaxActivations result;
  result.value.setZero();
  for (const auto& f : frames) result.value = result.value.cwiseMax(f);
  result.validate();
  return result;
}

MuscleDistribution effort_distribution(const Vec6& activation, double eps) {
  if (!activation.allFinite() || (activation.array() < 0.0).any())
    throw std::invalid_argument("effort_distribution: activations must be finite and >= 0");
  const double total = activation.sum();
  MuscleDistribution d;
  if (total < eps) {
    d.degenerate = true;
    return d;
  }
  d.M = activation / total;
  return d;
}

}  // namespace effort
