#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "effort/common.hpp"

namespace effort {

// 6-6-2 feedforward network: a = W_in M, z = sigmoid(a), y = W_out z.
// There are no bias weights.

using InputWeights = Eigen::Matrix<double, kMuscles, kMuscles>;  // hidden i x muscle j
using OutputWeights = Eigen::Matrix<double, 2, kMuscles>;        // output k x hidden i
using Hidden = Eigen::Matrix<double, kMuscles, 1>;

struct NetworkWeights {
  InputWeights w_in = InputWeights::Zero();
  OutputWeights w_out = OutputWeights::Zero();

  bool operator==(const NetworkWeights&) const = default;
};

/// Label pair (K [N·m/rad], theta [deg]).
using Label = Vec2;

struct LabeledSample {
  Vec6 M = Vec6::Constant(1.0 / kMuscles);
  Label label = Label::Zero();
  double t_session = 0.0;
  int trial = 0;
};

/// Per-output affine map scaled = offset + scale * y, taking [lo, hi] onto
/// [0.1, 0.9].
class TargetScaler {
 public:
  TargetScaler() = default;
  TargetScaler(const Vec2& offset, const Vec2& scale);

  static TargetScaler from_range(const Vec2& lo, const Vec2& hi);

  Vec2 scale(const Vec2& y) const { return offset_ + scale_.cwiseProduct(y); }
  Vec2 unscale(const Vec2& s) const { return (s - offset_).cwiseQuotient(scale_); }

  const Vec2& offset() const { return offset_; }
  const Vec2& factor() const { return scale_; }

 private:
  Vec2 offset_ = Vec2::Zero();
  Vec2 scale_ = Vec2::Ones();
};

struct ForwardTrace {
  Hidden a = Hidden::Zero();
  Hidden z = Hidden::Zero();
  Vec2 raw = Vec2::Zero();    // network output in scaled target space
  Vec2 y_hat = Vec2::Zero();  // physical units
};

ForwardTrace forward(const NetworkWeights& w, const TargetScaler& s, const Vec6& M);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Gradient {
  InputWeights d_in = InputWeights::Zero();
  OutputWeights d_out = OutputWeights::Zero();
  double loss = 0.0;  // 0.5 * sum over batch of |raw - scaled target|^2
};

Gradient loss_gradient(const NetworkWeights& w, std::span<const LabeledSample> batch,
                       const TargetScaler& s);

struct StepResult {
  NetworkWeights weights;
  double mse = 0.0;  // mean squared error per output before the update
};

StepResult backprop_step(const NetworkWeights& w, std::span<const LabeledSample> batch,
                         const TargetScaler& s, double lr);

struct TrainHyper {
  double lr = 0.05;
  int epochs = 500;
  int batch_size = 16;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainResult {
  NetworkWeights weights;
  std::vector<double> loss_curve;  // mean per-output MSE seen in each epoch
};

NetworkWeights initial_weights(std::uint64_t seed);

TrainResult train(std::span<const LabeledSample> dataset, const TargetScaler& s,
                  const TrainHyper& hyper);

struct RmsReport {
  /// First, Second, Third; absent when the test set has fewer than 3 samples.
  std::optional<std::array<Vec2, 3>> sections;
  std::array<std::size_t, 3> section_sizes{0, 0, 0};
  Vec2 whole = Vec2::Zero();
  std::size_t count = 0;
};

/// Test samples must be ordered by session time. Sections are contiguous
/// with n/3 samples each and the remainder going to the last one.
RmsReport evaluate_rms(const NetworkWeights& w, const TargetScaler& s,
                       std::span<const LabeledSample> test);

// Versioned plain-text weight file.
struct WeightsFile {
  NetworkWeights weights;
  TargetScaler scaler;
  std::uint64_t seed = 0;
};

void write_weights(std::ostream& os, const WeightsFile& f);
WeightsFile read_weights(std::istream& is);

}  // namespace effort
