#include "effort/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace effort {

TargetScaler::TargetScaler(const Vec2& offset, const Vec2& scale)
    : offset_(offset), scale_(scale) {
  if (!(scale.array() > 0.0).all() || !scale.allFinite() || !offset.allFinite())
    throw std::invalid_argument("TargetScaler: scale must be finite and > 0");
}

TargetScaler TargetScaler::from_range(const Vec2& lo, const Vec2& hi) {
  if (!((hi - lo).array() > 0.0).all())
    throw std::invalid_argument("TargetScaler: label range must have hi > lo");
  const Vec2 scale = (0.8 * Vec2::Ones()).cwiseQuotient(hi - lo);
  return TargetScaler(Vec2::Constant(0.1) - scale.cwiseProduct(lo), scale);
}

ForwardTrace forward(const NetworkWeights& w, const TargetScaler& s, const Vec6& M) {
  ForwardTrace t;
  t.a = w.w_in * M;
  t.z = (1.0 + (-t.a.array()).exp()).inverse().matrix();
  t.raw = w.w_out * t.z;
  t.y_hat = s.unscale(t.raw);
  return t;
}

Gradient loss_gradient(const NetworkWeights& w, std::span<const LabeledSample> batch,
                       const TargetScaler& s) {
  Gradient g;
  for (const auto& sample : batch) {
    const ForwardTrace t = forward(w, s, sample.M);
    const Vec2 delta_out = t.raw - s.scale(sample.label);
    g.loss += 0.5 * delta_out.squaredNorm();
    g.d_out += delta_out * t.z.transpose();
    const Hidden delta_hidden =
        (w.w_out.transpose() * delta_out).cwiseProduct(t.z.cwiseProduct(Hidden::Ones() - t.z));
    g.d_in += delta_hidden * sample.M.transpose();
  }
  return g;
}

StepResult backprop_step(const NetworkWeights& w, std::span<const LabeledSample> batch,
                         const TargetScaler& s, double lr) {
  if (batch.empty()) throw std::invalid_argument("backprop_step: empty batch");
  if (!(lr >= 0.0)) throw std::invalid_argument("backprop_step: lr must be >= 0");
  const Gradient g = loss_gradient(w, batch, s);
  if (!std::isfinite(g.loss) || !g.d_in.allFinite() || !g.d_out.allFinite()) {
    throw TrainingError("non-finite loss during backpropagation (loss=" +
                        std::to_string(g.loss) + ", batch=" + std::to_string(batch.size()) +
                        ", lr=" + std::to_string(lr) + ")");
  }
  StepResult r;
  r.weights.w_in = w.w_in - lr * g.d_in;
  r.weights.w_out = w.w_out - lr * g.d_out;
  r.mse = g.loss / static_cast<double>(batch.size());  // 0.5*|d|^2 == mean over 2 outputs
  return r;
}

void TrainHyper::validate() const {
  if (!(lr >= 0.0)) throw std::invalid_argument("TrainHyper: lr must be >= 0");
  if (epochs < 0) throw std::invalid_argument("TrainHyper: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainHyper: batch_size must be >= 1");
}

NetworkWeights initial_weights(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  NetworkWeights w;
  for (int i = 0; i < w.w_in.size(); ++i) w.w_in.data()[i] = u(rng);
  for (int i = 0; i < w.w_out.size(); ++i) w.w_out.data()[i] = u(rng);
  return w;
}

TrainResult train(std::span<const LabeledSample> dataset, const TargetScaler& s,
                  const TrainHyper& hyper) {
  hyper.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

  TrainResult result;
  result.weights = initial_weights(hyper.seed);
  // Separate stream for shuffling so the initial weights do not depend on it.
  std::mt19937_64 shuffle_rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<LabeledSample> batch;
  batch.reserve(static_cast<std::size_t>(hyper.batch_size));

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum_mse = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      const StepResult step = backprop_step(result.weights, batch, s, hyper.lr);
      result.weights = step.weights;
      sum_mse += step.mse * static_cast<double>(batch.size());
    }
    result.loss_curve.push_back(sum_mse / static_cast<double>(dataset.size()));
  }
  return result;
}

namespace {

Vec2 rms_of(const NetworkWeights& w, const TargetScaler& s,
            std::span<const LabeledSample> part) {
  Vec2 sq = Vec2::Zero();
  for (const auto& sample : part) {
    const Vec2 err = forward(w, s, sample.M).y_hat - sample.label;
    sq += err.cwiseAbs2();
  }
  return (sq / static_cast<double>(part.size())).cwiseSqrt();
}

}  // namespace

RmsReport evaluate_rms(const NetworkWeights& w, const TargetScaler& s,
                       std::span<const LabeledSample> test) {
  if (test.empty()) throw std::invalid_argument("evaluate_rms: empty test set");
  for (std::size_t i = 1; i < test.size(); ++i) {
    if (test[i].t_session < test[i - 1].t_session)
      throw std::invalid_argument("evaluate_rms: test samples must be ordered by session time");
  }
  RmsReport r;
  r.count = test.size();
  r.whole = rms_of(w, s, test);
  if (test.size() >= 3) {
    const std::size_t n = test.size() / 3;
    r.section_sizes = {n, n, test.size() - 2 * n};
    std::array<Vec2, 3> sec;
    std::size_t start = 0;
    for (int k = 0; k < 3; ++k) {
      sec[k] = rms_of(w, s, test.subspan(start, r.section_sizes[k]));
      start += r.section_sizes[k];
    }
    r.sections = sec;
  }
  return r;
}

namespace {

constexpr const char* kWeightsMagic = "effort-net-weights";
constexpr int kWeightsVersion = 1;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename M>
void write_matrix(std::ostream& os, const M& m) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (c) os << ' ';
      os << fmt_double(m(r, c));
    }
    os << '\n';
  }
}

void expect_token(std::istream& is, const std::string& want) {
  std::string tok;
  if (!(is >> tok) || tok != want)
    throw std::runtime_error("weights file: expected '" + want + "', found '" + tok + "'");
}

double read_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error("weights file: truncated");
  std::size_t used = 0;
  const double v = std::stod(tok, &used);
  if (used != tok.size()) throw std::runtime_error("weights file: bad number '" + tok + "'");
  return v;
}

template <typename M>
void read_matrix(std::istream& is, M& m) {
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) m(r, c) = read_double(is);
}

}  // namespace

void write_weights(std::ostream& os, const WeightsFile& f) {
  os << kWeightsMagic << " v" << kWeightsVersion << '\n';
  os << "dims " << kMuscles << ' ' << kMuscles << ' ' << 2 << '\n';
  os << "seed " << f.seed << '\n';
  os << "scaler " << fmt_double(f.scaler.offset()[0]) << ' '
     << fmt_double(f.scaler.factor()[0]) << ' ' << fmt_double(f.scaler.offset()[1]) << ' '
     << fmt_double(f.scaler.factor()[1]) << '\n';
  os << "w_in\n";
  write_matrix(os, f.weights.w_in);
  os << "w_out\n";
  write_matrix(os, f.weights.w_out);
}

WeightsFile read_weights(std::istream& is) {
  expect_token(is, kWeightsMagic);
  expect_token(is, "v" + std::to_string(kWeightsVersion));
  expect_token(is, "dims");
  int n_in = 0, n_hidden = 0, n_out = 0;
  if (!(is >> n_in >> n_hidden >> n_out) || n_in != kMuscles || n_hidden != kMuscles ||
      n_out != 2)
    throw std::runtime_error("weights file: unsupported dimensions");
  WeightsFile f;
  expect_token(is, "seed");
  if (!(is >> f.seed)) throw std::runtime_error("weights file: bad seed");
  expect_token(is, "scaler");
  Vec2 off, sc;
  off[0] = read_double(is);
  sc[0] = read_double(is);
  off[1] = read_double(is);
  sc[1] = read_double(is);
  f.scaler = TargetScaler(off, sc);
  expect_token(is, "w_in");
  read_matrix(is, f.weights.w_in);
  expect_token(is, "w_out");
  read_matrix(is, f.weights.w_out);
  return f;
}

}  // namespace effort
