#include "doctest.h"

#include <cmath>

#include "effort/musclesim.hpp"

using namespace effort;

TEST_CASE("torque channels are non-negative and reconstruct the torque") {
  for (const TorqueVec& t : {TorqueVec(0.5, -0.2), TorqueVec(-1.0, 0.0), TorqueVec(0.0, 3.0)}) {
    const Vec4 c = torque_channels(t);
    CHECK((c.array() >= 0.0).all());
    CHECK(c(0) - c(1) == doctest::Approx(t(0)));
    CHECK(c(2) - c(3) == doctest::Approx(t(1)));
    CHECK(c(0) * c(1) == 0.0);
  }
}

TEST_CASE("envelope is the fatigue-scaled synergy response plus tone") {
  const auto syn = SynergyMatrix::defaults();
  CHECK_NOTHROW(syn.validate());
  FatigueState fat;
  CHECK((activation_envelope(syn, TorqueVec::Zero(), fat) - syn.baseline).norm() == 0.0);
  fat.multiplier = Vec6::Constant(1.5);
  const TorqueVec tau(0.4, -0.3);
  const Vec6 expect = 1.5 * (syn.gains * torque_channels(tau) + syn.baseline);
  CHECK((activation_envelope(syn, tau, fat) - expect).norm() < 1e-15);
}

TEST_CASE("each muscle has one principal channel") {
  const auto syn = SynergyMatrix::defaults();
  for (int m = 0; m < kMuscles; ++m) {
    Eigen::Index col;
    const double top = syn.gains.row(m).maxCoeff(&col);
    CHECK(top >= 0.8);
    for (int c = 0; c < 4; ++c)
      if (c != col) CHECK(syn.gains(m, c) <= 0.3);
  }
}

TEST_CASE("negative synergy entries are rejected") {
  auto syn = SynergyMatrix::defaults();
  syn.gains(2, 1) = -0.1;
  CHECK_THROWS_AS(syn.validate(), std::invalid_argument);
}

TEST_CASE("fatigue multiplier grows monotonically and stays at one with beta zero") {
  const Vec6 env = Vec6::Constant(0.5);
  FatigueState off;
  FatigueState on = FatigueState::with_beta(Vec6::Constant(0.01));
  for (int i = 0; i < 1000; ++i) {
    const FatigueState next = fatigue_update(on, env, 0.01);
    CHECK((next.multiplier.array() >= on.multiplier.array()).all());
    on = next;
    off = fatigue_update(off, env, 0.01);
  }
  CHECK(on.multiplier(0) == doctest::Approx(1.0 + 0.01 * 0.5 * 10.0));
  CHECK((off.multiplier.array() == 1.0).all());
}

TEST_CASE("synthesized EMG has the requested signal RMS and zero mean") {
  EmgSynthConfig cfg;
  cfg.noise_floor = 0.0;
  EmgSynthesizer s(cfg, 5);
  Vec6 env;
  env << 0.1, 0.2, 0.4, 0.8, 1.6, 0.0;
  const std::size_t n = 200000;
  Vec6 sum = Vec6::Zero(), sq = Vec6::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec6 x = s.sample(env);
    sum += x;
    sq += x.cwiseProduct(x);
  }
  for (int c = 0; c < 5; ++c) {
    CHECK(std::sqrt(sq(c) / n) == doctest::Approx(env(c)).epsilon(0.03));
    CHECK(std::abs(sum(c) / n) < 0.02 * env(c));
  }
  CHECK(sq(5) == 0.0);
}

TEST_CASE("EMG synthesis is reproducible per seed") {
  EmgSynthConfig cfg;
  auto run = [&](std::uint64_t seed) {
    EmgSynthesizer s(cfg, seed);
    return s.synth(Vec6::Constant(0.3), 100, 0.0);
  };
  const auto a = run(1), b = run(1), c = run(2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].channels == b[i].channels);
  CHECK(a[10].channels != c[10].channels);
  CHECK(a[1].t == doctest::Approx(1.0 / 2000));
}
