#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <stdexcept>

#include "effort/common.hpp"
#include "effort/trajectory.hpp"

namespace effort {

/// Prescribed per-axis impedance tau = I*e'' + B*e' + K*e (same on both axes).
struct ImpedanceParams {
  double inertia = 0.035;   // kg·m²/rad
  double damping = 0.4;     // N·m·s/rad
  double stiffness = 1.0;   // N·m/rad

  void validate() const;
};

struct PlantState {
  Point2 position = Point2::Zero();  // absolute x [rad]
  Vec2 velocity = Vec2::Zero();      // absolute x' [rad/s]
  double time = 0.0;                 // trial-local time [s]
};

/// Deviation from the neutral path, e = x - x_d(t).
Vec2 deviation(const PlantState& s, const TrajectoryConfig& traj);
Vec2 deviation_rate(const PlantState& s, const TrajectoryConfig& traj);

/// Plant state sitting exactly on the neutral path at time t.
PlantState neutral_state(const TrajectoryConfig& traj, double t);

class DynamicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

TorqueVec impedance_torque(const ImpedanceParams& p, const Vec2& e,
                           const Vec2& edot, const Vec2& eddot);

/// Deviation acceleration implied by the impedance law under an applied torque.
Vec2 deviation_acceleration(const ImpedanceParams& p, const Vec2& e,
                            const Vec2& edot, const TorqueVec& tau);

/// Advances I*e'' + B*e' + K*e = tau by one classical RK4 step with tau held
/// constant over the step. Throws DynamicsError on a non-finite result.
PlantState step_plant(const PlantState& state, const TorqueVec& subject_tau,
                      const ImpedanceParams& p, const TrajectoryConfig& traj,
                      double dt);

/// Synthetic stand-in for the human tracker: a delayed PD pursuit law with
/// additive Gaussian torque noise.
struct SubjectModel {
  double kp = 4.0;              // N·m/rad
  double kd = 0.3;              // N·m·s/rad
  double reaction_delay = 0.15; // s
  double noise_std = 0.02;      // N·m
  std::uint64_t rng_seed = 1;

  void validate() const;
};

/// Fixed-length history of plant states used to model perception delay.
class DelayLine {
 public:
  DelayLine(double delay_s, double dt);

  /// Clears the history and fills it with `initial`.
  void reset(const PlantState& initial);
  void push(const PlantState& s);
  /// State observed `delay_s` ago (the oldest retained one).
  const PlantState& delayed() const { return buf_.front(); }
  std::size_t capacity() const { return steps_ + 1; }

 private:
  std::size_t steps_;
  std::deque<PlantState> buf_;
};

class SubjectController {
 public:
  SubjectController(const SubjectModel& m, double dt);

  void reset(const PlantState& initial);

  /// Records `state` in the history, then returns
  /// kp*(target - x_delayed) - kd*v_delayed + noise.
  TorqueVec command(const PlantState& state, const Point2& target);

  const SubjectModel& model() const { return model_; }

 private:
  SubjectModel model_;
  DelayLine history_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
};

}  // namespace effort
