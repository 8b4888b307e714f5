#include "effort/dynamics.hpp"

#include <cmath>
#include <string>

namespace effort {

void ImpedanceParams::validate() const {
  if (!(inertia > 0.0)) throw std::invalid_argument("ImpedanceParams: inertia must be > 0");
  if (!(damping >= 0.0)) throw std::invalid_argument("ImpedanceParams: damping must be >= 0");
  if (!(stiffness >= 0.0)) throw std::invalid_argument("ImpedanceParams: stiffness must be >= 0");
}

Vec2 deviation(const PlantState& s, const TrajectoryConfig& traj) {
  return s.position - neutral_point(traj, s.time);
}

Vec2 deviation_rate(const PlantState& s, const TrajectoryConfig& traj) {
  return s.velocity - neutral_velocity(traj, s.time);
}

PlantState neutral_state(const TrajectoryConfig& traj, double t) {
  return PlantState{neutral_point(traj, t), neutral_velocity(traj, t), t};
}

TorqueVec impedance_torque(const ImpedanceParams& p, const Vec2& e,
                           const Vec2& edot, const Vec2& eddot) {
  return p.inertia * eddot + p.damping * edot + p.stiffness * e;
}

Vec2 deviation_acceleration(const ImpedanceParams& p, const Vec2& e,
                            const Vec2& edot, const TorqueVec& tau) {
  return (tau - p.damping * edot - p.stiffness * e) / p.inertia;
}

PlantState step_plant(const PlantState& state, const TorqueVec& subject_tau,
                      const ImpedanceParams& p, const TrajectoryConfig& traj,
                      double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_plant: dt must be > 0");

  const Vec2 e0 = deviation(state, traj);
  const Vec2 v0 = deviation_rate(state, traj);
  auto acc = [&](const Vec2& e, const Vec2& v) {
    return deviation_acceleration(p, e, v, subject_tau);
  };

  const Vec2 k1x = v0;
  const Vec2 k1v = acc(e0, v0);
  const Vec2 k2x = v0 + 0.5 * dt * k1v;
  const Vec2 k2v = acc(e0 + 0.5 * dt * k1x, k2x);
  const Vec2 k3x = v0 + 0.5 * dt * k2v;
  const Vec2 k3v = acc(e0 + 0.5 * dt * k2x, k3x);
  const Vec2 k4x = v0 + dt * k3v;
  const Vec2 k4v = acc(e0 + dt * k3x, k4x);

  const Vec2 e1 = e0 + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  const Vec2 v1 = v0 + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);

  if (!e1.allFinite() || !v1.allFinite()) {
    throw DynamicsError("plant integration diverged at t=" +
                        std::to_string(state.time + dt));
  }

  const double t1 = state.time + dt;
  return PlantState{neutral_point(traj, t1) + e1,
                    neutral_velocity(traj, t1) + v1, t1};
}

void SubjectModel::validate() const {
  if (!(kp >= 0.0) || !(kd >= 0.0))
    throw std::invalid_argument("SubjectModel: kp and kd must be >= 0");
  if (!(reaction_delay >= 0.0))
    throw std::invalid_argument("SubjectModel: reaction_delay must be >= 0");
  if (!(noise_std >= 0.0))
    throw std::invalid_argument("SubjectModel: noise_std must be >= 0");
}

DelayLine::DelayLine(double delay_s, double dt)
    : steps_(static_cast<std::size_t>(std::llround(delay_s / dt))) {}

void DelayLine::reset(const PlantState& initial) {
  buf_.assign(steps_ + 1, initial);
}

void DelayLine::push(const PlantState& s) {
  buf_.push_back(s);
  while (buf_.size() > steps_ + 1) buf_.pop_front();
}

SubjectController::SubjectController(const SubjectModel& m, double dt)
    : model_(m), history_(m.reaction_delay, dt), rng_(m.rng_seed) {
  model_.validate();
  history_.reset(PlantState{});
}

void SubjectController::reset(const PlantState& initial) { history_.reset(initial); }

TorqueVec SubjectController::command(const PlantState& state, const Point2& target) {
  history_.push(state);
  const PlantState& seen = history_.delayed();
  TorqueVec tau = model_.kp * (target - seen.position) - model_.kd * seen.velocity;
  if (model_.noise_std > 0.0) {
    tau.x() += model_.noise_std * noise_(rng_);
    tau.y() += model_.noise_std * noise_(rng_);
  }
  return tau;
}

}  // namespace effort
