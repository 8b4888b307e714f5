#pragma once

#include <vector>

#include "effort/common.hpp"

namespace effort {

/// Geometry of the neutral circle and the rotated target ellipse.
///
/// Both curves are traversed with the same phase phi = 2*pi*t/T, so the
/// target dot and the neutral point rotate in lockstep.
struct TrajectoryConfig {
  Point2 center{0.0, 0.0};
  double circle_radius = 0.25;         // rad
  double ellipse_semi_major = 0.35;    // rad
  double ellipse_semi_minor = 0.175;   // rad
  double orientation_deg = 0.0;        // [-90, 90]
  double period_s = 8.0;
  double tolerance_halfwidth = 0.05;   // rad

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

double phase_at(const TrajectoryConfig& cfg, double t);

Point2 neutral_point(const TrajectoryConfig& cfg, double t);
Vec2 neutral_velocity(const TrajectoryConfig& cfg, double t);
Point2 target_point(const TrajectoryConfig& cfg, double t);

/// Target ellipse point at an explicit phase angle.
Point2 target_at_phase(const TrajectoryConfig& cfg, double phi);

/// Unit outward normal of the target ellipse at phase phi.
Vec2 outward_normal(const TrajectoryConfig& cfg, double phi);

/// The two dashed tolerance curves: the target ellipse offset by
/// -/+ halfwidth along its outward normal.
class ToleranceBand {
 public:
  explicit ToleranceBand(const TrajectoryConfig& cfg);

  Point2 inner(double phi) const;
  Point2 outer(double phi) const;

  /// n evenly spaced samples over one revolution.
  std::vector<Point2> sample_inner(int n) const;
  std::vector<Point2> sample_outer(int n) const;

 private:
  TrajectoryConfig cfg_;
};

ToleranceBand tolerance_curves(const TrajectoryConfig& cfg);

}  // namespace effort
