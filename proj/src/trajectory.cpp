#include "effort/trajectory.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace effort {

namespace {

Eigen::Matrix2d rotation(double deg) {
  const double rad = deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("TrajectoryConfig: ") + what);
}

}  // namespace

void TrajectoryConfig::validate() const {
  require(center.allFinite(), "center must be finite");
  require(circle_radius > 0.0, "circle_radius must be > 0");
  require(ellipse_semi_minor > 0.0, "ellipse_semi_minor must be > 0");
  require(ellipse_semi_major >= ellipse_semi_minor,
          "ellipse_semi_major must be >= ellipse_semi_minor");
  require(period_s > 0.0, "period_s must be > 0");
  require(tolerance_halfwidth >= 0.0, "tolerance_halfwidth must be >= 0");
  // The inner offset curve stays simple only below the minimum radius of
  // curvature of the ellipse, b^2/a.
  require(tolerance_halfwidth <
              ellipse_semi_minor * ellipse_semi_minor / ellipse_semi_major,
          "tolerance_halfwidth must be below the ellipse's minimum radius of "
          "curvature");
  require(orientation_deg >= -90.0 && orientation_deg <= 90.0,
          "orientation_deg must lie in [-90, 90]");
}

double phase_at(const TrajectoryConfig& cfg, double t) {
  // Reduce t modulo T first so that t and t+T land on the same angle.
  const double tr = std::fmod(t, cfg.period_s);
  return 2.0 * std::numbers::pi * tr / cfg.period_s;
}

Point2 neutral_point(const TrajectoryConfig& cfg, double t) {
  const double phi = phase_at(cfg, t);
  return cfg.center + cfg.circle_radius * Vec2(std::cos(phi), std::sin(phi));
}

Vec2 neutral_velocity(const TrajectoryConfig& cfg, double t) {
  const double phi = phase_at(cfg, t);
  const double w = 2.0 * std::numbers::pi / cfg.period_s;
  return cfg.circle_radius * w * Vec2(-std::sin(phi), std::cos(phi));
}

Point2 target_at_phase(const TrajectoryConfig& cfg, double phi) {
  const Vec2 local(cfg.ellipse_semi_major * std::cos(phi),
                   cfg.ellipse_semi_minor * std::sin(phi));
  return cfg.center + rotation(cfg.orientation_deg) * local;
}

Point2 target_point(const TrajectoryConfig& cfg, double t) {
  return target_at_phase(cfg, phase_at(cfg, t));
}

Vec2 outward_normal(const TrajectoryConfig& cfg, double phi) {
  // Gradient of x^2/a^2 + y^2/b^2 at (a cos, b sin) is parallel to (b cos, a sin).
  const Vec2 local(cfg.ellipse_semi_minor * std::cos(phi),
                   cfg.ellipse_semi_major * std::sin(phi));
  return rotation(cfg.orientation_deg) * local.normalized();
}

ToleranceBand::ToleranceBand(const TrajectoryConfig& cfg) : cfg_(cfg) {}

Point2 ToleranceBand::inner(double phi) const {
  return target_at_phase(cfg_, phi) -
         cfg_.tolerance_halfwidth * outward_normal(cfg_, phi);
}

Point2 ToleranceBand::outer(double phi) const {
  return target_at_phase(cfg_, phi) +
         cfg_.tolerance_halfwidth * outward_normal(cfg_, phi);
}

std::vector<Point2> ToleranceBand::sample_inner(int n) const {
  std::vector<Point2> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) pts.push_back(inner(2.0 * std::numbers::pi * i / n));
  return pts;
}

std::vector<Point2> ToleranceBand::sample_outer(int n) const {
  std::vector<Point2> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) pts.push_back(outer(2.0 * std::numbers::pi * i / n));
  return pts;
}

ToleranceBand tolerance_curves(const TrajectoryConfig& cfg) {
  return ToleranceBand(cfg);
}

}  // namespace effort
