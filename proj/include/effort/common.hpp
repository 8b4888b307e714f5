#pragma once

#include <array>
#include <string_view>

#include <Eigen/Core>

namespace effort {

inline constexpr int kMuscles = 6;
inline constexpr int kAxes = 2;

using Vec2 = Eigen::Vector2d;
using Vec6 = Eigen::Matrix<double, kMuscles, 1>;

/// A point in the 2-D joint-angle workspace [rad].
using Point2 = Vec2;
/// Per-axis torque [N·m].
using TorqueVec = Vec2;

/// Muscle channel order used everywhere (EMG-1 .. EMG-6).
inline constexpr std::array<std::string_view, kMuscles> kMuscleNames = {
    "brachialis", "posterior_deltoid", "anterior_deltoid",
    "biceps",     "triceps",           "chest"};

}  // namespace effort
