#pragma once

#include <Eigen/Core>

namespace edgefit {

/// Scaled orthographic camera: x = s * [R]_{1:2} v + s * t.
///
/// Image coordinates: x to the right, y down, origin at the centre of the
/// top-left pixel. The viewing direction is +z, so smaller z is nearer.
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector2d t = Eigen::Vector2d::Zero();
  double s = 1.0;
};

/// Pose with the rotation stored as an axis-angle vector (radians * axis).
struct AxisAnglePose {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  Eigen::Vector2d t = Eigen::Vector2d::Zero();
  double s = 1.0;
};

Eigen::Vector2d sop(const Eigen::Vector3d& v, const Pose& pose);

/// Throws InvalidArgument unless R is a rotation (tolerance `tol`) and s > 0.
void validatePose(const Pose& pose, double tol = 1e-6);

Eigen::Matrix3d axisAngleToMatrix(const Eigen::Vector3d& r);
/// Inverse of axisAngleToMatrix with |r| in [0, pi]. Throws InvalidArgument on
/// non-orthonormal input.
Eigen::Vector3d matrixToAxisAngle(const Eigen::Matrix3d& R);

AxisAnglePose toAxisAngle(const Pose& pose);
Pose toMatrix(const AxisAnglePose& pose);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// d(R(r) v) / dr for the axis-angle parameterisation.
Eigen::Matrix3d rotatedPointJacobian(const Eigen::Vector3d& r, const Eigen::Vector3d& v);

/// Rotation by `angleRad` about the vertical image axis (y).
Eigen::Matrix3d yawRotation(double angleRad);

}  // namespace edgefit
