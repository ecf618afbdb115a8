#include "edgefit/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "edgefit/errors.hpp"

namespace edgefit {

namespace {
constexpr double kSmallAngle = 1e-7;
}

Eigen::Vector2d sop(const Eigen::Vector3d& v, const Pose& pose) {
  return pose.s * (pose.R.topRows<2>() * v + pose.t);
}

void validatePose(const Pose& pose, double tol) {
  if (!(pose.s > 0.0) || !std::isfinite(pose.s)) {
    throw InvalidArgument("pose scale must be positive");
  }
  const double orth = (pose.R.transpose() * pose.R - Eigen::Matrix3d::Identity()).norm();
  if (!(orth <= tol) || std::abs(pose.R.determinant() - 1.0) > tol) {
    throw InvalidArgument("pose rotation is not a proper rotation matrix");
  }
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d axisAngleToMatrix(const Eigen::Vector3d& r) {
  const double theta = r.norm();
  const Eigen::Matrix3d K = skew(r);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + K + 0.5 * K * K;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * K + b * K * K;
}

Eigen::Vector3d matrixToAxisAngle(const Eigen::Matrix3d& R) {
  if ((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() > 1e-6 ||
      std::abs(R.determinant() - 1.0) > 1e-6) {
    throw InvalidArgument("matrixToAxisAngle: input is not a rotation matrix");
  }
  // sin(theta) * axis
  const Eigen::Vector3d sinAxis(0.5 * (R(2, 1) - R(1, 2)), 0.5 * (R(0, 2) - R(2, 0)),
                                0.5 * (R(1, 0) - R(0, 1)));
  const double sinTheta = sinAxis.norm();
  const double cosTheta = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(sinTheta, cosTheta);

  if (sinTheta < kSmallAngle && cosTheta > 0.0) {
    // theta ~ 0: R ~ I + [r]x
    return sinAxis;
  }
  if (cosTheta < -0.5) {
    // The antisymmetric part vanishes towards pi; take the axis from
    // (R + R^T)/2 = I + (1 - cos)(a a^T - I) instead.
    const Eigen::Matrix3d sym = 0.5 * (R + R.transpose());
    const Eigen::Matrix3d aat = (sym - cosTheta * Eigen::Matrix3d::Identity()) / (1.0 - cosTheta);
    Eigen::Index k;
    aat.diagonal().maxCoeff(&k);
    Eigen::Vector3d axis = aat.col(k).normalized();
    if (axis.dot(sinAxis) < 0.0) axis = -axis;
    return std::atan2(axis.dot(sinAxis), cosTheta) * axis;
  }
  return (theta / sinTheta) * sinAxis;
}

AxisAnglePose toAxisAngle(const Pose& pose) {
  return {matrixToAxisAngle(pose.R), pose.t, pose.s};
}

Pose toMatrix(const AxisAnglePose& pose) {
  return {axisAngleToMatrix(pose.r), pose.t, pose.s};
}

Eigen::Matrix3d rotatedPointJacobian(const Eigen::Vector3d& r, const Eigen::Vector3d& v) {
  // d(R v)/dr = -R [v]x J_r(r), J_r the right Jacobian of SO(3).
  const double theta = r.norm();
  const Eigen::Matrix3d K = skew(r);
  double c1, c2;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    c1 = 0.5 - t2 / 24.0;
    c2 = 1.0 / 6.0 - t2 / 120.0;
  } else {
    c1 = (1.0 - std::cos(theta)) / (theta * theta);
    c2 = (theta - std::sin(theta)) / (theta * theta * theta);
  }
  const Eigen::Matrix3d Jr = Eigen::Matrix3d::Identity() - c1 * K + c2 * K * K;
  return -axisAngleToMatrix(r) * skew(v) * Jr;
}

Eigen::Matrix3d yawRotation(double angleRad) {
  return Eigen::AngleAxisd(angleRad, Eigen::Vector3d::UnitY()).toRotationMatrix();
}

}  // namespace edgefit
