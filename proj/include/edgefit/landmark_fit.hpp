#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "edgefit/camera.hpp"
#include "edgefit/fit_result.hpp"
#include "edgefit/model.hpp"
#include "edgefit/objective.hpp"

namespace edgefit {

struct Landmark {
  std::uint32_t vertex = 0;
  Eigen::Vector2d point = Eigen::Vector2d::Zero();
};

/// 2D observations of model vertices. Vertex ids are distinct.
class LandmarkSet {
 public:
  LandmarkSet() = default;
  /// Throws InvalidArgument on a repeated vertex id or non-finite coordinates.
  explicit LandmarkSet(std::vector<Landmark> entries);

  const std::vector<Landmark>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<std::uint32_t> vertices() const;
  std::vector<Eigen::Vector2d> points() const;

 private:
  std::vector<Landmark> entries_;
};

/// CSV with lines `vertexIndex,x,y`; an optional header line and `#` comments.
LandmarkSet readLandmarks(const std::filesystem::path& path);
void writeLandmarks(const LandmarkSet& landmarks, const std::filesystem::path& path);

struct FitOptions {
  double hyperboxK = 3.0;
  int alternationIters = 5;
  int nonlinearMaxIters = 200;
  double convergenceTol = 1e-8;
  void validate() const;
};

/// (1/L) sum_i |x_i - sop(P_i alpha + fbar_i)|^2.
double landmarkEnergy(const ShapeModel& model, const LandmarkSet& landmarks,
                      const Eigen::VectorXd& alpha, const Pose& pose);

/// Linear pose from 3D-2D correspondences followed by projection of the
/// stacked rows onto the rotation group. Needs at least four points in
/// general position; throws DegenerateError when the system is rank deficient.
Pose estimatePosePOS(const std::vector<Eigen::Vector3d>& points3d,
                     const std::vector<Eigen::Vector2d>& points2d);

/// Nearest rotation to a matrix whose first two rows carry the projection:
/// R = U V^T from the SVD of M, with the third row of U negated when that
/// would otherwise produce a reflection.
Eigen::Matrix3d rotationFromStackedRows(const Eigen::Matrix3d& M);

/// Shape coefficients minimising the landmark error for a fixed pose subject
/// to |alpha_i| <= k sqrt(lambda_i).
Eigen::VectorXd estimateShapeLLS(const ShapeModel& model, const LandmarkSet& landmarks,
                                 const Pose& pose, double hyperboxK = 3.0);
Eigen::VectorXd estimateShapeLLS(const ShapeModel& model, const std::vector<std::uint32_t>& vertices,
                                 const std::vector<Eigen::Vector2d>& points, const Pose& pose,
                                 double hyperboxK);

/// Pose initialisation, alternating pose/shape refinement, then joint
/// nonlinear refinement. Stage energies are recorded in the result.
FitResult fitLandmarks(const ShapeModel& model, const LandmarkSet& landmarks,
                       const FitOptions& options = {});

/// Same pipeline on arbitrary (possibly repeated) vertex correspondences.
/// With `initial` set, the linear pose initialisation is skipped.
FitResult fitCorrespondences(const ShapeModel& model, const std::vector<std::uint32_t>& vertices,
                             const std::vector<Eigen::Vector2d>& points, const FitParams* initial,
                             const FitOptions& options);

}  // namespace edgefit
