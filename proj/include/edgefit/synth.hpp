#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "edgefit/camera.hpp"
#include "edgefit/image.hpp"
#include "edgefit/landmark_fit.hpp"
#include "edgefit/model.hpp"

namespace edgefit {

/// Procedural head-like PCA model plus its designated landmark vertices.
struct SyntheticModel {
  ShapeModel model;
  std::vector<std::uint32_t> landmarkIds;
};

/// Deformed ellipsoid (face towards -z, y pointing down, units mm) with S
/// orthonormal smooth deformation components and variances decaying as
/// i^-1.5. The sphere grid is rounded up, so the vertex count is the
/// smallest R*M + 2 >= N with M a multiple of 4. The mean shape is
/// left-right symmetric and every component is either symmetric or
/// antisymmetric. Deterministic in `seed`.
SyntheticModel makeSyntheticModel(std::size_t N, Index S, std::uint64_t seed);

/// Out-of-sample subject: alpha_i = sqrt(lambda_i) z_i with z_i standard
/// normal redrawn until |z_i| <= bound.
Eigen::VectorXd sampleSubject(const ShapeModel& model, std::uint64_t seed, double bound = 2.0);

struct SyntheticScene {
  Eigen::VectorXd groundTruthAlpha;
  Pose groundTruthPose;
  double yawDeg = 0.0;
  GrayImage image;
  /// Visible subset of allLandmarkIds, projected and rounded to pixel centres.
  LandmarkSet landmarks;
  std::vector<std::uint32_t> allLandmarkIds;
};

/// Pose for a yaw angle: rotation about the vertical axis, scale so the mesh
/// spans 80% of the image height, translation centring its bounding box.
Pose scenePose(const Mesh& mesh, double yawDeg, ImageSize size);

/// Lambertian shading of the rasterised mesh with interpolated vertex normals
/// and a fixed light in the vertical plane; background is 0. Quantised to 8 bits.
GrayImage renderShaded(const Mesh& mesh, const Pose& pose, ImageSize size);

SyntheticScene renderScene(const ShapeModel& model, const std::vector<std::uint32_t>& landmarkIds,
                           const Eigen::VectorXd& alpha, double yawDeg, ImageSize size);

/// Adds i.i.d. N(0, sigma^2) to every coordinate. The underlying standard
/// normal draws depend only on the seed, so different sigmas scale the same noise.
LandmarkSet addLandmarkNoise(const LandmarkSet& landmarks, double sigma, std::uint64_t seed);

/// Directory with image.pgm, landmarks.csv, ground_truth.json and scene_meta.json.
void writeSceneBundle(const SyntheticScene& scene, const std::filesystem::path& dir);
SyntheticScene readSceneBundle(const std::filesystem::path& dir);

}  // namespace edgefit
