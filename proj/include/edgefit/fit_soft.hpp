#pragma once

#include <cstdint>
#include <vector>

#include "edgefit/contour.hpp"
#include "edgefit/edgemap.hpp"
#include "edgefit/fit_result.hpp"
#include "edgefit/landmark_fit.hpp"
#include "edgefit/model.hpp"
#include "edgefit/objective.hpp"

namespace edgefit {

struct SoftFitConfig {
  HybridWeights weights;
  std::vector<double> thresholds{0.1, 0.2, 0.3};
  std::vector<double> scales{1.0, 0.5, 0.25};
  double sigma = 1.4;
  int outerRestarts = 5;
  int innerIters = 30;
  double hyperboxK = 3.0;
  double stepTol = 1e-8;
};

/// Mean of the bilinearly sampled cost at the projected boundary vertices.
/// Throws DegenerateError on an empty boundary.
double softEdgeEnergy(const ShapeModel& model, const Eigen::VectorXd& alpha, const Pose& pose,
                      const EdgeCostSurface& surface, const std::vector<std::uint32_t>& boundary);
double softEdgeEnergy(const ShapeModel& model, const Eigen::VectorXd& alpha, const Pose& pose,
                      const EdgeCostSurface& surface, const BoundaryVertexSet& boundary);

/// kappa = s * (mean-shape bounding-box height) / 20, in pixels.
double kappaForScale(const ShapeModel& model, double s);

double hybridEnergySoft(const ShapeModel& model, const LandmarkSet& landmarks, const EdgeCostSurface& surface,
                        const std::vector<std::uint32_t>& boundary, const FitParams& params,
                        const HybridWeights& weights);

/// Hybrid fit with the soft edge cost. kappa follows the current scale and
/// the boundary is frozen within each outer round.
FitResult hybridFitSoft(const ShapeModel& model, const LandmarkSet& landmarks, const GrayImage& image,
                        const FitParams& initial, const SoftFitConfig& config = {});
FitResult hybridFitSoft(const ShapeModel& model, const LandmarkSet& landmarks, const DistanceStack& stack,
                        const FitParams& initial, const SoftFitConfig& config = {});

}  // namespace edgefit
