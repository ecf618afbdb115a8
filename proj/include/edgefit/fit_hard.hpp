#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "edgefit/contour.hpp"
#include "edgefit/edgemap.hpp"
#include "edgefit/fit_result.hpp"
#include "edgefit/landmark_fit.hpp"
#include "edgefit/model.hpp"
#include "edgefit/objective.hpp"

namespace edgefit {

enum class MatchStatus : std::uint8_t { Kept, PercentileCut, ThresholdCut };

struct EdgeCorrespondence {
  std::uint32_t vertex = 0;
  Eigen::Vector2d projected = Eigen::Vector2d::Zero();
  EdgePixel pixel;
  double distance = 0.0;  // pixels
  MatchStatus status = MatchStatus::Kept;
};

struct EdgeCorrespondences {
  std::vector<EdgeCorrespondence> pairs;  // ordered by vertex id
  std::size_t keptCount() const;
  bool noneKept() const { return keptCount() == 0; }
};

/// (1/|B|) sum over boundary vertices of the squared distance to the nearest edge pixel.
/// Throws DegenerateError on an empty boundary and NoEdgesError on an empty edge set.
double edgeEnergyHard(const ShapeModel& model, const Eigen::VectorXd& alpha, const Pose& pose,
                      const EdgeSet& edges, const std::vector<std::uint32_t>& boundary);
double edgeEnergyHard(const ShapeModel& model, const Eigen::VectorXd& alpha, const Pose& pose,
                      const EdgeSet& edges, const BoundaryVertexSet& boundary);

/// sum_i alpha_i^2 / lambda_i.
double priorEnergy(const Eigen::VectorXd& alpha, const Eigen::VectorXd& variances);

/// Marks the floor(percentileCut * n) largest distances (ties broken by
/// vertex id) and then every remaining pair with distance / s > distThreshRatio.
void filterCorrespondences(std::vector<EdgeCorrespondence>& pairs, double s, double percentileCut,
                           double distThreshRatio);

/// Matches every occluding-boundary vertex of the current estimate to its
/// nearest edge pixel and filters unreliable matches.
EdgeCorrespondences icefCorrespond(const ShapeModel& model, const Eigen::VectorXd& alpha, const Pose& pose,
                                   const EdgeSet& edges, ImageSize imageSize, double percentileCut = 0.05,
                                   double distThreshRatio = 10.0);

struct IcefOptions {
  int iterations = 10;
  double percentileCut = 0.05;
  double distThreshRatio = 10.0;
  FitOptions fit;
};

/// Iterated closest-edge fitting: kept matches become extra landmarks and
/// the landmark fit is rerun (warm-started) on the union.
FitResult icefFit(const ShapeModel& model, const LandmarkSet& landmarks, const EdgeSet& edges,
                  const FitParams& initial, const IcefOptions& options = {});

struct HybridOptions {
  HybridWeights weights;
  int outerRestarts = 5;
  int innerIters = 30;
  double hyperboxK = 3.0;
  double stepTol = 1e-8;
};

/// w1 E_lmk + w2 E_edge + w3 E_prior for a given boundary; the edge term is
/// dropped when the boundary is empty.
double hybridEnergyHard(const ShapeModel& model, const LandmarkSet& landmarks, const EdgeSet& edges,
                        const std::vector<std::uint32_t>& boundary, const FitParams& params,
                        const HybridWeights& weights);

/// Minimises the hybrid objective with the occluding boundary frozen within
/// each outer round and recomputed between rounds.
FitResult hybridFitHard(const ShapeModel& model, const LandmarkSet& landmarks, const EdgeSet& edges,
                        const FitParams& initial, const HybridOptions& options = {});

}  // namespace edgefit
