#include "edgefit/fit_soft.hpp"

#include <cmath>

#include "edgefit/errors.hpp"
#include "edgefit/fit_hard.hpp"
#include "edgefit/optim.hpp"

namespace edgefit {

double softEdgeEnergy(const ShapeModel& model, const Eigen::VectorXd& alpha, const Pose& pose,
                      const EdgeCostSurface& surface, const std::vector<std::uint32_t>& boundary) {
  if (boundary.empty()) throw DegenerateError("softEdgeEnergy: empty occluding boundary");
  double sum = 0.0;
  for (auto v : boundary) sum += sampleBilinear(surface, sop(instantiateVertex(model, alpha, v), pose));
  return sum / static_cast<double>(boundary.size());
}

double softEdgeEnergy(const ShapeModel& model, const Eigen::VectorXd& alpha, const Pose& pose,
                      const EdgeCostSurface& surface, const BoundaryVertexSet& boundary) {
  return softEdgeEnergy(model, alpha, pose, surface, boundary.indices);
}

double kappaForScale(const ShapeModel& model, double s) {
  const Eigen::VectorXd& m = model.meanShape();
  double lo = m[1], hi = m[1];
  for (Index i = 1; i < m.size(); i += 3) {
    lo = std::min(lo, m[i]);
    hi = std::max(hi, m[i]);
  }
  return s * (hi - lo) / 20.0;
}

double hybridEnergySoft(const ShapeModel& model, const LandmarkSet& landmarks, const EdgeCostSurface& surface,
                        const std::vector<std::uint32_t>& boundary, const FitParams& params,
                        const HybridWeights& weights) {
  double e = weights.w1 * landmarkEnergy(model, landmarks, params.alpha, params.pose) +
             weights.w3 * priorEnergy(params.alpha, model.variances());
  if (!boundary.empty() && weights.w2 != 0.0) {
    e += weights.w2 * softEdgeEnergy(model, params.alpha, params.pose, surface, boundary);
  }
  return e;
}

FitResult hybridFitSoft(const ShapeModel& model, const LandmarkSet& landmarks, const GrayImage& image,
                        const FitParams& initial, const SoftFitConfig& config) {
  return hybridFitSoft(model, landmarks, buildDistanceStack(image, config.thresholds, config.scales, config.sigma),
                       initial, config);
}

FitResult hybridFitSoft(const ShapeModel& model, const LandmarkSet& landmarks, const DistanceStack& stack,
                        const FitParams& initial, const SoftFitConfig& config) {
  config.weights.validate();
  if (config.outerRestarts < 1 || config.innerIters < 1) {
    throw InvalidArgument("hybridFitSoft: iteration counts must be >= 1");
  }
  if (landmarks.empty()) throw InvalidArgument("hybridFitSoft: empty landmark set");
  FitResult result;
  result.method = "soft";

  Objective obj(model);
  obj.setLandmarks(landmarks.vertices(), landmarks.points(), config.weights.w1);
  obj.setPrior(config.weights.w3);

  const Index S = model.componentCount();
  Eigen::VectorXd x = packParams(model, initial);
  x.head(S) = x.head(S).cwiseMax(-config.hyperboxK).cwiseMin(config.hyperboxK);

  TrustRegionOptions tr;
  tr.maxIterations = config.innerIters;
  tr.stepTol = config.stepTol;

  EdgeCostSurface surface;
  std::vector<std::uint32_t> boundary;
  for (int round = 0; round < config.outerRestarts; ++round) {
    const FitParams cur = unpackParams(model, x);
    surface = composeCostSurface(stack, kappaForScale(model, cur.pose.s));
    boundary = occludingBoundary(instantiate(model, ShapeCoefficients{cur.alpha}), cur.pose, stack.size).indices;
    result.correspondenceCounts.push_back(static_cast<int>(boundary.size()));
    if (boundary.empty() || config.weights.w2 == 0.0) {
      if (boundary.empty()) result.warnings.push_back("round " + std::to_string(round + 1) + ": empty boundary, edge term skipped");
      obj.clearEdgeTerm();
    } else {
      obj.setSoftEdgeTerm(boundary, &surface.S, config.weights.w2);
    }
    const double before = obj.energy(x);
    if (round == 0) result.record("initial", before);
    if (!std::isfinite(before)) {
      result.warnings.push_back("non-finite energy; stopping with best estimate so far");
      break;
    }
    Eigen::VectorXd lo, hi;
    obj.bounds(x, config.hyperboxK, false, lo, hi);
    const auto rep = minimizeBoxedLeastSquares(obj.residuals(), x, lo, hi, tr);
    const Eigen::VectorXd prev = x;
    if (std::isfinite(rep.finalCost) && rep.finalCost <= before) x = packParams(model, unpackParams(model, rep.x));
    result.record("round." + std::to_string(round + 1), obj.energy(x));
    if ((x - prev).norm() < config.stepTol * (prev.norm() + config.stepTol)) break;
  }

  const FitParams out = unpackParams(model, x);
  const Eigen::VectorXd limit = config.hyperboxK * model.stdDevs();
  result.alpha = out.alpha.cwiseMax(-limit).cwiseMin(limit);
  result.pose = out.pose;
  return result;
}

}  // namespace edgefit
