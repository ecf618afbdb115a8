#include "edgefit/fit_hard.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "edgefit/errors.hpp"
#include "edgefit/optim.hpp"

namespace edgefit {

std::size_t EdgeCorrespondences::keptCount() const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const auto& p) {
    return p.status == MatchStatus::Kept;
  }));
}

double edgeEnergyHard(const ShapeModel& model, const Eigen::VectorXd& alpha, const Pose& pose,
                      const EdgeSet& edges, const std::vector<std::uint32_t>& boundary) {
  if (boundary.empty()) throw DegenerateError("edgeEnergyHard: empty occluding boundary");
  if (edges.empty()) throw NoEdgesError("edgeEnergyHard: empty edge set");
  double sum = 0.0;
  for (auto v : boundary) {
    const auto hit = nearestEdge(edges, sop(instantiateVertex(model, alpha, v), pose));
    sum += hit.distance * hit.distance;
  }
  return sum / static_cast<double>(boundary.size());
}

double edgeEnergyHard(const ShapeModel& model, const Eigen::VectorXd& alpha, const Pose& pose,
                      const EdgeSet& edges, const BoundaryVertexSet& boundary) {
  return edgeEnergyHard(model, alpha, pose, edges, boundary.indices);
}

double priorEnergy(const Eigen::VectorXd& alpha, const Eigen::VectorXd& variances) {
  if (alpha.size() != variances.size()) throw InvalidArgument("priorEnergy: dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) sum += alpha[i] * alpha[i] / variances[i];
  return sum;
}

void filterCorrespondences(std::vector<EdgeCorrespondence>& pairs, double s, double percentileCut,
                           double distThreshRatio) {
  if (!(percentileCut >= 0.0 && percentileCut <= 1.0)) {
    throw InvalidArgument("percentileCut must lie in [0, 1]");
  }
  if (!(s > 0.0)) throw InvalidArgument("filterCorrespondences: scale must be positive");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pairs[a].distance != pairs[b].distance) return pairs[a].distance > pairs[b].distance;
    return pairs[a].vertex > pairs[b].vertex;
  });
  const auto cut = static_cast<std::size_t>(std::floor(percentileCut * static_cast<double>(pairs.size()) + 1e-9));
  for (auto& p : pairs) p.status = MatchStatus::Kept;
  for (std::size_t k = 0; k < cut && k < order.size(); ++k) pairs[order[k]].status = MatchStatus::PercentileCut;
  for (auto& p : pairs) {
    if (p.status == MatchStatus::Kept && p.distance / s > distThreshRatio) p.status = MatchStatus::ThresholdCut;
  }
}

EdgeCorrespondences icefCorrespond(const ShapeModel& model, const Eigen::VectorXd& alpha, const Pose& pose,
                                   const EdgeSet& edges, ImageSize imageSize, double percentileCut,
                                   double distThreshRatio) {
  if (edges.empty()) throw NoEdgesError("icefCorrespond: empty edge set");
  const Mesh mesh = instantiate(model, ShapeCoefficients{alpha});
  const BoundaryVertexSet boundary = occludingBoundary(mesh, pose, imageSize);
  EdgeCorrespondences out;
  out.pairs.reserve(boundary.size());
  for (auto v : boundary.indices) {
    EdgeCorrespondence c;
    c.vertex = v;
    c.projected = sop(mesh.vertex(v), pose);
    const auto hit = nearestEdge(edges, c.projected);
    c.pixel = hit.pixel;
    c.distance = hit.distance;
    out.pairs.push_back(c);
  }
  filterCorrespondences(out.pairs, pose.s, percentileCut, distThreshRatio);
  return out;
}

FitResult icefFit(const ShapeModel& model, const LandmarkSet& landmarks, const EdgeSet& edges,
                  const FitParams& initial, const IcefOptions& options) {
  if (options.iterations < 0) throw InvalidArgument("icefFit: negative iteration count");
  FitResult result;
  result.method = "icef";
  result.alpha = initial.alpha;
  result.pose = initial.pose;
  {
    Objective obj(model);
    obj.setLandmarks(landmarks.vertices(), landmarks.points(), 1.0);
    result.record("initial", obj.energy(packParams(model, initial)));
  }
  if (edges.empty()) {
    result.warnings.push_back("no image edges; returning the initial estimate");
    return result;
  }
  FitParams current = initial;
  const auto lmkVertices = landmarks.vertices();
  const auto lmkPoints = landmarks.points();
  for (int it = 0; it < options.iterations; ++it) {
    const auto corr = icefCorrespond(model, current.alpha, current.pose, edges, edges.imageSize(),
                                     options.percentileCut, options.distThreshRatio);
    const std::size_t kept = corr.keptCount();
    result.correspondenceCounts.push_back(static_cast<int>(kept));
    if (kept == 0) {
      result.warnings.push_back("iteration " + std::to_string(it + 1) +
                                ": no edge correspondences survived filtering");
      if (it == 0) result.warnings.push_back("falling back to the landmark-only estimate");
      break;
    }
    auto vertices = lmkVertices;
    auto points = lmkPoints;
    for (const auto& p : corr.pairs) {
      if (p.status != MatchStatus::Kept) continue;
      vertices.push_back(p.vertex);
      points.emplace_back(p.pixel.x, p.pixel.y);
    }
    const FitResult step = fitCorrespondences(model, vertices, points, &current, options.fit);
    current.alpha = step.alpha;
    current.pose = step.pose;
    result.record("icef." + std::to_string(it + 1), step.finalEnergy());
  }
  result.alpha = current.alpha;
  result.pose = current.pose;
  return result;
}

double hybridEnergyHard(const ShapeModel& model, const LandmarkSet& landmarks, const EdgeSet& edges,
                        const std::vector<std::uint32_t>& boundary, const FitParams& params,
                        const HybridWeights& weights) {
  double e = weights.w1 * landmarkEnergy(model, landmarks, params.alpha, params.pose) +
             weights.w3 * priorEnergy(params.alpha, model.variances());
  if (!boundary.empty() && weights.w2 != 0.0) {
    e += weights.w2 * edgeEnergyHard(model, params.alpha, params.pose, edges, boundary);
  }
  return e;
}

namespace {

std::vector<std::uint32_t> boundaryAt(const ShapeModel& model, const FitParams& p, ImageSize size) {
  const Mesh mesh = instantiate(model, ShapeCoefficients{p.alpha});
  return occludingBoundary(mesh, p.pose, size).indices;
}

}  // namespace

FitResult hybridFitHard(const ShapeModel& model, const LandmarkSet& landmarks, const EdgeSet& edges,
                        const FitParams& initial, const HybridOptions& options) {
  options.weights.validate();
  if (options.outerRestarts < 1 || options.innerIters < 1) {
    throw InvalidArgument("hybridFitHard: iteration counts must be >= 1");
  }
  if (landmarks.empty()) throw InvalidArgument("hybridFitHard: empty landmark set");
  FitResult result;
  result.method = "hard";
  const ImageSize size = edges.imageSize();

  Objective obj(model);
  obj.setLandmarks(landmarks.vertices(), landmarks.points(), options.weights.w1);
  obj.setPrior(options.weights.w3);

  const Index S = model.componentCount();
  Eigen::VectorXd x = packParams(model, initial);
  x.head(S) = x.head(S).cwiseMax(-options.hyperboxK).cwiseMin(options.hyperboxK);
  const Eigen::VectorXd x0 = x;
  const std::vector<std::uint32_t> initialBoundary = boundaryAt(model, unpackParams(model, x), size);
  std::vector<std::uint32_t> boundary = initialBoundary;

  TrustRegionOptions tr;
  tr.maxIterations = options.innerIters;
  tr.stepTol = options.stepTol;

  auto setEdges = [&](const std::vector<std::uint32_t>& b) {
    if (b.empty() || edges.empty() || options.weights.w2 == 0.0) {
      obj.clearEdgeTerm();
    } else {
      obj.setNearestEdgeTerm(b, &edges, options.weights.w2);
    }
  };

  for (int round = 0; round < options.outerRestarts; ++round) {
    result.correspondenceCounts.push_back(static_cast<int>(boundary.size()));
    if (boundary.empty()) result.warnings.push_back("round " + std::to_string(round + 1) + ": empty boundary, edge term skipped");
    setEdges(boundary);
    const double before = obj.energy(x);
    if (!std::isfinite(before)) {
      result.warnings.push_back("non-finite energy; stopping with best estimate so far");
      break;
    }
    Eigen::VectorXd lo, hi;
    obj.bounds(x, options.hyperboxK, false, lo, hi);
    const auto rep = minimizeBoxedLeastSquares(obj.residuals(), x, lo, hi, tr);
    const Eigen::VectorXd prev = x;
    if (std::isfinite(rep.finalCost) && rep.finalCost <= before) {
      x = packParams(model, unpackParams(model, rep.x));
    }
    result.record("round." + std::to_string(round + 1), obj.energy(x));
    boundary = boundaryAt(model, unpackParams(model, x), size);
    if ((x - prev).norm() < options.stepTol * (prev.norm() + options.stepTol)) break;
  }

  // Diagnostics: start and end energies under the first and the last boundary.
  setEdges(initialBoundary);
  result.record("hybrid.initial@initialB", obj.energy(x0));
  result.record("hybrid.final@initialB", obj.energy(x));
  setEdges(boundary);
  result.record("hybrid.initial@finalB", obj.energy(x0));
  result.record("hybrid.final@finalB", obj.energy(x));

  const FitParams out = unpackParams(model, x);
  const Eigen::VectorXd limit = options.hyperboxK * model.stdDevs();
  result.alpha = out.alpha.cwiseMax(-limit).cwiseMin(limit);
  result.pose = out.pose;
  return result;
}

}  // namespace edgefit
