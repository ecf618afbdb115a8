#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "edgefit/camera.hpp"
#include "edgefit/edgemap.hpp"
#include "edgefit/model.hpp"
#include "edgefit/optim.hpp"

namespace edgefit {

/// Weights of the landmark, edge and prior terms.
struct HybridWeights {
  double w1 = 0.15;
  double w2 = 0.45;
  double w3 = 0.40;
  /// Throws InvalidArgument on negative, non-finite or all-zero weights.
  void validate() const;
};

/// Shape and pose being estimated.
struct FitParams {
  Eigen::VectorXd alpha;
  Pose pose;
};

/// Optimiser vector layout: [beta (S) | r (3) | t (2) | s] with
/// beta_i = alpha_i / sqrt(lambda_i) and r the axis-angle rotation.
Eigen::VectorXd packParams(const ShapeModel& model, const FitParams& params);
FitParams unpackParams(const ShapeModel& model, const Eigen::VectorXd& x);

/// Sum of squares objective over landmarks, occluding-boundary edges and the
/// shape prior, exposed as a residual vector for the trust-region solver.
///
/// r(x)^T r(x) = wl * (1/L) sum |p_i - x_i|^2 + we * E_edge + wp * sum beta_i^2,
/// where E_edge is the mean over the boundary of either the squared distance
/// to a target pixel or the sampled soft cost.
class Objective {
 public:
  explicit Objective(const ShapeModel& model);

  void setLandmarks(std::vector<std::uint32_t> vertices, std::vector<Eigen::Vector2d> points,
                    double weight);
  /// Each boundary vertex is matched to its nearest edge pixel on every evaluation;
  /// the Jacobian treats the match as fixed.
  void setNearestEdgeTerm(std::vector<std::uint32_t> boundary, const EdgeSet* edges, double weight);
  /// Boundary vertices with frozen target pixels.
  void setFixedEdgeTerm(std::vector<std::uint32_t> boundary, std::vector<Eigen::Vector2d> targets,
                        double weight);
  /// Soft cost sampled bilinearly from `surface` at each projected boundary vertex.
  void setSoftEdgeTerm(std::vector<std::uint32_t> boundary, const Image<double>* surface,
                       double weight);
  void clearEdgeTerm();
  void setPrior(double weight) { priorWeight_ = weight; }

  Eigen::Index parameterCount() const { return S_ + 6; }
  Eigen::Index residualCount() const;

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J) const;
  ResidualFunction residuals() const;
  double energy(const Eigen::VectorXd& x) const;

  /// Box on beta (|beta_i| <= k) and s > 0; pose otherwise unbounded. With
  /// `shapeFixed`, beta is pinned to its value in x.
  void bounds(const Eigen::VectorXd& x, double hyperboxK, bool shapeFixed, Eigen::VectorXd& lower,
              Eigen::VectorXd& upper) const;

 private:
  enum class EdgeMode { None, Nearest, Fixed, Soft };

  const ShapeModel& model_;
  Eigen::Index S_;
  Eigen::VectorXd sigma_;

  std::vector<std::uint32_t> lmkVertices_;
  std::vector<Eigen::Vector2d> lmkPoints_;
  double lmkWeight_ = 0.0;

  EdgeMode edgeMode_ = EdgeMode::None;
  std::vector<std::uint32_t> boundary_;
  std::vector<Eigen::Vector2d> targets_;
  const EdgeSet* edges_ = nullptr;
  const Image<double>* surface_ = nullptr;
  double edgeWeight_ = 0.0;

  double priorWeight_ = 0.0;
};

}  // namespace edgefit
