#include "edgefit/objective.hpp"

#include <cmath>
#include <limits>

#include "edgefit/errors.hpp"

namespace edgefit {

namespace {

// Projection of one model vertex and its derivatives w.r.t. [beta | r | t | s].
struct ProjectedVertex {
  Eigen::Vector2d p;
  Eigen::Matrix<double, 2, Eigen::Dynamic> dp;
};

class Projector {
 public:
  Projector(const ShapeModel& model, const Eigen::VectorXd& sigma, const Eigen::VectorXd& x)
      : model_(model), sigma_(sigma), S_(model.componentCount()) {
    beta_ = x.head(S_);
    alpha_ = sigma.cwiseProduct(beta_);
    r_ = x.segment<3>(S_);
    t_ = x.segment<2>(S_ + 3);
    s_ = x[S_ + 5];
    R_ = axisAngleToMatrix(r_);
  }

  void project(std::uint32_t vertex, bool withJacobian, ProjectedVertex& out) const {
    const Index row = 3 * static_cast<Index>(vertex);
    const auto P = model_.components().middleRows(row, 3);
    const Eigen::Vector3d v = P * alpha_ + model_.meanShape().segment<3>(row);
    const Eigen::Vector2d q = R_.topRows<2>() * v + t_;
    out.p = s_ * q;
    if (!withJacobian) return;
    out.dp.resize(2, S_ + 6);
    out.dp.leftCols(S_).noalias() = s_ * (R_.topRows<2>() * P) * sigma_.asDiagonal();
    out.dp.middleCols<3>(S_) = s_ * rotatedPointJacobian(r_, v).topRows<2>();
    out.dp.middleCols<2>(S_ + 3) = s_ * Eigen::Matrix2d::Identity();
    out.dp.col(S_ + 5) = q;
  }

  const Eigen::VectorXd& beta() const { return beta_; }

 private:
  const ShapeModel& model_;
  const Eigen::VectorXd& sigma_;
  Index S_;
  Eigen::VectorXd beta_, alpha_;
  Eigen::Vector3d r_;
  Eigen::Vector2d t_;
  double s_;
  Eigen::Matrix3d R_;
};

}  // namespace

void HybridWeights::validate() const {
  for (double w : {w1, w2, w3}) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidArgument("hybrid weights must be finite and non-negative");
  }
  if (w1 == 0.0 && w2 == 0.0 && w3 == 0.0) throw InvalidArgument("hybrid weights are all zero");
}

Eigen::VectorXd packParams(const ShapeModel& model, const FitParams& params) {
  const Index S = model.componentCount();
  if (params.alpha.size() != S) throw InvalidArgument("packParams: alpha has wrong length");
  Eigen::VectorXd x(S + 6);
  x.head(S) = params.alpha.cwiseQuotient(model.stdDevs());
  x.segment<3>(S) = matrixToAxisAngle(params.pose.R);
  x.segment<2>(S + 3) = params.pose.t;
  x[S + 5] = params.pose.s;
  return x;
}

FitParams unpackParams(const ShapeModel& model, const Eigen::VectorXd& x) {
  const Index S = model.componentCount();
  if (x.size() != S + 6) throw InvalidArgument("unpackParams: parameter vector has wrong length");
  FitParams p;
  p.alpha = x.head(S).cwiseProduct(model.stdDevs());
  p.pose.R = axisAngleToMatrix(x.segment<3>(S));
  p.pose.t = x.segment<2>(S + 3);
  p.pose.s = x[S + 5];
  return p;
}

Objective::Objective(const ShapeModel& model)
    : model_(model), S_(model.componentCount()), sigma_(model.stdDevs()) {}

void Objective::setLandmarks(std::vector<std::uint32_t> vertices, std::vector<Eigen::Vector2d> points,
                             double weight) {
  if (vertices.size() != points.size()) throw InvalidArgument("setLandmarks: size mismatch");
  for (auto v : vertices) {
    if (v >= model_.vertexCount()) throw InvalidArgument("setLandmarks: vertex index out of range");
  }
  lmkVertices_ = std::move(vertices);
  lmkPoints_ = std::move(points);
  lmkWeight_ = weight;
}

void Objective::setNearestEdgeTerm(std::vector<std::uint32_t> boundary, const EdgeSet* edges,
                                   double weight) {
  if (edges == nullptr || edges->empty()) throw NoEdgesError("edge term needs a non-empty edge set");
  boundary_ = std::move(boundary);
  targets_.clear();
  edges_ = edges;
  surface_ = nullptr;
  edgeWeight_ = weight;
  edgeMode_ = EdgeMode::Nearest;
}

void Objective::setFixedEdgeTerm(std::vector<std::uint32_t> boundary,
                                 std::vector<Eigen::Vector2d> targets, double weight) {
  if (boundary.size() != targets.size()) throw InvalidArgument("setFixedEdgeTerm: size mismatch");
  boundary_ = std::move(boundary);
  targets_ = std::move(targets);
  edges_ = nullptr;
  surface_ = nullptr;
  edgeWeight_ = weight;
  edgeMode_ = EdgeMode::Fixed;
}

void Objective::setSoftEdgeTerm(std::vector<std::uint32_t> boundary, const Image<double>* surface,
                                double weight) {
  if (surface == nullptr || surface->empty()) throw InvalidArgument("soft edge term needs a cost surface");
  boundary_ = std::move(boundary);
  targets_.clear();
  edges_ = nullptr;
  surface_ = surface;
  edgeWeight_ = weight;
  edgeMode_ = EdgeMode::Soft;
}

void Objective::clearEdgeTerm() {
  edgeMode_ = EdgeMode::None;
  boundary_.clear();
  targets_.clear();
  edges_ = nullptr;
  surface_ = nullptr;
}

Eigen::Index Objective::residualCount() const {
  Index n = 2 * static_cast<Index>(lmkVertices_.size());
  if (edgeMode_ == EdgeMode::Nearest || edgeMode_ == EdgeMode::Fixed) {
    n += 2 * static_cast<Index>(boundary_.size());
  } else if (edgeMode_ == EdgeMode::Soft) {
    n += static_cast<Index>(boundary_.size());
  }
  if (priorWeight_ > 0.0) n += S_;
  return n;
}

void Objective::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J) const {
  if (x.size() != parameterCount()) throw InvalidArgument("Objective: parameter vector has wrong length");
  const Projector proj(model_, sigma_, x);
  const Index m = residualCount();
  r.resize(m);
  if (J) J->setZero(m, parameterCount());
  ProjectedVertex pv;
  Index row = 0;

  if (!lmkVertices_.empty()) {
    const double c = std::sqrt(lmkWeight_ / static_cast<double>(lmkVertices_.size()));
    for (std::size_t i = 0; i < lmkVertices_.size(); ++i, row += 2) {
      proj.project(lmkVertices_[i], J != nullptr, pv);
      r.segment<2>(row) = c * (pv.p - lmkPoints_[i]);
      if (J) J->middleRows<2>(row) = c * pv.dp;
    }
  }

  if (edgeMode_ != EdgeMode::None && !boundary_.empty()) {
    const double c = std::sqrt(edgeWeight_ / static_cast<double>(boundary_.size()));
    for (std::size_t i = 0; i < boundary_.size(); ++i) {
      proj.project(boundary_[i], J != nullptr, pv);
      if (edgeMode_ == EdgeMode::Soft) {
        Eigen::Vector2d grad;
        const double S = std::max(sampleBilinearWithGradient(*surface_, pv.p, grad), 0.0);
        const double root = std::sqrt(S);
        r[row] = c * root;
        if (J) {
          // d sqrt(S) = dS / (2 sqrt(S)); the floor keeps the Jacobian finite at S = 0.
          const double denom = 2.0 * std::max(root, 1e-6);
          J->row(row) = (c / denom) * (grad.transpose() * pv.dp);
        }
        row += 1;
      } else {
        Eigen::Vector2d target;
        if (edgeMode_ == EdgeMode::Fixed) {
          target = targets_[i];
        } else {
          const auto hit = nearestEdge(*edges_, pv.p);
          target = Eigen::Vector2d(hit.pixel.x, hit.pixel.y);
        }
        r.segment<2>(row) = c * (pv.p - target);
        if (J) J->middleRows<2>(row) = c * pv.dp;
        row += 2;
      }
    }
  }

  if (priorWeight_ > 0.0) {
    const double c = std::sqrt(priorWeight_);
    r.segment(row, S_) = c * proj.beta();
    if (J) J->block(row, 0, S_, S_).diagonal().setConstant(c);
    row += S_;
  }
}

ResidualFunction Objective::residuals() const {
  return [this](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J) { evaluate(x, r, J); };
}

double Objective::energy(const Eigen::VectorXd& x) const {
  Eigen::VectorXd r;
  evaluate(x, r, nullptr);
  return r.squaredNorm();
}

void Objective::bounds(const Eigen::VectorXd& x, double hyperboxK, bool shapeFixed,
                       Eigen::VectorXd& lower, Eigen::VectorXd& upper) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  lower = Eigen::VectorXd::Constant(parameterCount(), -inf);
  upper = Eigen::VectorXd::Constant(parameterCount(), inf);
  if (shapeFixed) {
    lower.head(S_) = x.head(S_);
    upper.head(S_) = x.head(S_);
  } else {
    lower.head(S_).setConstant(-hyperboxK);
    upper.head(S_).setConstant(hyperboxK);
  }
  lower[S_ + 5] = 1e-9;
}

}  // namespace edgefit
