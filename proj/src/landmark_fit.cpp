#include "edgefit/landmark_fit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "edgefit/errors.hpp"
#include "edgefit/optim.hpp"

namespace edgefit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parseDouble(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

void checkVertices(const ShapeModel& model, const std::vector<std::uint32_t>& vertices) {
  for (auto v : vertices) {
    if (v >= model.vertexCount()) {
      throw InvalidArgument("landmark vertex " + std::to_string(v) + " out of range");
    }
  }
}

TrustRegionOptions trustRegion(const FitOptions& o) {
  TrustRegionOptions t;
  t.maxIterations = o.nonlinearMaxIters;
  t.stepTol = o.convergenceTol;
  return t;
}

// Axis-angle may leave the canonical range during optimisation.
Eigen::VectorXd canonical(const ShapeModel& model, const Eigen::VectorXd& x) {
  return packParams(model, unpackParams(model, x));
}

}  // namespace

LandmarkSet::LandmarkSet(std::vector<Landmark> entries) : entries_(std::move(entries)) {
  std::set<std::uint32_t> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.vertex).second) {
      throw InvalidArgument("landmark vertex " + std::to_string(e.vertex) + " appears twice");
    }
    if (!e.point.allFinite()) throw InvalidArgument("landmark coordinates must be finite");
  }
}

std::vector<std::uint32_t> LandmarkSet::vertices() const {
  std::vector<std::uint32_t> v;
  v.reserve(entries_.size());
  for (const auto& e : entries_) v.push_back(e.vertex);
  return v;
}

std::vector<Eigen::Vector2d> LandmarkSet::points() const {
  std::vector<Eigen::Vector2d> p;
  p.reserve(entries_.size());
  for (const auto& e : entries_) p.push_back(e.point);
  return p;
}

LandmarkSet readLandmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open landmark file");
  std::vector<Landmark> entries;
  std::string line;
  int lineNo = 0;
  bool sawData = false;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    const std::string where = "landmarks line " + std::to_string(lineNo);
    if (fields.size() != 3) throw ParseError(where, "expected vertexIndex,x,y");
    double idx, x, y;
    const bool numeric = parseDouble(fields[0], idx) && parseDouble(fields[1], x) && parseDouble(fields[2], y);
    if (!numeric) {
      if (!sawData && entries.empty()) {
        sawData = true;  // header
        continue;
      }
      throw ParseError(where, "non-numeric field");
    }
    sawData = true;
    if (idx < 0 || idx != std::floor(idx) || idx > 4294967295.0) {
      throw ParseError(where, "vertex index must be a non-negative integer");
    }
    entries.push_back({static_cast<std::uint32_t>(idx), {x, y}});
  }
  try {
    return LandmarkSet(std::move(entries));
  } catch (const InvalidArgument& e) {
    throw ParseError("landmarks", e.what());
  }
}

void writeLandmarks(const LandmarkSet& landmarks, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << "vertexIndex,x,y\n" << std::setprecision(17);
  for (const auto& e : landmarks.entries()) out << e.vertex << ',' << e.point.x() << ',' << e.point.y() << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

void FitOptions::validate() const {
  if (!(hyperboxK > 0.0)) throw InvalidArgument("hyperboxK must be positive");
  if (alternationIters < 1 || nonlinearMaxIters < 1) throw InvalidArgument("iteration counts must be >= 1");
  if (!(convergenceTol > 0.0)) throw InvalidArgument("convergenceTol must be positive");
}

double landmarkEnergy(const ShapeModel& model, const LandmarkSet& landmarks, const Eigen::VectorXd& alpha,
                      const Pose& pose) {
  if (landmarks.empty()) throw InvalidArgument("landmarkEnergy: empty landmark set");
  if (alpha.size() != model.componentCount()) throw InvalidArgument("landmarkEnergy: alpha has wrong length");
  double sum = 0.0;
  for (const auto& e : landmarks.entries()) {
    if (e.vertex >= model.vertexCount()) throw InvalidArgument("landmarkEnergy: vertex out of range");
    sum += (e.point - sop(instantiateVertex(model, alpha, e.vertex), pose)).squaredNorm();
  }
  return sum / static_cast<double>(landmarks.size());
}

Eigen::Matrix3d rotationFromStackedRows(const Eigen::Matrix3d& M) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d U = svd.matrixU();
  Eigen::Matrix3d R = U * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    U.row(2) *= -1.0;
    R = U * svd.matrixV().transpose();
  }
  return R;
}

Pose estimatePosePOS(const std::vector<Eigen::Vector3d>& points3d,
                     const std::vector<Eigen::Vector2d>& points2d) {
  if (points3d.size() != points2d.size()) throw InvalidArgument("estimatePosePOS: size mismatch");
  const auto L = static_cast<Index>(points3d.size());
  if (L < 4) throw InvalidArgument("estimatePosePOS: at least 4 correspondences required");

  // A is block diagonal in [u v w 1], so it suffices to factor one block.
  Eigen::MatrixXd M(L, 4);
  Eigen::MatrixXd d(L, 2);
  for (Index i = 0; i < L; ++i) {
    M.row(i) << points3d[i].transpose(), 1.0;
    d.row(i) = points2d[i].transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv[3] > 1e-10 * sv[0])) {
    throw DegenerateError("estimatePosePOS: correspondences are coplanar or collinear");
  }
  const Eigen::MatrixXd k = svd.solve(d);  // columns: [r1; k4], [r2; k8]
  const Eigen::Vector3d r1 = k.col(0).head<3>();
  const Eigen::Vector3d r2 = k.col(1).head<3>();
  const double s = 0.5 * (r1.norm() + r2.norm());
  if (!(s > 0.0) || !std::isfinite(s)) throw DegenerateError("estimatePosePOS: zero scale");

  Eigen::Matrix3d stacked;
  stacked.row(0) = r1.transpose();
  stacked.row(1) = r2.transpose();
  stacked.row(2) = r1.cross(r2).transpose();
  Pose pose;
  pose.R = rotationFromStackedRows(stacked);
  pose.s = s;
  pose.t = Eigen::Vector2d(k(3, 0) / s, k(3, 1) / s);
  return pose;
}

Eigen::VectorXd estimateShapeLLS(const ShapeModel& model, const std::vector<std::uint32_t>& vertices,
                                 const std::vector<Eigen::Vector2d>& points, const Pose& pose,
                                 double hyperboxK) {
  if (vertices.empty()) throw InvalidArgument("estimateShapeLLS: no landmarks");
  if (vertices.size() != points.size()) throw InvalidArgument("estimateShapeLLS: size mismatch");
  if (!(hyperboxK > 0.0)) throw InvalidArgument("estimateShapeLLS: hyperboxK must be positive");
  checkVertices(model, vertices);
  const Index S = model.componentCount();
  const auto L = static_cast<Index>(vertices.size());
  const Eigen::VectorXd sigma = model.stdDevs();
  const Eigen::Matrix<double, 2, 3> R2 = pose.R.topRows<2>();

  Eigen::MatrixXd C(2 * L, S);
  Eigen::VectorXd h(2 * L);
  for (Index i = 0; i < L; ++i) {
    const auto [Pi, fi] = vertexSubmatrix(model, vertices[i]);
    C.middleRows<2>(2 * i).noalias() = pose.s * R2 * Pi;
    h.segment<2>(2 * i) = points[i] - pose.s * (R2 * fi + pose.t);
  }
  // Solve in standardised coordinates so the box is the same for every component.
  const Eigen::MatrixXd Cb = C * sigma.asDiagonal();
  const Eigen::VectorXd bound = Eigen::VectorXd::Constant(S, hyperboxK);
  const BvlsResult sol = solveBvls(Cb, h, -bound, bound);
  const Eigen::VectorXd limit = hyperboxK * sigma;
  return sigma.cwiseProduct(sol.x).cwiseMax(-limit).cwiseMin(limit);
}

Eigen::VectorXd estimateShapeLLS(const ShapeModel& model, const LandmarkSet& landmarks, const Pose& pose,
                                 double hyperboxK) {
  return estimateShapeLLS(model, landmarks.vertices(), landmarks.points(), pose, hyperboxK);
}

FitResult fitCorrespondences(const ShapeModel& model, const std::vector<std::uint32_t>& vertices,
                             const std::vector<Eigen::Vector2d>& points, const FitParams* initial,
                             const FitOptions& options) {
  options.validate();
  if (vertices.size() != points.size()) throw InvalidArgument("fitCorrespondences: size mismatch");
  if (vertices.size() < 4) throw InvalidArgument("fitCorrespondences: at least 4 landmarks required");
  checkVertices(model, vertices);

  FitResult result;
  result.method = "landmarks";
  FitParams params;
  if (initial) {
    params = *initial;
  } else {
    std::vector<Eigen::Vector3d> mean;
    mean.reserve(vertices.size());
    for (auto v : vertices) mean.push_back(model.meanShape().segment<3>(3 * static_cast<Index>(v)));
    params.pose = estimatePosePOS(mean, points);
    params.alpha = Eigen::VectorXd::Zero(model.componentCount());
  }

  Objective obj(model);
  obj.setLandmarks(vertices, points, 1.0);
  Eigen::VectorXd x = packParams(model, params);
  double energy = obj.energy(x);
  result.record(initial ? "initial" : "pos", energy);

  const TrustRegionOptions tr = trustRegion(options);
  auto acceptIfBetter = [&](const Eigen::VectorXd& candidate) {
    const Eigen::VectorXd c = canonical(model, candidate);
    const double e = obj.energy(c);
    if (e <= energy) {
      x = c;
      energy = e;
    }
  };
  Eigen::VectorXd lo, hi;
  for (int it = 0; it < options.alternationIters; ++it) {
    obj.bounds(x, options.hyperboxK, true, lo, hi);
    acceptIfBetter(minimizeBoxedLeastSquares(obj.residuals(), x, lo, hi, tr).x);
    FitParams cur = unpackParams(model, x);
    cur.alpha = estimateShapeLLS(model, vertices, points, cur.pose, options.hyperboxK);
    acceptIfBetter(packParams(model, cur));
    result.record("alternation." + std::to_string(it + 1), energy);
  }

  obj.bounds(x, options.hyperboxK, false, lo, hi);
  acceptIfBetter(minimizeBoxedLeastSquares(obj.residuals(), x, lo, hi, tr).x);
  result.record("nonlinear", energy);

  const FitParams out = unpackParams(model, x);
  const Eigen::VectorXd limit = options.hyperboxK * model.stdDevs();
  result.alpha = out.alpha.cwiseMax(-limit).cwiseMin(limit);
  result.pose = out.pose;
  return result;
}

FitResult fitLandmarks(const ShapeModel& model, const LandmarkSet& landmarks, const FitOptions& options) {
  return fitCorrespondences(model, landmarks.vertices(), landmarks.points(), nullptr, options);
}

}  // namespace edgefit
