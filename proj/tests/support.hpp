// Shared generators and brute-force reference implementations for the tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "edgefit/camera.hpp"
#include "edgefit/contour.hpp"
#include "edgefit/edgemap.hpp"
#include "edgefit/model.hpp"

namespace testsupport {

using namespace edgefit;

struct Gen {
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  std::mt19937_64 rng;

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
  Eigen::Vector3d vec3(double scale = 1.0) { return scale * Eigen::Vector3d(normal(), normal(), normal()); }
  Eigen::VectorXd vec(Eigen::Index n, double scale = 1.0) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * normal();
    return v;
  }
  Eigen::Matrix3d rotation() {
    Eigen::Quaterniond q(normal(), normal(), normal(), normal());
    return q.normalized().toRotationMatrix();
  }
  Pose pose(double sLo = 0.5, double sHi = 3.0) {
    Pose p;
    p.R = rotation();
    p.t = Eigen::Vector2d(uniform(-50, 50), uniform(-50, 50));
    p.s = uniform(sLo, sHi);
    return p;
  }
};

/// Icosahedron refined `levels` times and projected to a sphere of `radius`.
inline std::pair<std::vector<Eigen::Vector3d>, std::vector<Triangle>> icosphere(int levels, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                    {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                             {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int l = 0; l < levels; ++l) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back(0.5 * (v[a] + v[b]));
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    for (const auto& tri : f) {
      const auto a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (auto& p : v) p = radius * p.normalized();
  return {v, f};
}

inline Mesh meshFrom(const std::vector<Eigen::Vector3d>& verts, const std::vector<Triangle>& tris) {
  Mesh m;
  m.vertices.resize(3 * static_cast<Eigen::Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) m.vertices.segment<3>(3 * static_cast<Eigen::Index>(i)) = verts[i];
  m.topology = Topology::build(tris, verts.size());
  return m;
}

/// Random model over the given topology: orthonormal components, decreasing variances.
inline ShapeModel randomModel(Gen& g, const std::vector<Eigen::Vector3d>& verts, const std::vector<Triangle>& tris,
                              Eigen::Index S) {
  const auto n = static_cast<Eigen::Index>(verts.size());
  Eigen::VectorXd mean(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) mean.segment<3>(3 * i) = verts[static_cast<std::size_t>(i)];
  Eigen::MatrixXd raw(3 * n, S);
  for (Eigen::Index c = 0; c < S; ++c) raw.col(c) = g.vec(3 * n);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd P = qr.householderQ() * Eigen::MatrixXd::Identity(3 * n, S);
  Eigen::VectorXd var(S);
  double v = g.uniform(50.0, 100.0);
  for (Eigen::Index c = 0; c < S; ++c) {
    var[c] = v;
    v *= g.uniform(0.5, 0.95);
  }
  return ShapeModel(mean, P, var, tris);
}

/// Random point cloud model with disjoint triangles; for the landmark tests
/// where only vertex positions matter.
inline ShapeModel toyModel(Gen& g, std::size_t N, Eigen::Index S) {
  std::vector<Eigen::Vector3d> verts(N);
  for (auto& v : verts) v = Eigen::Vector3d(g.uniform(-50, 50), g.uniform(-60, 60), g.uniform(-40, 40));
  std::vector<Triangle> tris;
  for (std::uint32_t k = 0; 3 * k + 2 < N; ++k) tris.push_back({3 * k, 3 * k + 1, 3 * k + 2});
  return randomModel(g, verts, tris, S);
}

/// Exact projections of the given vertices of f(alpha).
inline std::vector<Eigen::Vector2d> projectVertices(const ShapeModel& model, const Eigen::VectorXd& alpha,
                                                    const Pose& pose, const std::vector<std::uint32_t>& ids) {
  const Eigen::VectorXd shape = model.meanShape() + model.components() * alpha;
  std::vector<Eigen::Vector2d> out;
  for (auto id : ids) out.push_back(sop(shape.segment<3>(3 * id), pose));
  return out;
}

/// Tetrahedron with 4 vertices and 2 components.
inline ShapeModel tetraModel() {
  Eigen::VectorXd mean(12);
  mean << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(12, 2);
  P(0, 0) = 1.0;
  P(5, 1) = 0.6;
  P(11, 1) = 0.8;
  Eigen::VectorXd var(2);
  var << 4.0, 1.0;
  return ShapeModel(mean, P, var, {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}});
}

// ---------------------------------------------------------------------------
// Brute-force references

// Accelerated projected gradient on 0.5 |Ax - b|^2, run far past convergence.
inline Eigen::VectorXd projectedGradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& lo,
                                  const Eigen::VectorXd& hi, int iters) {
  const Eigen::MatrixXd H = A.transpose() * A;
  const Eigen::VectorXd g0 = A.transpose() * b;
  const double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(A.cols()).cwiseMax(lo).cwiseMin(hi);
  Eigen::VectorXd y = x;
  double t = 1.0;
  for (int k = 0; k < iters; ++k) {
    const Eigen::VectorXd next = (y - (H * y - g0) / L).cwiseMax(lo).cwiseMin(hi);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / tn) * (next - x);
    x = next;
    t = tn;
  }
  return x;
}


inline NearestEdge bruteNearest(const std::vector<EdgePixel>& pixels, const Eigen::Vector2d& p) {
  // Pixels are scanned in row-major order; ties keep the first.
  std::vector<EdgePixel> sorted = pixels;
  std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  NearestEdge best{sorted.front(), std::numeric_limits<double>::infinity()};
  double bestD2 = std::numeric_limits<double>::infinity();
  for (const auto& e : sorted) {
    const double dx = e.x - p.x(), dy = e.y - p.y();
    const double d2 = dx * dx + dy * dy;
    if (d2 < bestD2) {
      bestD2 = d2;
      best = {e, std::sqrt(d2)};
    }
  }
  return best;
}

inline Image<double> bruteDistance(const BinaryImage& mask) {
  Image<double> out(mask.size(), std::numeric_limits<double>::infinity());
  std::vector<std::pair<int, int>> sites;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) sites.emplace_back(x, y);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      double best = std::numeric_limits<double>::infinity();
      for (auto [sx, sy] : sites) best = std::min(best, double((sx - x) * (sx - x) + (sy - y) * (sy - y)));
      out(x, y) = std::sqrt(best);
    }
  }
  return out;
}

/// Pixel-centre coverage by barycentric tests with the same top-left rule, depth by plane interpolation.
inline Image<double> bruteDepth(const Mesh& mesh, const Pose& pose, ImageSize size) {
  Image<double> out(size, std::numeric_limits<double>::infinity());
  const auto& tris = mesh.topology->triangles();
  auto cross = [](Eigen::Vector2d a, Eigen::Vector2d b) { return a.x() * b.y() - a.y() * b.x(); };
  auto owns = [](Eigen::Vector2d a, Eigen::Vector2d b) {
    const Eigen::Vector2d d = b - a;
    return d.y() < 0.0 || (d.y() == 0.0 && d.x() > 0.0);
  };
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      const Eigen::Vector2d p(x, y);
      for (const auto& t : tris) {
        Eigen::Vector2d q[3];
        double z[3];
        for (int k = 0; k < 3; ++k) {
          const Eigen::Vector3d c = pose.R * mesh.vertex(t[k]);
          q[k] = pose.s * (c.head<2>() + pose.t);
          z[k] = c.z();
        }
        double area = cross(q[1] - q[0], q[2] - q[0]);
        if (!(std::abs(area) > 1e-12)) continue;
        if (area < 0) {
          std::swap(q[1], q[2]);
          std::swap(z[1], z[2]);
          area = -area;
        }
        const double e01 = cross(q[1] - q[0], p - q[0]);
        const double e12 = cross(q[2] - q[1], p - q[1]);
        const double e20 = cross(q[0] - q[2], p - q[2]);
        if (e01 < 0 || e12 < 0 || e20 < 0) continue;
        if ((e01 == 0 && !owns(q[0], q[1])) || (e12 == 0 && !owns(q[1], q[2])) || (e20 == 0 && !owns(q[2], q[0])))
          continue;
        out(x, y) = std::min(out(x, y), (e12 * z[0] + e20 * z[1] + e01 * z[2]) / area);
      }
    }
  }
  return out;
}

/// Contour-edge endpoints found by comparing every pair of triangles.
inline std::vector<std::uint32_t> bruteContourVertices(const Mesh& mesh, const Eigen::Matrix3d& R) {
  const auto& tris = mesh.topology->triangles();
  std::vector<double> nz(tris.size());
  for (std::size_t f = 0; f < tris.size(); ++f) {
    const Eigen::Vector3d a = R * mesh.vertex(tris[f][0]);
    const Eigen::Vector3d b = R * mesh.vertex(tris[f][1]);
    const Eigen::Vector3d c = R * mesh.vertex(tris[f][2]);
    nz[f] = (b - a).cross(c - a).z();
  }
  std::vector<char> mark(mesh.vertexCount(), 0);
  for (std::size_t f = 0; f < tris.size(); ++f) {
    for (std::size_t g = f + 1; g < tris.size(); ++g) {
      std::vector<std::uint32_t> shared;
      for (auto a : tris[f])
        for (auto b : tris[g])
          if (a == b) shared.push_back(a);
      if (shared.size() != 2) continue;
      if ((nz[f] > 0) != (nz[g] > 0)) {
        mark[shared[0]] = 1;
        mark[shared[1]] = 1;
      }
    }
  }
  std::vector<std::uint32_t> out;
  for (std::size_t v = 0; v < mark.size(); ++v)
    if (mark[v]) out.push_back(static_cast<std::uint32_t>(v));
  return out;
}

/// Vertex visibility by exhaustive search: accepted when its depth is within
/// `slack` of the brute-force depth buffer at its pixel, otherwise rejected
/// when any triangle outside its one-ring strictly covers the exact projected
/// position in front of it.
inline bool bruteVisible(const Mesh& mesh, const Pose& pose, const Image<double>& depth, double slack,
                         std::uint32_t v) {
  const Eigen::Vector3d c = pose.R * mesh.vertex(v);
  const Eigen::Vector2d p = pose.s * (c.head<2>() + pose.t);
  const int px = static_cast<int>(std::lround(p.x())), py = static_cast<int>(std::lround(p.y()));
  if (!depth.contains(px, py)) return true;
  if (c.z() <= depth(px, py) + slack) return true;
  auto cross = [](Eigen::Vector2d a, Eigen::Vector2d b) { return a.x() * b.y() - a.y() * b.x(); };
  for (const auto& t : mesh.topology->triangles()) {
    if (t[0] == v || t[1] == v || t[2] == v) continue;
    Eigen::Vector2d q[3];
    double z[3];
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d w = pose.R * mesh.vertex(t[k]);
      q[k] = pose.s * (w.head<2>() + pose.t);
      z[k] = w.z();
    }
    double area = cross(q[1] - q[0], q[2] - q[0]);
    if (!(std::abs(area) > 1e-12)) continue;
    const double sign = area < 0 ? -1.0 : 1.0;
    area *= sign;
    const double e0 = sign * cross(q[2] - q[1], p - q[1]);
    const double e1 = sign * cross(q[0] - q[2], p - q[2]);
    const double e2 = sign * cross(q[1] - q[0], p - q[0]);
    if (e0 <= 0 || e1 <= 0 || e2 <= 0) continue;
    if ((e0 * z[0] + e1 * z[1] + e2 * z[2]) / area < c.z() - slack) return false;
  }
  return true;
}

/// Visible contour-edge endpoints, ascending.
inline std::vector<std::uint32_t> bruteBoundary(const Mesh& mesh, const Pose& pose, ImageSize size) {
  const Image<double> depth = bruteDepth(mesh, pose, size);
  Eigen::Vector3d lo = mesh.vertex(0), hi = lo;
  for (std::size_t i = 1; i < mesh.vertexCount(); ++i) {
    lo = lo.cwiseMin(mesh.vertex(i));
    hi = hi.cwiseMax(mesh.vertex(i));
  }
  const double slack = 1e-4 * (hi - lo).norm();
  std::vector<std::uint32_t> out;
  for (auto v : bruteContourVertices(mesh, pose.R))
    if (bruteVisible(mesh, pose, depth, slack, v)) out.push_back(v);
  return out;
}

/// Icosphere with smooth random radial bumps, so that it self-occludes.
inline Mesh bumpySphere(Gen& g, int levels, double radius, int bumps, double amplitude) {
  auto [verts, tris] = icosphere(levels, 1.0);
  std::vector<std::pair<Eigen::Vector3d, double>> centres;
  for (int b = 0; b < bumps; ++b) centres.emplace_back(g.vec3().normalized(), g.uniform(-amplitude, amplitude));
  for (auto& v : verts) {
    double r = radius;
    for (const auto& [c, h] : centres) r += h * radius * std::exp(-(v - c).squaredNorm() / 0.08);
    v *= r;
  }
  return meshFrom(verts, tris);
}

/// Pose with a random rotation whose projection fits inside `size` with a margin.
inline Pose framingPose(Gen& g, const Mesh& mesh, ImageSize size) {
  Pose p;
  p.R = g.rotation();
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(1e300), hi = -lo;
  for (std::size_t i = 0; i < mesh.vertexCount(); ++i) {
    const Eigen::Vector2d q = (p.R * mesh.vertex(i)).head<2>();
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  p.s = g.uniform(0.6, 0.9) * std::min(size.width / (hi.x() - lo.x()), size.height / (hi.y() - lo.y()));
  const Eigen::Vector2d centre(0.5 * (size.width - 1) + g.uniform(-2, 2), 0.5 * (size.height - 1) + g.uniform(-2, 2));
  p.t = centre / p.s - 0.5 * (lo + hi);
  return p;
}

}  // namespace testsupport
