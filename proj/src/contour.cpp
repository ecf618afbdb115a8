#include "edgefit/contour.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "edgefit/errors.hpp"

namespace edgefit {

namespace {

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Owner of pixel centres lying exactly on edge a->b.
bool isTopLeft(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = b - a;
  return d.y() < 0.0 || (d.y() == 0.0 && d.x() > 0.0);
}

void rasterizeInto(const std::vector<Eigen::Vector3d>& cam, const Topology& topo, const Pose& pose,
                   Raster& out) {
  const int w = out.depth.depth.width(), h = out.depth.depth.height();
  auto project = [&](std::uint32_t v) {
    return Eigen::Vector2d(pose.s * (cam[v].x() + pose.t.x()), pose.s * (cam[v].y() + pose.t.y()));
  };
  const auto& tris = topo.triangles();
  for (std::size_t f = 0; f < tris.size(); ++f) {
    Eigen::Vector2d p0 = project(tris[f][0]), p1 = project(tris[f][1]), p2 = project(tris[f][2]);
    double z0 = cam[tris[f][0]].z(), z1 = cam[tris[f][1]].z(), z2 = cam[tris[f][2]].z();
    double area = cross2(p1 - p0, p2 - p0);
    if (!(std::abs(area) > 1e-12)) continue;
    if (area < 0.0) {
      std::swap(p1, p2);
      std::swap(z1, z2);
      area = -area;
    }
    const int xmin = std::max(0, static_cast<int>(std::ceil(std::min({p0.x(), p1.x(), p2.x()}))));
    const int xmax = std::min(w - 1, static_cast<int>(std::floor(std::max({p0.x(), p1.x(), p2.x()}))));
    const int ymin = std::max(0, static_cast<int>(std::ceil(std::min({p0.y(), p1.y(), p2.y()}))));
    const int ymax = std::min(h - 1, static_cast<int>(std::floor(std::max({p0.y(), p1.y(), p2.y()}))));
    const bool tl01 = isTopLeft(p0, p1), tl12 = isTopLeft(p1, p2), tl20 = isTopLeft(p2, p0);
    for (int y = ymin; y <= ymax; ++y) {
      for (int x = xmin; x <= xmax; ++x) {
        const Eigen::Vector2d p(x, y);
        const double e01 = cross2(p1 - p0, p - p0);
        const double e12 = cross2(p2 - p1, p - p1);
        const double e20 = cross2(p0 - p2, p - p2);
        if (e01 < 0.0 || e12 < 0.0 || e20 < 0.0) continue;
        if ((e01 == 0.0 && !tl01) || (e12 == 0.0 && !tl12) || (e20 == 0.0 && !tl20)) continue;
        const double z = (e12 * z0 + e20 * z1 + e01 * z2) / area;
        if (z < out.depth.depth(x, y)) {
          out.depth.depth(x, y) = z;
          out.triangle(x, y) = static_cast<std::int32_t>(f);
        }
      }
    }
  }
}

}  // namespace

std::vector<Eigen::Vector3d> cameraSpaceVertices(const Mesh& mesh, const Eigen::Matrix3d& R) {
  std::vector<Eigen::Vector3d> cam(mesh.vertexCount());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = R * mesh.vertex(i);
  return cam;
}

Raster rasterizeMesh(const Mesh& mesh, const Pose& pose, ImageSize size) {
  if (size.empty()) throw InvalidArgument("rasterizeDepth: image has zero area");
  if (!mesh.topology) throw InvalidArgument("rasterizeDepth: mesh has no topology");
  Raster out{DepthBuffer{Image<double>(size, DepthBuffer::kBackground)}, Image<std::int32_t>(size, -1)};
  rasterizeInto(cameraSpaceVertices(mesh, pose.R), *mesh.topology, pose, out);
  return out;
}

DepthBuffer rasterizeDepth(const Mesh& mesh, const Pose& pose, ImageSize size) {
  return rasterizeMesh(mesh, pose, size).depth;
}

double visibilitySlack(const Mesh& mesh) {
  if (mesh.vertexCount() == 0) return 0.0;
  Eigen::Vector3d mn = mesh.vertex(0), mx = mn;
  for (std::size_t i = 1; i < mesh.vertexCount(); ++i) {
    mn = mn.cwiseMin(mesh.vertex(i));
    mx = mx.cwiseMax(mesh.vertex(i));
  }
  return 1e-4 * (mx - mn).norm();
}

VisibilityTester::VisibilityTester(const Mesh& mesh, const Pose& pose, ImageSize size)
    : topology_(mesh.topology), pose_(pose), size_(size) {
  if (size.empty()) throw InvalidArgument("VisibilityTester: image has zero area");
  camera_ = cameraSpaceVertices(mesh, pose.R);
  raster_ = Raster{DepthBuffer{Image<double>(size, DepthBuffer::kBackground)}, Image<std::int32_t>(size, -1)};
  rasterizeInto(camera_, *topology_, pose_, raster_);
  slack_ = visibilitySlack(mesh);

  gridW_ = (size.width + cell_ - 1) / cell_;
  gridH_ = (size.height + cell_ - 1) / cell_;
  buckets_.assign(static_cast<std::size_t>(gridW_) * gridH_, {});
  const auto& tris = topology_->triangles();
  for (std::size_t f = 0; f < tris.size(); ++f) {
    Eigen::Vector2d mn = projected(tris[f][0]), mx = mn;
    for (int k = 1; k < 3; ++k) {
      mn = mn.cwiseMin(projected(tris[f][k]));
      mx = mx.cwiseMax(projected(tris[f][k]));
    }
    const int cx0 = std::max(0, static_cast<int>(std::floor(mn.x() / cell_)));
    const int cy0 = std::max(0, static_cast<int>(std::floor(mn.y() / cell_)));
    const int cx1 = std::min(gridW_ - 1, static_cast<int>(std::floor(mx.x() / cell_)));
    const int cy1 = std::min(gridH_ - 1, static_cast<int>(std::floor(mx.y() / cell_)));
    for (int cy = cy0; cy <= cy1; ++cy) {
      for (int cx = cx0; cx <= cx1; ++cx) {
        buckets_[static_cast<std::size_t>(cy) * gridW_ + cx].push_back(static_cast<std::uint32_t>(f));
      }
    }
  }
}

Eigen::Vector2d VisibilityTester::projected(std::size_t vertex) const {
  const auto& c = camera_[vertex];
  return {pose_.s * (c.x() + pose_.t.x()), pose_.s * (c.y() + pose_.t.y())};
}

bool VisibilityTester::visible(std::size_t vertex) const {
  const Eigen::Vector2d p = projected(vertex);
  const double z = camera_[vertex].z();
  const int px = static_cast<int>(std::lround(p.x())), py = static_cast<int>(std::lround(p.y()));
  if (!raster_.depth.depth.contains(px, py)) return true;  // off-image: nothing can be in front
  const double buffered = raster_.depth.depth(px, py);
  if (z <= buffered + slack_) return true;

  const int cx = std::clamp(static_cast<int>(std::floor(p.x() / cell_)), 0, gridW_ - 1);
  const int cy = std::clamp(static_cast<int>(std::floor(p.y() / cell_)), 0, gridH_ - 1);
  const auto& ring = topology_->facesOf(vertex);
  const auto& tris = topology_->triangles();
  for (std::uint32_t f : buckets_[static_cast<std::size_t>(cy) * gridW_ + cx]) {
    if (std::find(ring.begin(), ring.end(), f) != ring.end()) continue;
    const Eigen::Vector2d a = projected(tris[f][0]), b = projected(tris[f][1]), c = projected(tris[f][2]);
    double area = cross2(b - a, c - a);
    if (!(std::abs(area) > 1e-12)) continue;
    double e0 = cross2(c - b, p - b), e1 = cross2(a - c, p - c), e2 = cross2(b - a, p - a);
    if (area < 0.0) {
      area = -area;
      e0 = -e0;
      e1 = -e1;
      e2 = -e2;
    }
    if (e0 <= 0.0 || e1 <= 0.0 || e2 <= 0.0) continue;
    const double zf =
        (e0 * camera_[tris[f][0]].z() + e1 * camera_[tris[f][1]].z() + e2 * camera_[tris[f][2]].z()) / area;
    if (zf < z - slack_) return false;
  }
  return true;
}

bool VisibilityTester::onSilhouette(std::size_t vertex) const {
  const Eigen::Vector2d p = projected(vertex);
  const int px = static_cast<int>(std::lround(p.x())), py = static_cast<int>(std::lround(p.y()));
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (!raster_.depth.depth.contains(px + dx, py + dy)) return true;
      if (raster_.depth.isBackground(px + dx, py + dy)) return true;
    }
  }
  return false;
}

std::vector<std::uint32_t> contourEdgeVertices(const Mesh& mesh, const Eigen::Matrix3d& R) {
  if (!mesh.topology) throw InvalidArgument("occludingBoundary: mesh has no topology");
  const auto& topo = *mesh.topology;
  const auto& tris = topo.triangles();
  const Eigen::RowVector3d viewRow = R.row(2);
  std::vector<char> positive(tris.size());
  for (std::size_t f = 0; f < tris.size(); ++f) {
    const Eigen::Vector3d a = mesh.vertex(tris[f][0]);
    const Eigen::Vector3d n = (mesh.vertex(tris[f][1]) - a).cross(mesh.vertex(tris[f][2]) - a);
    positive[f] = viewRow.dot(n) > 0.0;
  }
  std::vector<char> mark(mesh.vertexCount(), 0);
  for (const auto& e : topo.edges()) {
    if (e.onBoundary()) continue;
    if (positive[e.face0] != positive[e.face1]) {
      mark[e.a] = 1;
      mark[e.b] = 1;
    }
  }
  std::vector<std::uint32_t> out;
  for (std::size_t v = 0; v < mark.size(); ++v) {
    if (mark[v]) out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

BoundaryVertexSet occludingBoundary(const Mesh& mesh, const Pose& pose, ImageSize size) {
  BoundaryVertexSet out;
  const auto candidates = contourEdgeVertices(mesh, pose.R);
  if (candidates.empty()) return out;
  const VisibilityTester vis(mesh, pose, size);
  out.candidates.reserve(candidates.size());
  for (auto v : candidates) {
    BoundaryStatus status = BoundaryStatus::Occluded;
    if (vis.visible(v)) status = vis.onSilhouette(v) ? BoundaryStatus::Silhouette : BoundaryStatus::Inner;
    out.candidates.push_back({v, status});
    if (status != BoundaryStatus::Occluded) out.indices.push_back(v);
  }
  return out;
}

}  // namespace edgefit
