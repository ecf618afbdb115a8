#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "edgefit/camera.hpp"
#include "edgefit/image.hpp"
#include "edgefit/model.hpp"

namespace edgefit {

/// Per-pixel nearest camera-space depth (model units, smaller is nearer).
struct DepthBuffer {
  static constexpr double kBackground = std::numeric_limits<double>::infinity();
  Image<double> depth;
  ImageSize size() const { return depth.size(); }
  bool isBackground(int x, int y) const { return depth(x, y) == kBackground; }
};

/// Depth buffer plus the index of the winning triangle (-1 for background).
struct Raster {
  DepthBuffer depth;
  Image<std::int32_t> triangle;
};

/// Orthographic rasterisation at scale s: a pixel is covered when its centre
/// lies inside the projected triangle (top-left rule on shared edges); the
/// minimum interpolated depth wins.
DepthBuffer rasterizeDepth(const Mesh& mesh, const Pose& pose, ImageSize size);
Raster rasterizeMesh(const Mesh& mesh, const Pose& pose, ImageSize size);

/// Camera-space vertex positions R v (no scale or translation).
std::vector<Eigen::Vector3d> cameraSpaceVertices(const Mesh& mesh, const Eigen::Matrix3d& R);

/// Visibility of individual mesh vertices under a pose.
///
/// A vertex is visible when it is not behind the depth buffer at its pixel by
/// more than the slack, or, failing that, when no triangle outside its own
/// one-ring covers its exact projected position in front of it. The second
/// test keeps vertices at grazing silhouettes from rejecting themselves.
class VisibilityTester {
 public:
  VisibilityTester(const Mesh& mesh, const Pose& pose, ImageSize size);

  bool visible(std::size_t vertex) const;
  /// True when a background pixel lies in the 3x3 neighbourhood of the vertex.
  bool onSilhouette(std::size_t vertex) const;

  const DepthBuffer& depthBuffer() const { return raster_.depth; }
  const Raster& raster() const { return raster_; }
  Eigen::Vector2d projected(std::size_t vertex) const;
  double depth(std::size_t vertex) const { return camera_[vertex].z(); }
  double slack() const { return slack_; }

 private:
  std::shared_ptr<const Topology> topology_;
  Pose pose_;
  ImageSize size_;
  std::vector<Eigen::Vector3d> camera_;
  Raster raster_;
  double slack_ = 0.0;
  int cell_ = 8;
  int gridW_ = 0, gridH_ = 0;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

enum class BoundaryStatus : std::uint8_t { Silhouette, Inner, Occluded };

struct BoundaryCandidate {
  std::uint32_t vertex;
  BoundaryStatus status;
};

/// Occluding-boundary vertices B: endpoints of mesh edges whose two adjacent
/// triangles' camera-space normals have z-components of opposite sign
/// (n_z = 0 counts as negative). Mesh-boundary edges are ignored and
/// occluded vertices are dropped. `indices` is sorted ascending.
struct BoundaryVertexSet {
  std::vector<std::uint32_t> indices;
  std::vector<BoundaryCandidate> candidates;  // every contour-edge endpoint
  bool empty() const { return indices.empty(); }
  std::size_t size() const { return indices.size(); }
};

BoundaryVertexSet occludingBoundary(const Mesh& mesh, const Pose& pose, ImageSize size);

/// Contour-edge endpoints before the visibility test, sorted ascending.
std::vector<std::uint32_t> contourEdgeVertices(const Mesh& mesh, const Eigen::Matrix3d& R);

/// Relative depth slack used by the visibility tests (1e-4 of the bounding-box diagonal).
double visibilitySlack(const Mesh& mesh);

}  // namespace edgefit
