#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace edgefit {

using Index = Eigen::Index;
using Triangle = std::array<std::uint32_t, 3>;

/// Mesh connectivity shared between a model and all meshes instantiated from it.
///
/// Vertex indices are zero-based. Triangles wind counter-clockwise when seen
/// from outside, so (b - a) x (c - a) is the outward normal.
class Topology {
 public:
  struct Edge {
    std::uint32_t a, b;  // a < b
    std::int32_t face0;
    std::int32_t face1;  // -1 on a mesh boundary
    bool onBoundary() const { return face1 < 0; }
  };

  /// Builds edge adjacency. Throws TopologyError when an edge is shared by
  /// more than two triangles, InvalidArgument on out-of-range indices.
  static std::shared_ptr<const Topology> build(std::vector<Triangle> triangles,
                                               std::size_t vertexCount);

  std::size_t vertexCount() const { return vertexCount_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Edge>& edges() const { return edges_; }
  /// Triangles incident to vertex `v`.
  const std::vector<std::uint32_t>& facesOf(std::size_t v) const { return vertexFaces_[v]; }
  bool isClosed() const;

 private:
  Topology() = default;
  std::size_t vertexCount_ = 0;
  std::vector<Triangle> triangles_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::uint32_t>> vertexFaces_;
};

/// A mesh instance: stacked coordinates [u1 v1 w1 ... uN vN wN] plus shared topology.
struct Mesh {
  Eigen::VectorXd vertices;
  std::shared_ptr<const Topology> topology;

  std::size_t vertexCount() const { return static_cast<std::size_t>(vertices.size() / 3); }
  Eigen::Vector3d vertex(std::size_t i) const {
    return vertices.segment<3>(3 * static_cast<Index>(i));
  }
};

struct ShapeCoefficients {
  Eigen::VectorXd alpha;
};

/// Linear PCA shape model f(alpha) = P alpha + fbar.
///
/// Components are unit-norm directions; the per-component variances are kept
/// separately and only enter the prior and the hyperbox constraint. Immutable
/// after construction.
class ShapeModel {
 public:
  ShapeModel() = default;

  /// Validates every invariant and throws ParseError naming the bad field.
  ShapeModel(Eigen::VectorXd meanShape, Eigen::MatrixXd components, Eigen::VectorXd variances,
             std::vector<Triangle> triangles);

  std::size_t vertexCount() const { return static_cast<std::size_t>(mean_.size() / 3); }
  Index componentCount() const { return components_.cols(); }

  const Eigen::VectorXd& meanShape() const { return mean_; }
  const Eigen::MatrixXd& components() const { return components_; }
  const Eigen::VectorXd& variances() const { return variances_; }
  const std::shared_ptr<const Topology>& topology() const { return topology_; }
  const std::vector<Triangle>& triangles() const { return topology_->triangles(); }

  /// sqrt(lambda_i) per component.
  Eigen::VectorXd stdDevs() const { return variances_.cwiseSqrt(); }

  Mesh meanMesh() const { return Mesh{mean_, topology_}; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd components_;
  Eigen::VectorXd variances_;
  std::shared_ptr<const Topology> topology_;
};

Mesh instantiate(const ShapeModel& model, const ShapeCoefficients& coeffs);

/// Rows 3i..3i+2 of the components and mean shape (zero-based vertex index).
std::pair<Eigen::Matrix<double, 3, Eigen::Dynamic>, Eigen::Vector3d> vertexSubmatrix(
    const ShapeModel& model, std::size_t vertex);

/// Single vertex of f(alpha) without instantiating the whole mesh.
Eigen::Vector3d instantiateVertex(const ShapeModel& model, const Eigen::VectorXd& alpha,
                                  std::size_t vertex);

/// Binary "E3DM" container (little-endian). Files ending in ".json" use the
/// JSON sidecar layout instead.
ShapeModel loadModel(const std::filesystem::path& path);
void saveModel(const ShapeModel& model, const std::filesystem::path& path);

ShapeModel loadModelJson(const std::filesystem::path& path);
void saveModelJson(const ShapeModel& model, const std::filesystem::path& path);

/// Wavefront OBJ with one-based face indices.
void writeObj(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace edgefit
