#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace edgefit {

/// Static 2D kd-tree with exact nearest-neighbour queries.
///
/// Ties in distance resolve to the smallest point index, which makes the
/// result identical to an exhaustive scan with the same tie rule.
class KdTree2 {
 public:
  struct Hit {
    std::size_t index = 0;
    double squaredDistance = 0.0;
  };

  KdTree2() = default;
  explicit KdTree2(std::vector<Eigen::Vector2d> points);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<Eigen::Vector2d>& points() const { return points_; }

  /// Precondition: non-empty.
  Hit nearest(const Eigen::Vector2d& query) const;

 private:
  struct Node {
    std::uint32_t point;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t axis = 0;
  };

  std::int32_t build(std::vector<std::uint32_t>& perm, std::size_t lo, std::size_t hi);
  void search(std::int32_t node, const Eigen::Vector2d& q, Hit& best) const;

  std::vector<Eigen::Vector2d> points_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

}  // namespace edgefit
