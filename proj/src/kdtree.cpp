#include "edgefit/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace edgefit {

KdTree2::KdTree2(std::vector<Eigen::Vector2d> points) : points_(std::move(points)) {
  if (points_.empty()) return;
  std::vector<std::uint32_t> perm(points_.size());
  std::iota(perm.begin(), perm.end(), 0u);
  nodes_.reserve(points_.size());
  root_ = build(perm, 0, perm.size());
}

std::int32_t KdTree2::build(std::vector<std::uint32_t>& perm, std::size_t lo, std::size_t hi) {
  if (lo >= hi) return -1;
  Eigen::Vector2d mn = points_[perm[lo]], mx = mn;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    mn = mn.cwiseMin(points_[perm[i]]);
    mx = mx.cwiseMax(points_[perm[i]]);
  }
  const std::uint8_t axis = (mx.x() - mn.x() >= mx.y() - mn.y()) ? 0 : 1;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                   perm.begin() + static_cast<std::ptrdiff_t>(mid),
                   perm.begin() + static_cast<std::ptrdiff_t>(hi),
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = points_[a][axis], cb = points_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({perm[mid], -1, -1, axis});
  const std::int32_t left = build(perm, lo, mid);
  const std::int32_t right = build(perm, mid + 1, hi);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree2::search(std::int32_t node, const Eigen::Vector2d& q, Hit& best) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const double d2 = (points_[n.point] - q).squaredNorm();
  if (d2 < best.squaredDistance || (d2 == best.squaredDistance && n.point < best.index)) {
    best = {n.point, d2};
  }
  const double diff = q[n.axis] - points_[n.point][n.axis];
  search(diff < 0.0 ? n.left : n.right, q, best);
  // Points tied with the splitter on this axis may sit on either side, so
  // the far side is visited on equality too.
  if (diff * diff <= best.squaredDistance) search(diff < 0.0 ? n.right : n.left, q, best);
}

KdTree2::Hit KdTree2::nearest(const Eigen::Vector2d& query) const {
  Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  search(root_, query, best);
  return best;
}

}  // namespace edgefit
