#pragma once

#include <vector>

#include <Eigen/Core>

#include "edgefit/image.hpp"
#include "edgefit/kdtree.hpp"

namespace edgefit {

struct EdgePixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const EdgePixel&, const EdgePixel&) = default;
};

/// Set of edge pixels with a nearest-neighbour index. Pixels are kept in
/// row-major order (y, then x); duplicates are removed.
class EdgeSet {
 public:
  EdgeSet() = default;
  EdgeSet(ImageSize size, std::vector<EdgePixel> pixels);
  static EdgeSet fromBinary(const BinaryImage& mask);

  ImageSize imageSize() const { return size_; }
  const std::vector<EdgePixel>& pixels() const { return pixels_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }
  BinaryImage toBinary() const;

  const KdTree2& index() const { return index_; }

 private:
  ImageSize size_;
  std::vector<EdgePixel> pixels_;
  KdTree2 index_;
};

struct NearestEdge {
  EdgePixel pixel;
  double distance = 0.0;
};

struct CannyParams {
  double lowThresh = 0.05;
  double highThresh = 0.15;
  double sigma = 1.4;
};

/// Canny detector: Gaussian blur, Sobel gradients normalised by the image's
/// maximum magnitude, 4-bin non-maximum suppression, hysteresis.
EdgeSet cannyEdges(const GrayImage& img, double lowThresh, double highThresh, double sigma);
inline EdgeSet cannyEdges(const GrayImage& img, const CannyParams& p = {}) {
  return cannyEdges(img, p.lowThresh, p.highThresh, p.sigma);
}

/// Gradient-magnitude thresholding with non-maximum suppression (no hysteresis).
BinaryImage gradientNmsEdges(const GrayImage& img, double thresh, double sigma);

/// Throws NoEdgesError on an empty set. Equal distances resolve to the first
/// pixel in row-major order.
NearestEdge nearestEdge(const EdgeSet& edges, const Eigen::Vector2d& p);

/// Exact Euclidean distance to the nearest non-zero pixel; +inf when the
/// mask has no edge pixel at all.
Image<double> distanceTransform(const BinaryImage& edgeMask);

GrayImage gaussianBlur(const GrayImage& img, double sigma);
/// Area-averaging resample by `factor` (< 1 shrinks).
GrayImage resampleArea(const GrayImage& img, double factor);

/// Per-(threshold, scale) distance fields at working resolution, in
/// working-resolution pixels.
struct DistanceStack {
  ImageSize size;
  std::vector<Image<double>> fields;
};

DistanceStack buildDistanceStack(const GrayImage& img, const std::vector<double>& thresholds,
                                 const std::vector<double>& scales, double sigma = 1.4);

/// S(x, y) = mean_i D_i / (D_i + kappa), values in [0, 1).
struct EdgeCostSurface {
  Image<double> S;
  int n = 0;
  double kappa = 0.0;
};

EdgeCostSurface composeCostSurface(const DistanceStack& stack, double kappa);
EdgeCostSurface buildCostSurface(const GrayImage& img, const std::vector<double>& thresholds,
                                 const std::vector<double>& scales, double kappa);

/// Bilinear interpolation with coordinates clamped to the grid.
double sampleBilinear(const EdgeCostSurface& surface, const Eigen::Vector2d& p);
double sampleBilinear(const Image<double>& grid, const Eigen::Vector2d& p);
/// Value and spatial gradient; the gradient component is zero along any axis
/// where p was clamped.
double sampleBilinearWithGradient(const Image<double>& grid, const Eigen::Vector2d& p,
                                  Eigen::Vector2d& gradient);

}  // namespace edgefit
