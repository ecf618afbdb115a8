#include "edgefit/edgemap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace edgefit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void requireNonEmpty(const GrayImage& img, const char* who) {
  if (img.empty()) throw InvalidArgument(std::string(who) + ": empty image");
}

struct Gradient {
  Image<double> magnitude;  // normalised so the maximum is 1 (or all zero)
  Image<double> gx, gy;
};

Gradient sobelGradient(const GrayImage& img) {
  const int w = img.width(), h = img.height();
  Gradient g{Image<double>(w, h), Image<double>(w, h), Image<double>(w, h)};
  auto at = [&](int x, int y) {
    return img(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  double maxMag = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
      g.gx(x, y) = gx / 8.0;
      g.gy(x, y) = gy / 8.0;
      const double m = std::hypot(gx, gy) / 8.0;
      g.magnitude(x, y) = m;
      maxMag = std::max(maxMag, m);
    }
  }
  if (maxMag > 0.0) {
    for (double& m : g.magnitude.data()) m /= maxMag;
  }
  return g;
}

// Keeps local maxima of the magnitude along the quantised gradient direction.
// Ties: strictly greater than the backward neighbour, at least the forward one.
Image<double> nonMaximumSuppression(const Gradient& g) {
  const int w = g.magnitude.width(), h = g.magnitude.height();
  Image<double> out(w, h, 0.0);
  const double tan22 = std::tan(std::numbers::pi / 8.0);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double m = g.magnitude(x, y);
      if (m <= 0.0) continue;
      const double gx = g.gx(x, y), gy = g.gy(x, y);
      const double ax = std::abs(gx), ay = std::abs(gy);
      int dx, dy;
      if (ay <= tan22 * ax) {
        dx = 1; dy = 0;
      } else if (ax <= tan22 * ay) {
        dx = 0; dy = 1;
      } else if ((gx > 0) == (gy > 0)) {
        dx = 1; dy = 1;
      } else {
        dx = 1; dy = -1;
      }
      const double forward = g.magnitude(x + dx, y + dy);
      const double backward = g.magnitude(x - dx, y - dy);
      if (m > backward && m >= forward) out(x, y) = m;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

EdgeSet::EdgeSet(ImageSize size, std::vector<EdgePixel> pixels) : size_(size) {
  for (const auto& p : pixels) {
    if (p.x < 0 || p.y < 0 || p.x >= size.width || p.y >= size.height) {
      throw InvalidArgument("EdgeSet: pixel outside image bounds");
    }
  }
  std::sort(pixels.begin(), pixels.end(), [](const EdgePixel& a, const EdgePixel& b) {
    return a.y < b.y || (a.y == b.y && a.x < b.x);
  });
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  pixels_ = std::move(pixels);
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(pixels_.size());
  for (const auto& p : pixels_) pts.emplace_back(p.x, p.y);
  index_ = KdTree2(std::move(pts));
}

EdgeSet EdgeSet::fromBinary(const BinaryImage& mask) {
  std::vector<EdgePixel> px;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y)) px.push_back({x, y});
    }
  }
  return EdgeSet(mask.size(), std::move(px));
}

BinaryImage EdgeSet::toBinary() const {
  BinaryImage mask(size_, 0);
  for (const auto& p : pixels_) mask(p.x, p.y) = 1;
  return mask;
}

GrayImage gaussianBlur(const GrayImage& img, double sigma) {
  if (sigma <= 0.0) throw InvalidArgument("gaussianBlur: sigma must be positive");
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int w = img.width(), h = img.height();
  GrayImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * img(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = acc;
    }
  }
  return out;
}

EdgeSet cannyEdges(const GrayImage& img, double lowThresh, double highThresh, double sigma) {
  requireNonEmpty(img, "cannyEdges");
  if (!(0.0 <= lowThresh && lowThresh <= highThresh && highThresh <= 1.0)) {
    throw InvalidArgument("cannyEdges: thresholds must satisfy 0 <= low <= high <= 1");
  }
  if (!(sigma > 0.0)) throw InvalidArgument("cannyEdges: sigma must be positive");

  const Gradient g = sobelGradient(gaussianBlur(img, sigma));
  const Image<double> thin = nonMaximumSuppression(g);
  const int w = img.width(), h = img.height();

  BinaryImage mask(w, h, 0);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (thin(x, y) > 0.0 && thin(x, y) >= highThresh && !mask(x, y)) {
        mask(x, y) = 1;
        stack.emplace_back(x, y);
        while (!stack.empty()) {
          const auto [cx, cy] = stack.back();
          stack.pop_back();
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int nx = cx + dx, ny = cy + dy;
              if (!mask.contains(nx, ny) || mask(nx, ny)) continue;
              if (thin(nx, ny) > 0.0 && thin(nx, ny) >= lowThresh) {
                mask(nx, ny) = 1;
                stack.emplace_back(nx, ny);
              }
            }
          }
        }
      }
    }
  }
  return EdgeSet::fromBinary(mask);
}

BinaryImage gradientNmsEdges(const GrayImage& img, double thresh, double sigma) {
  requireNonEmpty(img, "gradientNmsEdges");
  const Image<double> thin = nonMaximumSuppression(sobelGradient(gaussianBlur(img, sigma)));
  BinaryImage mask(img.size(), 0);
  for (std::size_t i = 0; i < thin.data().size(); ++i) {
    mask.data()[i] = (thin.data()[i] > 0.0 && thin.data()[i] >= thresh) ? 1 : 0;
  }
  return mask;
}

NearestEdge nearestEdge(const EdgeSet& edges, const Eigen::Vector2d& p) {
  if (edges.empty()) throw NoEdgesError("nearestEdge: edge set is empty");
  const auto hit = edges.index().nearest(p);
  return {edges.pixels()[hit.index], std::sqrt(hit.squaredDistance)};
}

// ---------------------------------------------------------------------------
// Distance transform: exact squared EDT via lower envelopes of parabolas,
// columns then rows.

namespace {

void distance1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace

Image<double> distanceTransform(const BinaryImage& edgeMask) {
  const int w = edgeMask.width(), h = edgeMask.height();
  Image<double> sq(w, h);
  const int n = std::max(w, h);
  std::vector<double> f, d;
  std::vector<int> v(n + 1);
  std::vector<double> z(n + 2);

  f.resize(h);
  d.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = edgeMask(x, y) ? 0.0 : kInf;
    distance1d(f, d, v, z);
    for (int y = 0; y < h; ++y) sq(x, y) = d[y];
  }
  f.resize(w);
  d.resize(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = sq(x, y);
    distance1d(f, d, v, z);
    for (int x = 0; x < w; ++x) sq(x, y) = std::sqrt(d[x]);
  }
  return sq;
}

// ---------------------------------------------------------------------------

GrayImage resampleArea(const GrayImage& img, double factor) {
  requireNonEmpty(img, "resampleArea");
  if (!(factor > 0.0)) throw InvalidArgument("resampleArea: factor must be positive");
  if (factor == 1.0) return img;
  const int w = img.width(), h = img.height();
  const int ow = std::max(1, static_cast<int>(std::lround(w * factor)));
  const int oh = std::max(1, static_cast<int>(std::lround(h * factor)));

  // Output pixel o covers source interval [o / fx, (o + 1) / fx).
  auto weights = [](int outN, int inN) {
    const double ratio = static_cast<double>(inN) / outN;
    std::vector<std::vector<std::pair<int, double>>> taps(outN);
    for (int o = 0; o < outN; ++o) {
      const double a = o * ratio, b = (o + 1) * ratio;
      double total = 0.0;
      for (int i = static_cast<int>(std::floor(a)); i < static_cast<int>(std::ceil(b)); ++i) {
        const double overlap = std::min(b, i + 1.0) - std::max(a, double(i));
        if (overlap <= 0.0) continue;
        taps[o].emplace_back(std::clamp(i, 0, inN - 1), overlap);
        total += overlap;
      }
      for (auto& t : taps[o]) t.second /= total;
    }
    return taps;
  };
  const auto tx = weights(ow, w), ty = weights(oh, h);
  GrayImage tmp(ow, h), out(ow, oh);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (const auto& [i, wt] : tx[x]) acc += wt * img(i, y);
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (const auto& [i, wt] : ty[y]) acc += wt * tmp(x, i);
      out(x, y) = acc;
    }
  }
  return out;
}

namespace {

// Resamples a coarse distance field to `size` and converts distances from
// coarse pixels to working-resolution pixels.
Image<double> upsampleDistance(const Image<double>& coarse, ImageSize size) {
  if (coarse.size() == size) return coarse;
  const double rx = static_cast<double>(coarse.width()) / size.width;
  const double ry = static_cast<double>(coarse.height()) / size.height;
  const double toFine = 0.5 * (1.0 / rx + 1.0 / ry);
  if (!coarse.empty() && std::isinf(coarse.data()[0])) return Image<double>(size, kInf);
  Image<double> out(size);
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      const Eigen::Vector2d c((x + 0.5) * rx - 0.5, (y + 0.5) * ry - 0.5);
      out(x, y) = sampleBilinear(coarse, c) * toFine;
    }
  }
  return out;
}

}  // namespace

DistanceStack buildDistanceStack(const GrayImage& img, const std::vector<double>& thresholds,
                                 const std::vector<double>& scales, double sigma) {
  requireNonEmpty(img, "buildDistanceStack");
  if (thresholds.empty() || scales.empty()) {
    throw InvalidArgument("buildDistanceStack: thresholds and scales must be non-empty");
  }
  DistanceStack stack{img.size(), {}};
  for (double scale : scales) {
    if (!(scale > 0.0 && scale <= 1.0)) throw InvalidArgument("buildDistanceStack: scale must be in (0, 1]");
    const GrayImage level = resampleArea(img, scale);
    for (double t : thresholds) {
      const Image<double> d = distanceTransform(gradientNmsEdges(level, t, sigma));
      stack.fields.push_back(upsampleDistance(d, img.size()));
    }
  }
  return stack;
}

EdgeCostSurface composeCostSurface(const DistanceStack& stack, double kappa) {
  if (!(kappa > 0.0)) throw InvalidArgument("composeCostSurface: kappa must be positive");
  if (stack.fields.empty()) throw InvalidArgument("composeCostSurface: empty distance stack");
  EdgeCostSurface surface{Image<double>(stack.size, 0.0), static_cast<int>(stack.fields.size()), kappa};
  auto& s = surface.S.data();
  for (const auto& field : stack.fields) {
    const auto& d = field.data();
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] += std::isinf(d[i]) ? 1.0 : d[i] / (d[i] + kappa);
    }
  }
  const double inv = 1.0 / surface.n;
  for (double& v : s) v *= inv;
  return surface;
}

EdgeCostSurface buildCostSurface(const GrayImage& img, const std::vector<double>& thresholds,
                                 const std::vector<double>& scales, double kappa) {
  return composeCostSurface(buildDistanceStack(img, thresholds, scales), kappa);
}

double sampleBilinearWithGradient(const Image<double>& grid, const Eigen::Vector2d& p,
                                  Eigen::Vector2d& gradient) {
  const int w = grid.width(), h = grid.height();
  gradient.setZero();
  const double px = std::clamp(p.x(), 0.0, double(w - 1));
  const double py = std::clamp(p.y(), 0.0, double(h - 1));
  const bool clampedX = px != p.x();
  const bool clampedY = py != p.y();
  const int x0 = std::min(static_cast<int>(std::floor(px)), std::max(w - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(py)), std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = px - x0, fy = py - y0;
  const double s00 = grid(x0, y0), s10 = grid(x1, y0), s01 = grid(x0, y1), s11 = grid(x1, y1);
  if (!clampedX && x1 != x0) gradient.x() = (1.0 - fy) * (s10 - s00) + fy * (s11 - s01);
  if (!clampedY && y1 != y0) gradient.y() = (1.0 - fx) * (s01 - s00) + fx * (s11 - s10);
  if (fx == 0.0 && fy == 0.0) return s00;
  return (1.0 - fy) * ((1.0 - fx) * s00 + fx * s10) + fy * ((1.0 - fx) * s01 + fx * s11);
}

double sampleBilinear(const Image<double>& grid, const Eigen::Vector2d& p) {
  Eigen::Vector2d g;
  return sampleBilinearWithGradient(grid, p, g);
}

double sampleBilinear(const EdgeCostSurface& surface, const Eigen::Vector2d& p) {
  return sampleBilinear(surface.S, p);
}

}  // namespace edgefit
