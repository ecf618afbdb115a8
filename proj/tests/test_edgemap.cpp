#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "edgefit/edgemap.hpp"
#include "edgefit/errors.hpp"
#include "edgefit/image.hpp"
#include "support.hpp"

using namespace edgefit;
using testsupport::Gen;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

BinaryImage randomMask(Gen& g, int w, int h, double density) {
  BinaryImage m(w, h, 0);
  for (auto& v : m.data()) v = g.coin(density) ? 1 : 0;
  return m;
}

GrayImage disk(int size, double cx, double cy, double r) {
  GrayImage img(size, size, 0.0);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) img(x, y) = std::hypot(x - cx, y - cy) <= r ? 1.0 : 0.0;
  return img;
}

}  // namespace

TEST_CASE("nearestEdge worked values") {
  const EdgeSet two({20, 5}, {{0, 0}, {10, 0}});
  auto hit = nearestEdge(two, {4, 0});
  CHECK(hit.pixel == EdgePixel{0, 0});
  CHECK(hit.distance == 4.0);
  hit = nearestEdge(two, {10, 0});
  CHECK(hit.pixel == EdgePixel{10, 0});
  CHECK(hit.distance == 0.0);
  // Equidistant: first pixel in row-major order wins.
  hit = nearestEdge(two, {5, 3});
  CHECK(hit.pixel == EdgePixel{0, 0});
  CHECK_THROWS_AS(nearestEdge(EdgeSet({4, 4}, {}), {1, 1}), NoEdgesError);
  CHECK_THROWS_AS(EdgeSet({4, 4}, {{4, 0}}), InvalidArgument);
}

TEST_CASE("nearestEdge equals an exhaustive scan") {
  Gen g(10);
  std::vector<EdgePixel> pixels;
  for (int i = 0; i < 10000; ++i) pixels.push_back({g.integer(0, 299), g.integer(0, 199)});
  const EdgeSet edges({300, 200}, pixels);
  for (int q = 0; q < 1000; ++q) {
    // Mix continuous queries with integer ones, which produce many exact ties.
    const Eigen::Vector2d p = q % 2 ? Eigen::Vector2d(g.uniform(-20, 320), g.uniform(-20, 220))
                                    : Eigen::Vector2d(g.integer(0, 299), g.integer(0, 199));
    const auto fast = nearestEdge(edges, p);
    const auto slow = testsupport::bruteNearest(pixels, p);
    CHECK(fast.pixel == slow.pixel);
    CHECK(fast.distance == slow.distance);
  }
  // Sparse sets with coarse coordinates stress tie handling.
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EdgePixel> few;
    for (int i = 0, n = g.integer(1, 30); i < n; ++i) few.push_back({2 * g.integer(0, 8), 2 * g.integer(0, 8)});
    const EdgeSet e({17, 17}, few);
    for (int q = 0; q < 20; ++q) {
      const Eigen::Vector2d p(g.integer(0, 16), g.integer(0, 16));
      CHECK(nearestEdge(e, p).pixel == testsupport::bruteNearest(few, p).pixel);
    }
  }
}

TEST_CASE("EdgeSet keeps unique pixels in row-major order") {
  const EdgeSet e({5, 5}, {{3, 1}, {0, 2}, {1, 1}, {3, 1}});
  REQUIRE(e.size() == 3);
  CHECK(e.pixels()[0] == EdgePixel{1, 1});
  CHECK(e.pixels()[1] == EdgePixel{3, 1});
  CHECK(e.pixels()[2] == EdgePixel{0, 2});
  const EdgeSet back = EdgeSet::fromBinary(e.toBinary());
  CHECK(back.pixels() == e.pixels());
}

TEST_CASE("distanceTransform worked values") {
  BinaryImage one(7, 5, 0);
  one(0, 0) = 1;
  const auto d = distanceTransform(one);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) CHECK(d(x, y) == std::sqrt(double(x * x + y * y)));

  const auto full = distanceTransform(BinaryImage(6, 4, 1));
  for (double v : full.data()) CHECK(v == 0.0);

  const auto none = distanceTransform(BinaryImage(6, 4, 0));
  for (double v : none.data()) CHECK(v == kInf);
}

TEST_CASE("distanceTransform equals brute force exactly") {
  Gen g(77);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = g.integer(1, 40), h = g.integer(1, 40);
    const BinaryImage m = randomMask(g, w, h, g.uniform(0.0, 0.3));
    CHECK(distanceTransform(m) == testsupport::bruteDistance(m));
  }
  const BinaryImage big = randomMask(g, 64, 64, 0.05);
  CHECK(distanceTransform(big) == testsupport::bruteDistance(big));
  const BinaryImage large = randomMask(g, 128, 96, 0.01);
  CHECK(distanceTransform(large) == testsupport::bruteDistance(large));
}

TEST_CASE("Canny on a vertical step gives one column") {
  GrayImage img(40, 30, 0.0);
  for (int y = 0; y < 30; ++y)
    for (int x = 20; x < 40; ++x) img(x, y) = 1.0;
  const EdgeSet e = cannyEdges(img);
  REQUIRE_FALSE(e.empty());
  const int col = e.pixels().front().x;
  CHECK((col == 19 || col == 20));
  for (const auto& p : e.pixels()) CHECK(p.x == col);
  CHECK(e.size() >= 26);
}

TEST_CASE("Canny on a constant image is empty") {
  CHECK(cannyEdges(GrayImage(30, 30, 0.4)).empty());
  CHECK_THROWS_AS(cannyEdges(GrayImage()), InvalidArgument);
  CHECK_THROWS_AS(cannyEdges(GrayImage(8, 8, 0.0), 0.5, 0.2, 1.4), InvalidArgument);
}

TEST_CASE("Canny on a disk follows the circle and is thin") {
  const double cx = 63.3, cy = 60.7, r = 37.0;
  const EdgeSet e = cannyEdges(disk(128, cx, cy, r));
  // 4-bin suppression keeps staircase corners where the direction bin
  // changes, so the count lies between the 8-connected (4 sqrt2 r) and the
  // 4-connected (8 r) lengths of a digital circle.
  CHECK(double(e.size()) >= 4.0 * std::sqrt(2.0) * r);
  CHECK(double(e.size()) <= 8.0 * r);
  const BinaryImage mask = e.toBinary();
  for (const auto& p : e.pixels()) {
    const double dist = std::hypot(p.x - cx, p.y - cy);
    CHECK(std::abs(dist - r) <= 1.0);
    // Thinness: both neighbours along the quantised radial direction are not edges.
    const double angle = std::atan2(p.y - cy, p.x - cx);
    const int bin = static_cast<int>(std::lround(angle / (std::acos(-1.0) / 4))) & 3;
    static const int dx[4] = {1, 1, 0, -1}, dy[4] = {0, 1, 1, 1};
    const int ax = p.x + dx[bin], ay = p.y + dy[bin], bx = p.x - dx[bin], by = p.y - dy[bin];
    CHECK_FALSE((mask(ax, ay) && mask(bx, by)));
  }
}

TEST_CASE("bilinear sampling") {
  Gen g(31);
  Image<double> grid(9, 7);
  for (auto& v : grid.data()) v = g.uniform(0, 1);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 9; ++x) CHECK(sampleBilinear(grid, Eigen::Vector2d(x, y)) == grid(x, y));

  Image<double> pair(2, 1);
  pair(0, 0) = 0.0;
  pair(1, 0) = 1.0;
  CHECK(sampleBilinear(pair, Eigen::Vector2d(0.5, 0.0)) == 0.5);

  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector2d p(g.uniform(0, 8), g.uniform(0, 6));
    const int x0 = std::min(int(p.x()), 7), y0 = std::min(int(p.y()), 5);
    const double fx = p.x() - x0, fy = p.y() - y0;
    const double expect = grid(x0, y0) * (1 - fx) * (1 - fy) + grid(x0 + 1, y0) * fx * (1 - fy) +
                          grid(x0, y0 + 1) * (1 - fx) * fy + grid(x0 + 1, y0 + 1) * fx * fy;
    CHECK(std::abs(sampleBilinear(grid, p) - expect) <= 1e-12);

    Eigen::Vector2d grad;
    sampleBilinearWithGradient(grid, p, grad);
    const double h = 1e-7;
    if (fx > 1e-6 && fx < 1 - 1e-6 && fy > 1e-6 && fy < 1 - 1e-6) {
      const double gx = (sampleBilinear(grid, p + Eigen::Vector2d(h, 0)) - sampleBilinear(grid, p - Eigen::Vector2d(h, 0))) / (2 * h);
      const double gy = (sampleBilinear(grid, p + Eigen::Vector2d(0, h)) - sampleBilinear(grid, p - Eigen::Vector2d(0, h))) / (2 * h);
      CHECK(grad.x() == doctest::Approx(gx).epsilon(1e-6));
      CHECK(grad.y() == doctest::Approx(gy).epsilon(1e-6));
    }
  }
  // Outside the grid the border value is used and the clamped axis has no gradient.
  Eigen::Vector2d grad;
  CHECK(sampleBilinearWithGradient(grid, Eigen::Vector2d(-3.0, 2.0), grad) == grid(0, 2));
  CHECK(grad.x() == 0.0);
  CHECK(sampleBilinear(grid, Eigen::Vector2d(100.0, 100.0)) == grid(8, 6));
}

TEST_CASE("cost surface from a single threshold and scale") {
  const GrayImage img = disk(64, 30.2, 33.1, 18.0);
  const Image<double> d = distanceTransform(gradientNmsEdges(img, 0.2, 1.4));
  for (double kappa : {1.0, 5.0, 1e6}) {
    const auto surf = buildCostSurface(img, {0.2}, {1.0}, kappa);
    CHECK(surf.n == 1);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        CHECK(surf.S(x, y) == d(x, y) / (d(x, y) + kappa));
        if (kappa == 1e6) CHECK(surf.S(x, y) == doctest::Approx(d(x, y) / kappa).epsilon(1e-4));
      }
  }
}

TEST_CASE("cost surface composes independently computed fields") {
  GrayImage img(64, 64, 0.1);
  for (int y = 16; y < 48; ++y)
    for (int x = 12; x < 52; ++x) img(x, y) = 0.9;
  const double kappa = 3.0;
  const auto surf = buildCostSurface(img, {0.1, 0.3}, {1.0, 0.5}, kappa);
  CHECK(surf.n == 4);
  Image<double> expect(64, 64, 0.0);
  for (double s : {1.0, 0.5})
    for (double t : {0.1, 0.3}) {
      const auto single = buildCostSurface(img, {t}, {s}, kappa);
      for (std::size_t i = 0; i < expect.data().size(); ++i) expect.data()[i] += single.S.data()[i];
    }
  for (std::size_t i = 0; i < expect.data().size(); ++i) {
    CHECK(surf.S.data()[i] == doctest::Approx(expect.data()[i] / 4.0).epsilon(1e-14));
    CHECK(surf.S.data()[i] >= 0.0);
    CHECK(surf.S.data()[i] < 1.0);
  }
}

TEST_CASE("cost is zero exactly where every edge image has an edge") {
  GrayImage img(64, 64, 0.1);
  for (int y = 16; y < 48; ++y)
    for (int x = 12; x < 52; ++x) img(x, y) = 0.9;
  const auto surf = buildCostSurface(img, {0.1, 0.3}, {1.0}, 3.0);
  const BinaryImage a = gradientNmsEdges(img, 0.1, 1.4), b = gradientNmsEdges(img, 0.3, 1.4);
  int zeros = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      CHECK((surf.S(x, y) == 0.0) == (a(x, y) && b(x, y)));
      zeros += surf.S(x, y) == 0.0;
    }
  CHECK(zeros > 100);
}

TEST_CASE("cost surface is monotone in every distance field") {
  Gen g(6);
  DistanceStack stack{{16, 16}, {}};
  for (int k = 0; k < 3; ++k) {
    Image<double> f(16, 16);
    for (auto& v : f.data()) v = g.coin(0.1) ? 0.0 : g.uniform(0, 20);
    stack.fields.push_back(f);
  }
  const auto base = composeCostSurface(stack, 2.0);
  DistanceStack bumped = stack;
  for (auto& v : bumped.fields[1].data()) v += g.uniform(0, 3);
  const auto higher = composeCostSurface(bumped, 2.0);
  for (std::size_t i = 0; i < base.S.data().size(); ++i) CHECK(higher.S.data()[i] >= base.S.data()[i]);
  CHECK_THROWS_AS(composeCostSurface(stack, 0.0), InvalidArgument);
}

TEST_CASE("coarse scales report distances in working-resolution pixels") {
  // A vertical step: the distance grows by one per working pixel at every scale.
  GrayImage img(64, 32, 0.0);
  for (int y = 0; y < 32; ++y)
    for (int x = 32; x < 64; ++x) img(x, y) = 1.0;
  const auto stack = buildDistanceStack(img, {0.2}, {1.0, 0.5, 0.25});
  REQUIRE(stack.fields.size() == 3);
  for (const auto& f : stack.fields) {
    CHECK(f.size() == img.size());
    CHECK(f(2, 16) == doctest::Approx(f(10, 16) + 8.0).epsilon(0.05));
    CHECK(f(31, 16) <= 4.0);
  }
}

TEST_CASE("image files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "edgefit_test_edgemap";
  std::filesystem::create_directories(dir);
  GrayImage img(13, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 13; ++x) img(x, y) = ((x * 7 + y * 13) % 256) / 255.0;
  writePgm(img, dir / "a.pgm");
  CHECK(readImage(dir / "a.pgm") == quantize8(img));
  writePng(img, dir / "a.png");
  CHECK(readImage(dir / "a.png") == quantize8(img));
  CHECK_THROWS_AS(readImage(dir / "missing.pgm"), IoError);
  std::ofstream(dir / "bad.pgm") << "P2\n1 1\n255\n0\n";
  CHECK_THROWS_AS(readImage(dir / "bad.pgm"), ParseError);
}
