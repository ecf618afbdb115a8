#include "edgefit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/QR>
#include <json.hpp>

#include "edgefit/contour.hpp"
#include "edgefit/errors.hpp"

namespace edgefit {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

// Head semi-axes (mm): width, height, depth.
constexpr double kA = 75.0, kB = 100.0, kC = 90.0;

std::mt19937_64 makeRng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Unit direction of a point on the front of the head at (x, y) mm.
Eigen::Vector3d frontDirection(double x, double y) {
  const double ux = x / kA, uy = y / kB;
  return Eigen::Vector3d(ux, uy, -std::sqrt(std::max(0.0, 1.0 - ux * ux - uy * uy))).normalized();
}

struct Bump {
  Eigen::Vector3d centre;  // unit direction
  double height;           // mm along the radial direction
  double width;            // radians
};

double bumpField(const std::vector<Bump>& bumps, const Eigen::Vector3d& u) {
  double g = 0.0;
  for (const auto& b : bumps) {
    const double d2 = (u - b.centre).squaredNorm();
    g += b.height * std::exp(-0.5 * d2 / (b.width * b.width));
  }
  return g;
}

Bump featureBump(double x, double y, double height, double widthMm) {
  return {frontDirection(x, y), height, widthMm / 85.0};
}

std::vector<Bump> facialFeatures() {
  std::vector<Bump> f;
  f.push_back(featureBump(0, 8, 20, 10));     // nose
  f.push_back(featureBump(0, -14, 7, 8));     // nose bridge
  f.push_back(featureBump(0, 20, -4, 9));     // below the nose
  f.push_back(featureBump(0, 38, 4, 9));      // lips
  f.push_back(featureBump(0, 66, 7, 13));     // chin
  for (double sx : {-1.0, 1.0}) {
    f.push_back(featureBump(sx * 26, -32, 5, 11));  // brow
    f.push_back(featureBump(sx * 29, -15, -8, 9));  // eye socket
    f.push_back(featureBump(sx * 44, 6, 6, 14));    // cheekbone
  }
  return f;
}

Eigen::Vector3d mirrorX(const Eigen::Vector3d& v) { return {-v.x(), v.y(), v.z()}; }

struct SphereGrid {
  int rings = 0, segments = 0;
  std::vector<Eigen::Vector3d> dirs;
  std::vector<Triangle> triangles;
};

SphereGrid buildSphereGrid(std::size_t N) {
  SphereGrid g;
  const double target = std::sqrt(2.0 * static_cast<double>(N - 2));
  g.segments = std::max(8, 4 * static_cast<int>(std::ceil(target / 4.0)));
  g.rings = static_cast<int>((N - 2 + g.segments - 1) / g.segments);
  g.rings = std::max(g.rings, 3);
  const int M = g.segments, R = g.rings;
  auto dir = [](double theta, double phi) {
    return Eigen::Vector3d(std::sin(theta) * std::cos(phi), -std::cos(theta), std::sin(theta) * std::sin(phi));
  };
  g.dirs.push_back(Eigen::Vector3d(0, -1, 0));
  for (int k = 0; k < R; ++k) {
    const double theta = kPi * (k + 1) / (R + 1);
    for (int j = 0; j < M; ++j) g.dirs.push_back(dir(theta, 2.0 * kPi * j / M));
  }
  g.dirs.push_back(Eigen::Vector3d(0, 1, 0));
  const auto top = 0u;
  const auto bottom = static_cast<std::uint32_t>(g.dirs.size() - 1);
  auto at = [M](int k, int j) { return static_cast<std::uint32_t>(1 + k * M + ((j % M) + M) % M); };

  for (int j = 0; j < M; ++j) g.triangles.push_back({top, at(0, j), at(0, j + 1)});
  for (int k = 0; k + 1 < R; ++k) {
    for (int j = 0; j < M; ++j) {
      const auto a = at(k, j), b = at(k, j + 1), c = at(k + 1, j), d = at(k + 1, j + 1);
      // Diagonals are mirrored across x = 0 so the triangulation is symmetric.
      if (std::cos(2.0 * kPi * (j + 0.5) / M) > 0.0) {
        g.triangles.push_back({a, c, d});
        g.triangles.push_back({a, d, b});
      } else {
        g.triangles.push_back({a, c, b});
        g.triangles.push_back({b, c, d});
      }
    }
  }
  for (int j = 0; j < M; ++j) g.triangles.push_back({bottom, at(R - 1, j + 1), at(R - 1, j)});
  // Orient every triangle outwards.
  for (auto& t : g.triangles) {
    const Eigen::Vector3d n = (g.dirs[t[1]] - g.dirs[t[0]]).cross(g.dirs[t[2]] - g.dirs[t[0]]);
    if (n.dot(g.dirs[t[0]] + g.dirs[t[1]] + g.dirs[t[2]]) < 0.0) std::swap(t[1], t[2]);
  }
  return g;
}

std::vector<std::uint32_t> designateLandmarks(const Eigen::VectorXd& mean) {
  std::vector<Eigen::Vector2d> targets;
  for (double sx : {-1.0, 1.0}) {
    for (double x : {12.0, 20.0, 28.0, 36.0, 44.0}) targets.emplace_back(sx * x, -34.0 + 0.004 * (x - 28) * (x - 28));
    for (int a = 0; a < 6; ++a) {
      const double t = 2.0 * kPi * a / 6.0;
      targets.emplace_back(sx * (29.0 + 13.0 * std::cos(t)), -15.0 + 6.0 * std::sin(t));
    }
    targets.emplace_back(sx * 46.0, 4.0);
    targets.emplace_back(sx * 50.0, 24.0);
    targets.emplace_back(sx * 11.0, 18.0);
    targets.emplace_back(sx * 6.0, 21.0);
  }
  for (double y : {-24.0, -14.0, -4.0, 6.0, 12.0}) targets.emplace_back(0.0, y);
  for (int a = 0; a < 12; ++a) {
    const double t = 2.0 * kPi * a / 12.0;
    targets.emplace_back(22.0 * std::cos(t), 38.0 + 9.0 * std::sin(t));
  }
  for (int a = 0; a < 6; ++a) {
    const double t = 2.0 * kPi * a / 6.0;
    targets.emplace_back(12.0 * std::cos(t), 38.0 + 3.0 * std::sin(t));
  }
  for (int a = 0; a < 15; ++a) {
    const double t = kPi * (0.1 + 0.8 * a / 14.0);  // along the jaw, ear to ear
    targets.emplace_back(-64.0 * std::cos(t), 30.0 + 46.0 * std::sin(t));
  }

  const auto n = static_cast<std::size_t>(mean.size() / 3);
  std::vector<std::uint32_t> ids;
  std::set<std::uint32_t> used;
  for (const auto& tgt : targets) {
    std::vector<std::pair<double, std::uint32_t>> cand;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d v = mean.segment<3>(3 * static_cast<Index>(i));
      if (v.z() >= 0.0) continue;
      cand.emplace_back((v.head<2>() - tgt).squaredNorm(), static_cast<std::uint32_t>(i));
    }
    std::sort(cand.begin(), cand.end());
    for (const auto& [d, i] : cand) {
      if (used.insert(i).second) {
        ids.push_back(i);
        break;
      }
    }
  }
  return ids;
}

}  // namespace

SyntheticModel makeSyntheticModel(std::size_t N, Index S, std::uint64_t seed) {
  if (N < 100) throw InvalidArgument("makeSyntheticModel: N must be at least 100");
  if (S < 5) throw InvalidArgument("makeSyntheticModel: S must be at least 5");
  const SphereGrid grid = buildSphereGrid(N);
  const auto n = static_cast<Index>(grid.dirs.size());
  if (S > 3 * n) throw InvalidArgument("makeSyntheticModel: too many components for the mesh");

  const std::vector<Bump> features = facialFeatures();
  Eigen::VectorXd mean(3 * n);
  for (Index i = 0; i < n; ++i) {
    const Eigen::Vector3d& u = grid.dirs[i];
    const Eigen::Vector3d base(kA * u.x(), kB * u.y(), kC * u.z());
    mean.segment<3>(3 * i) = base + bumpField(features, u) * u;
  }

  // Raw deformation fields: sums of mirrored radial bumps over the front
  // and sides of the head, alternately symmetric and antisymmetric.
  auto rng = makeRng(seed, 0x5eed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  // The first kFrontFraction of the components deform the face region only;
  // the rest act on the sides and back of the head.
  constexpr double kWidthLo = 0.22, kWidthHi = 0.45, kSideZMax = 0.3, kFrontZ = -0.6, kFrontFraction = 0.4;
  constexpr int kBumpsPerField = 3;
  std::uniform_real_distribution<double> widthDist(kWidthLo, kWidthHi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd raw(3 * n, S);
  for (Index c = 0; c < S; ++c) {
    Eigen::VectorXd field(3 * n);
    const bool symmetric = (c % 2) == 0;
    std::vector<Bump> bumps;
    for (int k = 0; k < kBumpsPerField; ++k) {
      Eigen::Vector3d centre;
      const bool front = c < static_cast<Index>(kFrontFraction * S + 0.5);
      do {
        centre = Eigen::Vector3d(uni(rng), 0.9 * uni(rng), uni(rng));
      } while (centre.squaredNorm() > 1.0 || centre.squaredNorm() < 1e-3 ||
               (front ? centre.normalized().z() > kFrontZ
                      : centre.normalized().z() > kSideZMax || centre.normalized().z() < kFrontZ));
      centre.normalize();
      const double h = gauss(rng);
      const double w = widthDist(rng);
      bumps.push_back({centre, h, w});
      bumps.push_back({mirrorX(centre), symmetric ? h : -h, w});
    }
    for (Index i = 0; i < n; ++i) {
      const Eigen::Vector3d& u = grid.dirs[i];
      field.segment<3>(3 * i) = bumpField(bumps, u) * u;
    }
    raw.col(c) = field;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd P = qr.householderQ() * Eigen::MatrixXd::Identity(3 * n, S);
  for (Index c = 0; c < S; ++c) {
    if (P.col(c).dot(raw.col(c)) < 0.0) P.col(c) *= -1.0;  // keep the raw field's orientation
  }

  const double sigma1 = 10.0 * std::sqrt(static_cast<double>(n));
  Eigen::VectorXd variances(S);
  for (Index c = 0; c < S; ++c) variances[c] = sigma1 * sigma1 * std::pow(static_cast<double>(c + 1), -1.5);

  SyntheticModel out{ShapeModel(mean, P, variances, grid.triangles), {}};
  out.landmarkIds = designateLandmarks(mean);
  return out;
}

Eigen::VectorXd sampleSubject(const ShapeModel& model, std::uint64_t seed, double bound) {
  if (!(bound > 0.0)) throw InvalidArgument("sampleSubject: bound must be positive");
  auto rng = makeRng(seed, 0xa1fa);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd alpha(model.componentCount());
  const Eigen::VectorXd sd = model.stdDevs();
  for (Index i = 0; i < alpha.size(); ++i) {
    double z;
    do {
      z = gauss(rng);
    } while (std::abs(z) > bound);
    alpha[i] = sd[i] * z;
  }
  return alpha;
}

Pose scenePose(const Mesh& mesh, double yawDeg, ImageSize size) {
  if (size.empty()) throw InvalidArgument("scenePose: empty image size");
  Pose pose;
  pose.R = yawRotation(yawDeg * kPi / 180.0);
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (std::size_t i = 0; i < mesh.vertexCount(); ++i) {
    const Eigen::Vector2d q = pose.R.topRows<2>() * mesh.vertex(i);
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  pose.s = 0.8 * size.height / (hi.y() - lo.y());
  const Eigen::Vector2d centre(0.5 * (size.width - 1), 0.5 * (size.height - 1));
  pose.t = centre / pose.s - 0.5 * (lo + hi);
  return pose;
}

GrayImage renderShaded(const Mesh& mesh, const Pose& pose, ImageSize size) {
  const Raster raster = rasterizeMesh(mesh, pose, size);
  const auto& tris = mesh.topology->triangles();
  std::vector<Eigen::Vector3d> normals(mesh.vertexCount(), Eigen::Vector3d::Zero());
  for (const auto& t : tris) {
    const Eigen::Vector3d a = mesh.vertex(t[0]);
    const Eigen::Vector3d n = (mesh.vertex(t[1]) - a).cross(mesh.vertex(t[2]) - a);
    for (auto v : t) normals[v] += n;
  }
  for (auto& n : normals) n = pose.R * n.normalized();
  const Eigen::Vector3d light = Eigen::Vector3d(0.0, -0.4, -1.0).normalized();

  auto project = [&](std::uint32_t v) { return sop(mesh.vertex(v), pose); };
  GrayImage img(size, 0.0);
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      const std::int32_t f = raster.triangle(x, y);
      if (f < 0) continue;
      const auto& t = tris[static_cast<std::size_t>(f)];
      const Eigen::Vector2d a = project(t[0]), b = project(t[1]), c = project(t[2]);
      const Eigen::Vector2d p(x, y);
      auto cross2 = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) { return u.x() * v.y() - u.y() * v.x(); };
      const double area = cross2(b - a, c - a);
      const double wa = cross2(c - b, p - b) / area;
      const double wb = cross2(a - c, p - c) / area;
      const double wc = 1.0 - wa - wb;
      const Eigen::Vector3d n = (wa * normals[t[0]] + wb * normals[t[1]] + wc * normals[t[2]]).normalized();
      img(x, y) = 0.3 + 0.7 * std::max(0.0, n.dot(light));
    }
  }
  return quantize8(img);
}

SyntheticScene renderScene(const ShapeModel& model, const std::vector<std::uint32_t>& landmarkIds,
                           const Eigen::VectorXd& alpha, double yawDeg, ImageSize size) {
  if (!(std::abs(yawDeg) < 90.0)) throw InvalidArgument("renderScene: yaw must lie in (-90, 90) degrees");
  const Mesh mesh = instantiate(model, ShapeCoefficients{alpha});
  SyntheticScene scene;
  scene.groundTruthAlpha = alpha;
  scene.yawDeg = yawDeg;
  scene.groundTruthPose = scenePose(mesh, yawDeg, size);
  scene.image = renderShaded(mesh, scene.groundTruthPose, size);
  scene.allLandmarkIds = landmarkIds;
  const VisibilityTester vis(mesh, scene.groundTruthPose, size);
  std::vector<Landmark> visible;
  for (auto id : landmarkIds) {
    if (id >= mesh.vertexCount()) throw InvalidArgument("renderScene: landmark id out of range");
    if (!vis.visible(id)) continue;
    const Eigen::Vector2d p = sop(mesh.vertex(id), scene.groundTruthPose);
    visible.push_back({id, Eigen::Vector2d(std::round(p.x()), std::round(p.y()))});
  }
  scene.landmarks = LandmarkSet(std::move(visible));
  return scene;
}

LandmarkSet addLandmarkNoise(const LandmarkSet& landmarks, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("addLandmarkNoise: sigma must be non-negative");
  if (sigma == 0.0) return landmarks;
  auto rng = makeRng(seed, 0x0015e);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Landmark> out = landmarks.entries();
  for (auto& e : out) {
    const double dx = gauss(rng);
    const double dy = gauss(rng);
    e.point += sigma * Eigen::Vector2d(dx, dy);
  }
  return LandmarkSet(std::move(out));
}

void writeSceneBundle(const SyntheticScene& scene, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create scene directory");
  writePgm(scene.image, dir / "image.pgm");
  writeLandmarks(scene.landmarks, dir / "landmarks.csv");

  const Eigen::VectorXd& a = scene.groundTruthAlpha;
  const Eigen::Vector3d r = matrixToAxisAngle(scene.groundTruthPose.R);
  json gt;
  gt["alpha"] = std::vector<double>(a.data(), a.data() + a.size());
  gt["axis_angle"] = {r.x(), r.y(), r.z()};
  gt["t"] = {scene.groundTruthPose.t.x(), scene.groundTruthPose.t.y()};
  gt["s"] = scene.groundTruthPose.s;
  json meta;
  meta["yaw_deg"] = scene.yawDeg;
  meta["width"] = scene.image.width();
  meta["height"] = scene.image.height();
  meta["all_landmark_ids"] = scene.allLandmarkIds;
  meta["visible_landmarks"] = scene.landmarks.size();
  for (const auto& [name, j] : {std::pair<const char*, const json*>{"ground_truth.json", &gt},
                                std::pair<const char*, const json*>{"scene_meta.json", &meta}}) {
    std::ofstream out(dir / name);
    if (!out) throw IoError((dir / name).string(), "cannot open for writing");
    out << j->dump(2) << '\n';
  }
}

SyntheticScene readSceneBundle(const std::filesystem::path& dir) {
  SyntheticScene scene;
  scene.image = readImage(dir / "image.pgm");
  scene.landmarks = readLandmarks(dir / "landmarks.csv");
  auto load = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError(p.string(), "cannot open");
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError(p.filename().string(), e.what());
    }
  };
  const json gt = load(dir / "ground_truth.json");
  const json meta = load(dir / "scene_meta.json");
  try {
    const auto alpha = gt.at("alpha").get<std::vector<double>>();
    scene.groundTruthAlpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Index>(alpha.size()));
    const auto r = gt.at("axis_angle").get<std::vector<double>>();
    const auto t = gt.at("t").get<std::vector<double>>();
    if (r.size() != 3) throw ParseError("axis_angle", "expected 3 values");
    if (t.size() != 2) throw ParseError("t", "expected 2 values");
    scene.groundTruthPose = toMatrix(AxisAnglePose{{r[0], r[1], r[2]}, {t[0], t[1]}, gt.at("s").get<double>()});
    scene.yawDeg = meta.at("yaw_deg").get<double>();
    scene.allLandmarkIds = meta.at("all_landmark_ids").get<std::vector<std::uint32_t>>();
  } catch (const json::exception& e) {
    throw ParseError("scene bundle", e.what());
  }
  return scene;
}

}  // namespace edgefit
