#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <Eigen/Geometry>

#include "edgefit/errors.hpp"
#include "edgefit/landmark_fit.hpp"
#include "edgefit/objective.hpp"
#include "support.hpp"

using namespace edgefit;
using testsupport::Gen;

namespace {

double rotationAngle(const Eigen::Matrix3d& A, const Eigen::Matrix3d& B) {
  const double c = std::clamp(0.5 * ((A.transpose() * B).trace() - 1.0), -1.0, 1.0);
  return std::acos(c);
}

std::vector<std::uint32_t> pickVertices(Gen& g, std::size_t n, std::size_t count) {
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  std::shuffle(all.begin(), all.end(), g.rng);
  all.resize(count);
  return all;
}

LandmarkSet makeSet(const std::vector<std::uint32_t>& ids, const std::vector<Eigen::Vector2d>& pts) {
  std::vector<Landmark> e;
  for (std::size_t i = 0; i < ids.size(); ++i) e.push_back({ids[i], pts[i]});
  return LandmarkSet(e);
}

// Shape system built column by column from whole-mesh instantiations.
void bruteShapeSystem(const ShapeModel& model, const std::vector<std::uint32_t>& ids,
                      const std::vector<Eigen::Vector2d>& pts, const Pose& pose, Eigen::MatrixXd& C,
                      Eigen::VectorXd& h) {
  const Eigen::Index S = model.componentCount();
  const auto L = static_cast<Eigen::Index>(ids.size());
  C.resize(2 * L, S);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(S);
  const auto base = testsupport::projectVertices(model, zero, pose, ids);
  for (Eigen::Index j = 0; j < S; ++j) {
    const Eigen::VectorXd unit = Eigen::VectorXd::Unit(S, j) * std::sqrt(model.variances()[j]);
    const auto moved = testsupport::projectVertices(model, unit, pose, ids);
    for (Eigen::Index i = 0; i < L; ++i) C.block<2, 1>(2 * i, j) = moved[i] - base[i];
  }
  h.resize(2 * L);
  for (Eigen::Index i = 0; i < L; ++i) h.segment<2>(2 * i) = pts[i] - base[i];
}

}  // namespace

TEST_CASE("landmarkEnergy examples") {
  const ShapeModel model = testsupport::tetraModel();
  Gen g(1);
  const Pose pose = g.pose();
  const Eigen::Vector2d alpha(0.7, -1.3);
  const std::vector<std::uint32_t> ids{0, 1, 2, 3};
  const auto pts = testsupport::projectVertices(model, alpha, pose, ids);
  CHECK(landmarkEnergy(model, makeSet(ids, pts), alpha, pose) < 1e-20);

  const LandmarkSet one = makeSet({2}, {pts[2] + Eigen::Vector2d(3, 4)});
  CHECK(landmarkEnergy(model, one, alpha, pose) == doctest::Approx(25.0).epsilon(1e-12));

  CHECK_THROWS_AS(landmarkEnergy(model, LandmarkSet{}, alpha, pose), InvalidArgument);
  CHECK_THROWS_AS(landmarkEnergy(model, makeSet({9}, {Eigen::Vector2d(0, 0)}), alpha, pose), InvalidArgument);
}

TEST_CASE("landmarkEnergy matches a direct loop on random models") {
  Gen g(2);
  for (int trial = 0; trial < 100; ++trial) {
    const ShapeModel model = testsupport::toyModel(g, static_cast<std::size_t>(g.integer(12, 60)), g.integer(1, 6));
    const Eigen::VectorXd alpha = g.vec(model.componentCount(), 3.0);
    const Pose pose = g.pose();
    const auto ids = pickVertices(g, model.vertexCount(), static_cast<std::size_t>(g.integer(1, 10)));
    std::vector<Eigen::Vector2d> pts;
    for (std::size_t i = 0; i < ids.size(); ++i) pts.emplace_back(g.uniform(-100, 100), g.uniform(-100, 100));
    const Mesh mesh = instantiate(model, {alpha});
    double ref = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const Eigen::Vector3d v = mesh.vertex(ids[i]);
      const Eigen::Vector2d p = pose.s * (pose.R.topRows<2>() * v + pose.t);
      ref += (pts[i] - p).squaredNorm();
    }
    ref /= static_cast<double>(ids.size());
    CHECK(landmarkEnergy(model, makeSet(ids, pts), alpha, pose) == doctest::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("LandmarkSet rejects duplicates and non-finite points") {
  CHECK_THROWS_AS(LandmarkSet({{1, {0, 0}}, {1, {2, 2}}}), InvalidArgument);
  CHECK_THROWS_AS(LandmarkSet({{1, {std::nan(""), 0}}}), InvalidArgument);
  const LandmarkSet s({{4, {1, 2}}, {2, {3, 4}}});
  CHECK(s.vertices() == std::vector<std::uint32_t>{4, 2});
}

TEST_CASE("rotationFromStackedRows returns a proper rotation") {
  const Eigen::Matrix3d reflect = Eigen::Vector3d(1, 1, -1).asDiagonal();
  const Eigen::Matrix3d R = rotationFromStackedRows(reflect);
  CHECK(R.determinant() == doctest::Approx(1.0));
  CHECK((R.topRows<2>() - reflect.topRows<2>()).norm() < 1e-12);

  Gen g(3);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Matrix3d M = g.rotation();
    if (g.coin()) M.row(2) *= -1.0;
    M += 1e-3 * Eigen::Matrix3d::Random();
    const Eigen::Matrix3d Q = rotationFromStackedRows(M);
    CHECK((Q.transpose() * Q - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(Q.determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("POS recovers noiseless poses") {
  Gen g(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Eigen::Vector3d> p3;
    for (int i = 0; i < 20; ++i) p3.push_back(g.vec3(40.0));
    const Pose truth = g.pose();
    std::vector<Eigen::Vector2d> p2;
    for (const auto& v : p3) p2.push_back(sop(v, truth));
    const Pose est = estimatePosePOS(p3, p2);
    CHECK(est.R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rotationAngle(est.R, truth.R) < 1e-5);
    CHECK(std::abs(est.s - truth.s) / truth.s < 1e-6);
    CHECK((est.t - truth.t).norm() / truth.t.norm() < 1e-6);
  }
}

TEST_CASE("POS rotation is invariant to image rescaling") {
  Gen g(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Eigen::Vector3d> p3;
    for (int i = 0; i < 12; ++i) p3.push_back(g.vec3(30.0));
    const Pose truth = g.pose();
    std::vector<Eigen::Vector2d> p2, p2c;
    const double c = g.uniform(0.3, 4.0);
    for (const auto& v : p3) {
      p2.push_back(sop(v, truth) + g.vec(2).head<2>());  // noisy, so the test is not trivially exact
      p2c.push_back(c * p2.back());
    }
    const Pose a = estimatePosePOS(p3, p2);
    const Pose b = estimatePosePOS(p3, p2c);
    CHECK((a.R - b.R).norm() < 1e-9);
    CHECK(b.s == doctest::Approx(c * a.s).epsilon(1e-9));
    CHECK((a.t - b.t).norm() < 1e-8 * (1.0 + a.t.norm()));
  }
}

TEST_CASE("POS rejects degenerate configurations") {
  std::vector<Eigen::Vector3d> line, plane;
  std::vector<Eigen::Vector2d> img;
  for (int i = 0; i < 8; ++i) {
    line.emplace_back(i, 2 * i, -i);
    plane.emplace_back(i % 3, i / 3, 0.0);
    img.emplace_back(i, i * i);
  }
  CHECK_THROWS_AS(estimatePosePOS(line, img), DegenerateError);
  CHECK_THROWS_AS(estimatePosePOS(plane, img), DegenerateError);
  CHECK_THROWS_AS(estimatePosePOS({line[0], line[1], line[2]}, {img[0], img[1], img[2]}), InvalidArgument);
}

TEST_CASE("estimateShapeLLS recovers interior coefficients") {
  Gen g(6);
  for (int trial = 0; trial < 10; ++trial) {
    const ShapeModel model = testsupport::toyModel(g, 500, 10);
    Eigen::VectorXd alpha(10);
    for (int i = 0; i < 10; ++i) alpha[i] = g.uniform(-2.5, 2.5) * std::sqrt(model.variances()[i]);
    const Pose pose = g.pose();
    const auto ids = pickVertices(g, 500, 30);
    const auto pts = testsupport::projectVertices(model, alpha, pose, ids);
    const Eigen::VectorXd est = estimateShapeLLS(model, makeSet(ids, pts), pose);
    CHECK((est - alpha).norm() <= 1e-6 * alpha.norm());
  }
}

TEST_CASE("estimateShapeLLS returns zero on mean-shape landmarks") {
  Gen g(7);
  const ShapeModel model = testsupport::toyModel(g, 90, 6);
  const Pose pose = g.pose();
  const auto ids = pickVertices(g, 90, 20);
  const auto pts = testsupport::projectVertices(model, Eigen::VectorXd::Zero(6), pose, ids);
  CHECK(estimateShapeLLS(model, makeSet(ids, pts), pose).norm() < 1e-9);
}

TEST_CASE("estimateShapeLLS respects the hyperbox and matches a projected-gradient reference") {
  Gen g(8);
  for (int trial = 0; trial < 30; ++trial) {
    const ShapeModel model = testsupport::toyModel(g, 120, g.integer(2, 8));
    const Eigen::Index S = model.componentCount();
    const Eigen::VectorXd sigma = model.stdDevs();
    Eigen::VectorXd alpha(S);
    for (Eigen::Index i = 0; i < S; ++i) alpha[i] = (g.coin() ? 1 : -1) * g.uniform(2.0, 6.0) * sigma[i];
    const Pose pose = g.pose();
    const auto ids = pickVertices(g, 120, static_cast<std::size_t>(g.integer(3, 15)));
    auto pts = testsupport::projectVertices(model, alpha, pose, ids);
    for (auto& p : pts) p += Eigen::Vector2d(g.normal(), g.normal());
    const double k = 3.0;
    const Eigen::VectorXd est = estimateShapeLLS(model, makeSet(ids, pts), pose, k);
    CHECK(((est.array().abs() - k * sigma.array()) <= 0.0).all());

    Eigen::MatrixXd C;
    Eigen::VectorXd h;
    bruteShapeSystem(model, ids, pts, pose, C, h);
    const Eigen::VectorXd box = Eigen::VectorXd::Constant(S, k);
    const Eigen::VectorXd ref = testsupport::projectedGradient(C, h, -box, box, 20000);
    const Eigen::VectorXd beta = est.cwiseQuotient(sigma);
    const double cEst = (C * beta - h).squaredNorm(), cRef = (C * ref - h).squaredNorm();
    CHECK(cEst <= cRef + 1e-8 * (1.0 + cRef));
    const Eigen::VectorXd clamped =
        C.colPivHouseholderQr().solve(h).cwiseMax(-box).cwiseMin(box);
    CHECK(cEst <= (C * clamped - h).squaredNorm() + 1e-9);
  }
}

TEST_CASE("fitLandmarks recovers noiseless synthetic poses and shapes") {
  Gen g(9);
  for (int trial = 0; trial < 5; ++trial) {
    const ShapeModel model = testsupport::toyModel(g, 200, 5);
    Eigen::VectorXd alpha(5);
    for (int i = 0; i < 5; ++i) alpha[i] = g.uniform(-2, 2) * std::sqrt(model.variances()[i]);
    Pose pose;
    pose.R = yawRotation(g.uniform(-1, 1)) * Eigen::AngleAxisd(g.uniform(-0.3, 0.3), Eigen::Vector3d::UnitX());
    pose.s = g.uniform(1, 3);
    pose.t = Eigen::Vector2d(g.uniform(-20, 20), g.uniform(-20, 20));
    const auto ids = pickVertices(g, 200, 40);
    const LandmarkSet lm = makeSet(ids, testsupport::projectVertices(model, alpha, pose, ids));
    const FitResult fit = fitLandmarks(model, lm);
    CHECK(fit.finalEnergy() < 1e-6);
    const Mesh a = instantiate(model, {fit.alpha}), b = instantiate(model, {alpha});
    double err = 0.0;
    for (std::size_t v = 0; v < a.vertexCount(); ++v) err = std::max(err, (a.vertex(v) - b.vertex(v)).norm());
    CHECK(err < 1e-3);
  }
}

TEST_CASE("fitLandmarks stage energies never increase under noise") {
  Gen g(10);
  for (int trial = 0; trial < 10; ++trial) {
    const ShapeModel model = testsupport::toyModel(g, 150, 6);
    const Eigen::VectorXd alpha = g.vec(6).cwiseProduct(model.stdDevs());
    const Pose pose = g.pose();
    const auto ids = pickVertices(g, 150, 25);
    auto pts = testsupport::projectVertices(model, alpha, pose, ids);
    for (auto& p : pts) p += 2.0 * Eigen::Vector2d(g.normal(), g.normal());
    const FitResult fit = fitLandmarks(model, makeSet(ids, pts));
    REQUIRE(fit.stages.size() == 7u);
    CHECK(fit.stages.front().stage == "pos");
    CHECK(fit.stages.back().stage == "nonlinear");
    for (std::size_t i = 1; i < fit.stages.size(); ++i) CHECK(fit.stages[i].energy <= fit.stages[i - 1].energy);
    CHECK(landmarkEnergy(model, makeSet(ids, pts), fit.alpha, fit.pose) ==
          doctest::Approx(fit.finalEnergy()).epsilon(1e-9));
    CHECK(((fit.alpha.array().abs() - 3.0 * model.stdDevs().array()) <= 0.0).all());
  }
}

TEST_CASE("fitLandmarks on mean-shape landmarks keeps alpha at zero") {
  Gen g(11);
  const ShapeModel model = testsupport::toyModel(g, 100, 4);
  const auto ids = pickVertices(g, 100, 20);
  const LandmarkSet lm = makeSet(ids, testsupport::projectVertices(model, Eigen::VectorXd::Zero(4), Pose{}, ids));
  const FitResult fit = fitLandmarks(model, lm);
  CHECK(fit.alpha.cwiseQuotient(model.stdDevs()).norm() < 1e-5);
}

TEST_CASE("landmark objective gradient matches central differences") {
  Gen g(12);
  for (int trial = 0; trial < 20; ++trial) {
    const ShapeModel model = testsupport::toyModel(g, 60, 4);
    const auto ids = pickVertices(g, 60, 12);
    std::vector<Eigen::Vector2d> pts;
    for (std::size_t i = 0; i < ids.size(); ++i) pts.emplace_back(g.uniform(-80, 80), g.uniform(-80, 80));
    Objective obj(model);
    obj.setLandmarks(ids, pts, 1.0);
    FitParams params{g.vec(4).cwiseProduct(model.stdDevs()), g.pose()};
    const Eigen::VectorXd x = packParams(model, params);
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    obj.evaluate(x, r, &J);
    const Eigen::VectorXd grad = 2.0 * J.transpose() * r;
    Eigen::VectorXd fd(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += 1e-6;
      xm[i] -= 1e-6;
      fd[i] = (obj.energy(xp) - obj.energy(xm)) / 2e-6;
    }
    CHECK((grad - fd).norm() <= 1e-4 * std::max(1.0, fd.norm()));
    CHECK(obj.energy(x) == doctest::Approx(landmarkEnergy(model, makeSet(ids, pts), params.alpha,
                                                          params.pose)).epsilon(1e-10));
  }
}

TEST_CASE("landmark CSV round trip and errors") {
  const auto dir = std::filesystem::temp_directory_path() / "edgefit_test_landmarks";
  std::filesystem::create_directories(dir);
  const LandmarkSet s({{7, {1.25, -3.5}}, {2, {1.0 / 3.0, 1e6}}});
  writeLandmarks(s, dir / "a.csv");
  const LandmarkSet back = readLandmarks(dir / "a.csv");
  REQUIRE(back.size() == 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.entries()[i].vertex == s.entries()[i].vertex);
    CHECK(back.entries()[i].point == s.entries()[i].point);
  }

  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return dir / name;
  };
  CHECK(readLandmarks(write("b.csv", "# comment\n3, 1.5, 2\n\n4,0,0 # trailing\n")).size() == 2u);
  CHECK(readLandmarks(write("c.csv", "3,1,2\n")).size() == 1u);
  CHECK_THROWS_AS(readLandmarks(write("d.csv", "3,1\n")), ParseError);
  CHECK_THROWS_AS(readLandmarks(write("e.csv", "3,1,2\nx,y,z\n")), ParseError);
  CHECK_THROWS_AS(readLandmarks(write("f.csv", "-1,1,2\n")), ParseError);
  CHECK_THROWS_AS(readLandmarks(write("g.csv", "1.5,1,2\n")), ParseError);
  CHECK_THROWS_AS(readLandmarks(write("h.csv", "1,1,2\n1,3,4\n")), ParseError);
  try {
    readLandmarks(dir / "missing.csv");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("missing.csv") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
