#include "edgefit/eval.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "edgefit/errors.hpp"

namespace edgefit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t mixSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = seed * 0x9E3779B97F4A7C15ull;
  h ^= (a + 0x632BE59BD9B4E019ull) + (h << 6) + (h >> 2);
  h ^= (b + 0x85EBCA77C2B2AE63ull) + (h << 6) + (h >> 2);
  return h;
}

Eigen::Matrix3Xd pointMatrix(const Mesh& m) {
  return Eigen::Map<const Eigen::Matrix3Xd>(m.vertices.data(), 3, static_cast<Index>(m.vertexCount()));
}

std::string formatNumber(double v) {
  if (std::isnan(v)) return "NA";
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

}  // namespace

ProcrustesResult procrustesAlign(const Mesh& source, const Mesh& target) {
  if (source.vertexCount() != target.vertexCount()) throw InvalidArgument("procrustesAlign: vertex count mismatch");
  if (source.vertexCount() == 0) throw DegenerateError("procrustesAlign: empty meshes");
  const Eigen::Matrix3Xd X = pointMatrix(source);
  const Eigen::Matrix3Xd Y = pointMatrix(target);
  const double n = static_cast<double>(X.cols());
  const Eigen::Vector3d mx = X.rowwise().mean();
  const Eigen::Vector3d my = Y.rowwise().mean();
  const Eigen::Matrix3Xd Xc = X.colwise() - mx;
  const Eigen::Matrix3Xd Yc = Y.colwise() - my;
  const double varX = Xc.squaredNorm() / n;
  const double varY = Yc.squaredNorm() / n;
  const double tiny = 1e-300;
  if (!(varX > tiny) || !(varY > tiny)) throw DegenerateError("procrustesAlign: all points coincide");

  const Eigen::Matrix3d cov = Yc * Xc.transpose() / n;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d d = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d[2] = -1.0;

  ProcrustesResult out;
  out.transform.R = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  out.transform.scale = svd.singularValues().dot(d) / varX;
  out.transform.t = my - out.transform.scale * out.transform.R * mx;
  Eigen::Matrix3Xd A = (out.transform.scale * out.transform.R * X).colwise() + out.transform.t;
  out.aligned.topology = source.topology;
  out.aligned.vertices = Eigen::Map<const Eigen::VectorXd>(A.data(), A.size());
  out.residual = (A - Y).squaredNorm();
  return out;
}

double meanVertexError(const Mesh& a, const Mesh& b) {
  if (a.vertexCount() != b.vertexCount()) throw InvalidArgument("meanVertexError: vertex count mismatch");
  if (a.vertexCount() == 0) throw InvalidArgument("meanVertexError: empty meshes");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.vertexCount(); ++i) sum += (a.vertex(i) - b.vertex(i)).norm();
  return sum / static_cast<double>(a.vertexCount());
}

const char* methodName(Method m) {
  switch (m) {
    case Method::MeanShape: return "mean-shape";
    case Method::Landmarks: return "landmarks";
    case Method::Icef: return "icef";
    case Method::Hard: return "hard";
    case Method::Soft: return "soft";
  }
  return "?";
}

Method parseMethod(const std::string& name) {
  if (name == "mean-shape" || name == "mean") return Method::MeanShape;
  if (name == "landmarks" || name == "landmarks-only") return Method::Landmarks;
  if (name == "icef") return Method::Icef;
  if (name == "hard") return Method::Hard;
  if (name == "soft") return Method::Soft;
  throw InvalidArgument("unknown method '" + name + "'");
}

std::vector<Method> allMethods() {
  return {Method::MeanShape, Method::Landmarks, Method::Icef, Method::Hard, Method::Soft};
}

void ProtocolConfig::validate() const {
  if (yawAngles.empty()) throw InvalidArgument("protocol: no yaw angles");
  for (double a : yawAngles) {
    if (!(std::abs(a) < 90.0)) throw InvalidArgument("protocol: yaw angles must lie in (-90, 90)");
  }
  if (noiseSigmas.empty()) throw InvalidArgument("protocol: no noise levels");
  for (double s : noiseSigmas) {
    if (!(s >= 0.0)) throw InvalidArgument("protocol: noise sigma must be non-negative");
  }
  if (subjects < 1) throw InvalidArgument("protocol: subjects must be >= 1");
  if (imageSize.empty()) throw InvalidArgument("protocol: empty image size");
}

SceneFitter::SceneFitter(const ShapeModel& model, const GrayImage& image, const LandmarkSet& landmarks,
                         const ProtocolConfig& config)
    : model_(model), image_(image), landmarks_(landmarks), config_(config) {}

const EdgeSet& SceneFitter::edges() {
  if (!edges_) edges_ = cannyEdges(image_);
  return *edges_;
}

const FitResult& SceneFitter::fit(Method method) {
  if (auto it = fits_.find(method); it != fits_.end()) return it->second;
  FitResult r;
  auto paramsOf = [](const FitResult& f) { return FitParams{f.alpha, f.pose}; };
  switch (method) {
    case Method::MeanShape:
      r.method = methodName(method);
      r.alpha = Eigen::VectorXd::Zero(model_.componentCount());
      break;
    case Method::Landmarks:
      r = fitLandmarks(model_, landmarks_, config_.fit);
      break;
    case Method::Icef: {
      IcefOptions opts = config_.icef;
      opts.fit = config_.fit;
      r = icefFit(model_, landmarks_, edges(), paramsOf(fit(Method::Landmarks)), opts);
      break;
    }
    case Method::Hard:
      r = hybridFitHard(model_, landmarks_, edges(), paramsOf(fit(Method::Icef)), config_.hard);
      break;
    case Method::Soft:
      r = hybridFitSoft(model_, landmarks_, image_, paramsOf(fit(Method::Landmarks)), config_.soft);
      break;
  }
  r.method = methodName(method);
  return fits_.emplace(method, std::move(r)).first->second;
}

double ProtocolResult::cellMean(Method m, double value) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : records) {
    if (r.method == m && r.ok() && axisValue(r) == value) {
      sum += r.error;
      ++n;
    }
  }
  return n ? sum / n : kNaN;
}

double ProtocolResult::overallMean(Method m) const {
  double sum = 0.0;
  int n = 0;
  for (double a : axis) {
    const double c = cellMean(m, a);
    if (!std::isnan(c)) {
      sum += c;
      ++n;
    }
  }
  return n ? sum / n : kNaN;
}

std::size_t ProtocolResult::failures() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.ok() ? 0 : 1;
  return n;
}

ProtocolResult runProtocol(const ShapeModel& model, const std::vector<std::uint32_t>& landmarkIds,
                           const ProtocolConfig& config, const std::vector<Method>& methods, int jobs) {
  config.validate();
  if (methods.empty()) throw InvalidArgument("runProtocol: no methods requested");
  ProtocolResult result;
  result.methods = methods;
  result.sigmaAxis = config.noiseSigmas.size() > 1;
  result.axis = result.sigmaAxis ? config.noiseSigmas : config.yawAngles;

  const std::size_t nYaw = config.yawAngles.size(), nSigma = config.noiseSigmas.size();
  const auto nSubj = static_cast<std::size_t>(config.subjects);
  const std::size_t nMethods = methods.size();
  result.records.resize(nMethods * nSigma * nYaw * nSubj);
  auto slot = [&](std::size_t m, std::size_t si, std::size_t yi, std::size_t subj) {
    return ((m * nSigma + si) * nYaw + yi) * nSubj + subj;
  };

  std::vector<Eigen::VectorXd> subjects(nSubj);
  for (std::size_t k = 0; k < nSubj; ++k) subjects[k] = sampleSubject(model, mixSeed(config.seed, 1, k));

  auto runTask = [&](std::size_t task) {
    const std::size_t subj = task / nYaw, yi = task % nYaw;
    const double yaw = config.yawAngles[yi];
    std::string sceneFailure;
    SyntheticScene scene;
    Mesh truth;
    try {
      truth = instantiate(model, ShapeCoefficients{subjects[subj]});
      scene = renderScene(model, landmarkIds, subjects[subj], yaw, config.imageSize);
    } catch (const std::exception& e) {
      sceneFailure = std::string("scene: ") + e.what();
    }
    for (std::size_t si = 0; si < nSigma; ++si) {
      const double sigma = config.noiseSigmas[si];
      LandmarkSet noisy;
      if (sceneFailure.empty()) noisy = addLandmarkNoise(scene.landmarks, sigma, mixSeed(config.seed, 2, task));
      SceneFitter fitter(model, scene.image, noisy, config);
      for (std::size_t m = 0; m < nMethods; ++m) {
        ExperimentRecord& rec = result.records[slot(m, si, yi, subj)];
        rec.method = methods[m];
        rec.subject = static_cast<int>(subj);
        rec.yawDeg = yaw;
        rec.sigma = sigma;
        rec.error = kNaN;
        rec.wallTime = kNaN;
        if (!sceneFailure.empty()) {
          rec.failure = sceneFailure;
          continue;
        }
        try {
          const auto start = std::chrono::steady_clock::now();
          const FitResult& fit = fitter.fit(methods[m]);
          const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
          const Mesh fitted = instantiate(model, ShapeCoefficients{fit.alpha});
          rec.error = meanVertexError(procrustesAlign(fitted, truth).aligned, truth);
          if (config.recordWallTime) rec.wallTime = took.count();
        } catch (const std::exception& e) {
          rec.failure = e.what();
        }
      }
    }
  };

  const std::size_t tasks = nSubj * nYaw;
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks)));
  if (workers == 1) {
    for (std::size_t t = 0; t < tasks; ++t) runTask(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t; (t = next.fetch_add(1)) < tasks;) runTask(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  return result;
}

std::string resultsCsv(const ProtocolResult& result) {
  std::ostringstream out;
  out << "method,angle_or_sigma,subject,error,walltime\n";
  for (const auto& r : result.records) {
    out << methodName(r.method) << ',' << formatNumber(result.axisValue(r)) << ',' << r.subject << ','
        << formatNumber(r.error) << ',' << formatNumber(r.wallTime) << '\n';
  }
  return out.str();
}

std::string summaryCsv(const ProtocolResult& result) {
  std::ostringstream out;
  out << "method";
  for (double a : result.axis) out << ',' << formatNumber(a);
  out << ",mean\n";
  for (Method m : result.methods) {
    out << methodName(m);
    for (double a : result.axis) out << ',' << formatNumber(result.cellMean(m, a));
    out << ',' << formatNumber(result.overallMean(m)) << '\n';
  }
  return out.str();
}

std::string summaryDat(const ProtocolResult& result) {
  std::ostringstream out;
  out << "# " << (result.sigmaAxis ? "sigma" : "yaw");
  for (Method m : result.methods) out << ' ' << methodName(m);
  out << '\n';
  for (double a : result.axis) {
    out << formatNumber(a);
    for (Method m : result.methods) out << ' ' << formatNumber(result.cellMean(m, a));
    out << '\n';
  }
  return out.str();
}

}  // namespace edgefit
