#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "edgefit/fit_hard.hpp"
#include "edgefit/fit_soft.hpp"
#include "edgefit/landmark_fit.hpp"
#include "edgefit/model.hpp"
#include "edgefit/synth.hpp"

namespace edgefit {

struct Similarity {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double scale = 1.0;
  Eigen::Vector3d apply(const Eigen::Vector3d& v) const { return scale * (R * v) + t; }
};

struct ProcrustesResult {
  Mesh aligned;
  Similarity transform;
  double residual = 0.0;  // sum of squared vertex distances after alignment
};

/// Similarity transform of `source` onto `target` (vertex correspondence by
/// index) minimising the squared distances. Throws DegenerateError when
/// either point set collapses to a point.
ProcrustesResult procrustesAlign(const Mesh& source, const Mesh& target);

/// Mean per-vertex Euclidean distance.
double meanVertexError(const Mesh& a, const Mesh& b);

enum class Method : std::uint8_t { MeanShape, Landmarks, Icef, Hard, Soft };
const char* methodName(Method m);
/// Accepts the names produced by methodName plus "landmarks-only".
Method parseMethod(const std::string& name);
std::vector<Method> allMethods();

struct ProtocolConfig {
  std::vector<double> yawAngles{0, -15, 15, -30, 30, -50, 50, -70, 70};
  std::vector<double> noiseSigmas{0.0};
  int subjects = 10;
  std::uint64_t seed = 1;
  ImageSize imageSize{512, 512};
  FitOptions fit;
  IcefOptions icef;
  HybridOptions hard;
  SoftFitConfig soft;
  /// Wall times make the CSV run-dependent, so they are off by default.
  bool recordWallTime = false;
  void validate() const;
};

struct ExperimentRecord {
  Method method = Method::MeanShape;
  int subject = 0;
  double yawDeg = 0.0;
  double sigma = 0.0;
  double error = 0.0;     // NaN when the fit failed
  double wallTime = 0.0;  // seconds, NaN when not recorded
  std::string failure;
  bool ok() const { return failure.empty(); }
};

struct ProtocolResult {
  std::vector<Method> methods;
  bool sigmaAxis = false;  // columns are noise levels rather than yaw angles
  std::vector<double> axis;
  std::vector<ExperimentRecord> records;

  double axisValue(const ExperimentRecord& r) const { return sigmaAxis ? r.sigma : r.yawDeg; }
  /// Mean error of successful records in one column; NaN if none.
  double cellMean(Method m, double axisValue) const;
  /// Mean over every successful record of the method.
  double overallMean(Method m) const;
  std::size_t failures() const;
};

/// Scene (subject, yaw, sigma) errors for every requested method. Subjects
/// and landmark noise derive from config.seed; scenes run on up to `jobs`
/// threads and the record order is fixed regardless of scheduling.
ProtocolResult runProtocol(const ShapeModel& model, const std::vector<std::uint32_t>& landmarkIds,
                           const ProtocolConfig& config, const std::vector<Method>& methods, int jobs = 1);

/// `method,angle_or_sigma,subject,error,walltime`, one line per record.
std::string resultsCsv(const ProtocolResult& result);
/// One row per method, one column per yaw (or sigma), plus the mean column.
std::string summaryCsv(const ProtocolResult& result);
/// Whitespace-separated version of the summary for plotting.
std::string summaryDat(const ProtocolResult& result);

/// Fits one scene with any method, caching the edge map, the distance
/// stack and intermediate fits (landmark-only feeds ICEF and soft, ICEF feeds hard).
class SceneFitter {
 public:
  SceneFitter(const ShapeModel& model, const GrayImage& image, const LandmarkSet& landmarks,
              const ProtocolConfig& config);
  const FitResult& fit(Method method);
  const EdgeSet& edges();

 private:
  const ShapeModel& model_;
  const GrayImage& image_;
  const LandmarkSet& landmarks_;
  const ProtocolConfig& config_;
  std::optional<EdgeSet> edges_;
  std::map<Method, FitResult> fits_;
};

}  // namespace edgefit
