#include "edgefit/fit_result.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "edgefit/errors.hpp"

namespace edgefit {

using nlohmann::json;

namespace {

json vectorJson(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vectorFrom(const json& j, const char* field) {
  if (!j.is_array()) throw ParseError(field, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(field, "expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace

std::string fitResultToJson(const FitResult& result) {
  json j;
  j["method"] = result.method;
  j["alpha"] = vectorJson(result.alpha);
  j["axis_angle"] = vectorJson(matrixToAxisAngle(result.pose.R));
  j["t"] = vectorJson(result.pose.t);
  j["s"] = result.pose.s;
  json stages = json::array();
  for (const auto& st : result.stages) stages.push_back({{"stage", st.stage}, {"energy", st.energy}});
  j["stages"] = stages;
  j["final_energy"] = result.finalEnergy();
  j["correspondence_counts"] = result.correspondenceCounts;
  j["warnings"] = result.warnings;
  return j.dump(2);
}

FitResult fitResultFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("fit result", e.what());
  }
  FitResult r;
  try {
    r.method = j.at("method").get<std::string>();
    r.alpha = vectorFrom(j.at("alpha"), "alpha");
    const Eigen::VectorXd aa = vectorFrom(j.at("axis_angle"), "axis_angle");
    const Eigen::VectorXd t = vectorFrom(j.at("t"), "t");
    if (aa.size() != 3) throw ParseError("axis_angle", "expected 3 values");
    if (t.size() != 2) throw ParseError("t", "expected 2 values");
    r.pose = toMatrix(AxisAnglePose{aa, t, j.at("s").get<double>()});
    for (const auto& st : j.value("stages", json::array())) {
      r.record(st.at("stage").get<std::string>(), st.at("energy").get<double>());
    }
    r.correspondenceCounts = j.value("correspondence_counts", std::vector<int>{});
    r.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ParseError("fit result", e.what());
  }
  return r;
}

void writeFitResult(const FitResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << fitResultToJson(result) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

FitResult readFitResult(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return fitResultFromJson(ss.str());
}

}  // namespace edgefit
