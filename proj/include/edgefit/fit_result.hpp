#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "edgefit/camera.hpp"

namespace edgefit {

struct StageEnergy {
  std::string stage;
  double energy = 0.0;
};

/// Outcome of any fitting method plus per-stage diagnostics.
struct FitResult {
  std::string method;
  Eigen::VectorXd alpha;
  Pose pose;
  /// Objective value after each stage, in execution order.
  std::vector<StageEnergy> stages;
  /// Kept correspondences per ICEF iteration, or boundary size per hybrid round.
  std::vector<int> correspondenceCounts;
  std::vector<std::string> warnings;

  double finalEnergy() const { return stages.empty() ? 0.0 : stages.back().energy; }
  void record(std::string stage, double energy) { stages.push_back({std::move(stage), energy}); }
};

std::string fitResultToJson(const FitResult& result);
FitResult fitResultFromJson(const std::string& text);
void writeFitResult(const FitResult& result, const std::filesystem::path& path);
FitResult readFitResult(const std::filesystem::path& path);

}  // namespace edgefit
