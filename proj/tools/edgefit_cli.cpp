// edgefit: fit, synthesise and evaluate from the command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "edgefit/contour.hpp"
#include "edgefit/edgemap.hpp"
#include "edgefit/errors.hpp"
#include "edgefit/eval.hpp"
#include "edgefit/fit_hard.hpp"
#include "edgefit/fit_soft.hpp"
#include "edgefit/landmark_fit.hpp"
#include "edgefit/model.hpp"
#include "edgefit/synth.hpp"

namespace fs = std::filesystem;
using namespace edgefit;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kParse = 3, kDegenerate = 4, kOther = 5 };

struct Common {
  std::string out = "out";
  std::uint64_t seed = 1;
  double w1 = 0.15, w2 = 0.45, w3 = 0.40;
  int icefIters = 10;
  int verbosity = 0;
};

struct FitArgs {
  std::string model, image, landmarks, method = "hard";
};

struct SynthArgs {
  std::size_t modelN = 4000;
  int modelS = 30;
  int subjects = 2;
  std::vector<double> angles{0, -15, 15, -30, 30, -50, 50, -70, 70};
  double sigma = 0.0;
  int size = 512;
};

struct EvalArgs {
  std::string model;
  std::vector<double> sigmas{0.0};
  std::vector<std::string> methods{"mean-shape", "landmarks", "icef", "hard", "soft"};
  int jobs = 1;
  bool walltime = false;
};

void writeText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

void ensureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory");
}

HybridWeights weightsOf(const Common& c) {
  HybridWeights w{c.w1, c.w2, c.w3};
  w.validate();
  return w;
}

RgbImage toRgb(const GrayImage& img) {
  RgbImage out(img.size());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(img(x, y), 0.0, 1.0) * 255.0));
      out(x, y) = {v, v, v};
    }
  }
  return out;
}

void mark(RgbImage& img, const Eigen::Vector2d& p, std::array<std::uint8_t, 3> colour) {
  const int cx = static_cast<int>(std::lround(p.x())), cy = static_cast<int>(std::lround(p.y()));
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (img.contains(cx + dx, cy + dy)) img(cx + dx, cy + dy) = colour;
    }
  }
}

// Image edges in blue, boundary vertices with a kept match in green, dropped matches in red.
RgbImage correspondenceOverlay(const GrayImage& image, const EdgeSet& edges, const EdgeCorrespondences& corr) {
  RgbImage out = toRgb(image);
  for (const auto& e : edges.pixels()) out(e.x, e.y) = {0, 0, 255};
  for (const auto& c : corr.pairs) {
    mark(out, c.projected, c.status == MatchStatus::Kept ? std::array<std::uint8_t, 3>{0, 200, 0}
                                                         : std::array<std::uint8_t, 3>{230, 0, 0});
  }
  return out;
}

struct Inputs {
  ShapeModel model;
  GrayImage image;
  LandmarkSet landmarks;
};

Inputs loadInputs(const FitArgs& a) {
  return {loadModel(a.model), readImage(a.image), readLandmarks(a.landmarks)};
}

ProtocolConfig protocolOf(const Common& c, const SynthArgs& s, const EvalArgs& e) {
  ProtocolConfig cfg;
  cfg.yawAngles = s.angles;
  cfg.noiseSigmas = e.sigmas;
  cfg.subjects = s.subjects;
  cfg.seed = c.seed;
  cfg.imageSize = {s.size, s.size};
  cfg.icef.iterations = c.icefIters;
  cfg.hard.weights = weightsOf(c);
  cfg.soft.weights = cfg.hard.weights;
  cfg.recordWallTime = e.walltime;
  return cfg;
}

void writeFitOutputs(const Inputs& in, const FitResult& r, SceneFitter& fitter, const fs::path& dir,
                     const std::string& prefix) {
  writeFitResult(r, dir / (prefix + "result.json"));
  writeObj(instantiate(in.model, ShapeCoefficients{r.alpha}), dir / (prefix + "mesh.obj"));
  const EdgeSet& edges = fitter.edges();
  if (!edges.empty()) {
    const auto corr = icefCorrespond(in.model, r.alpha, r.pose, edges, in.image.size());
    writePpm(correspondenceOverlay(in.image, edges, corr), dir / (prefix + "overlay.ppm"));
  }
}

int cmdFit(const Common& c, const FitArgs& a) {
  const Method method = parseMethod(a.method);
  if (method == Method::MeanShape) throw InvalidArgument("fit: method must be landmarks, icef, hard or soft");
  const Inputs in = loadInputs(a);
  ensureDir(c.out);
  ProtocolConfig cfg = protocolOf(c, SynthArgs{}, EvalArgs{});
  SceneFitter fitter(in.model, in.image, in.landmarks, cfg);
  const FitResult& r = fitter.fit(method);
  writeFitOutputs(in, r, fitter, c.out, "");
  {
    const BinaryImage mask = fitter.edges().toBinary();
    GrayImage g(mask.size(), 0.0);
    for (std::size_t i = 0; i < mask.data().size(); ++i) g.data()[i] = mask.data()[i] ? 1.0 : 0.0;
    writePgm(g, fs::path(c.out) / "edges.pgm");
  }
  if (c.verbosity > 0) {
    for (const auto& st : r.stages) std::cerr << st.stage << ": " << st.energy << '\n';
  }
  std::cout << "method " << r.method << " final energy " << r.finalEnergy() << '\n';
  return kOk;
}

int cmdCompare(const Common& c, const FitArgs& a) {
  const Inputs in = loadInputs(a);
  ensureDir(c.out);
  ProtocolConfig cfg = protocolOf(c, SynthArgs{}, EvalArgs{});
  SceneFitter fitter(in.model, in.image, in.landmarks, cfg);
  nlohmann::json summary;
  for (Method m : {Method::Hard, Method::Soft}) {
    const FitResult& r = fitter.fit(m);
    writeFitOutputs(in, r, fitter, c.out, std::string(methodName(m)) + "_");
    summary[methodName(m)] = {{"final_energy", r.finalEnergy()},
                              {"landmark_energy", landmarkEnergy(in.model, in.landmarks, r.alpha, r.pose)}};
    std::cout << methodName(m) << ": final energy " << r.finalEnergy() << ", landmark energy "
              << landmarkEnergy(in.model, in.landmarks, r.alpha, r.pose) << '\n';
  }
  writeText(fs::path(c.out) / "compare.json", summary.dump(2) + "\n");
  return kOk;
}

std::string angleTag(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+04d", static_cast<int>(std::lround(a)));
  return buf;
}

int cmdSynth(const Common& c, const SynthArgs& s) {
  const fs::path out(c.out);
  ensureDir(out);
  const SyntheticModel sm = makeSyntheticModel(s.modelN, s.modelS, c.seed);
  saveModel(sm.model, out / "model.e3dm");
  writeObj(sm.model.meanMesh(), out / "mean.obj");
  EvalArgs e;
  const ProtocolConfig cfg = protocolOf(c, s, e);
  cfg.validate();
  for (int k = 0; k < s.subjects; ++k) {
    const Eigen::VectorXd alpha = sampleSubject(sm.model, c.seed * 1000003ull + static_cast<std::uint64_t>(k));
    for (std::size_t i = 0; i < s.angles.size(); ++i) {
      SyntheticScene scene = renderScene(sm.model, sm.landmarkIds, alpha, s.angles[i], cfg.imageSize);
      scene.landmarks = addLandmarkNoise(scene.landmarks, s.sigma, c.seed * 7919ull + static_cast<std::uint64_t>(k) * 131ull + i);
      const fs::path dir = out / ("subject" + std::to_string(k) + "_yaw" + angleTag(s.angles[i]));
      writeSceneBundle(scene, dir);
    }
  }
  std::cout << "wrote " << s.subjects * s.angles.size() << " scenes to " << out.string() << '\n';
  return kOk;
}

int cmdEval(const Common& c, const SynthArgs& s, const EvalArgs& e) {
  const fs::path out(c.out);
  ensureDir(out);
  std::vector<Method> methods;
  for (const auto& m : e.methods) methods.push_back(parseMethod(m));
  const ProtocolConfig cfg = protocolOf(c, s, e);
  ShapeModel model;
  std::vector<std::uint32_t> ids;
  if (e.model.empty()) {
    SyntheticModel sm = makeSyntheticModel(s.modelN, s.modelS, c.seed);
    model = std::move(sm.model);
    ids = std::move(sm.landmarkIds);
  } else {
    // Landmark ids for an external model come from a sidecar next to it.
    model = loadModel(e.model);
    const fs::path idsPath = fs::path(e.model).replace_extension(".landmarks.json");
    std::ifstream in(idsPath);
    if (!in) throw IoError(idsPath.string(), "cannot open landmark id list");
    try {
      ids = nlohmann::json::parse(in).get<std::vector<std::uint32_t>>();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(idsPath.filename().string(), ex.what());
    }
  }
  const ProtocolResult r = runProtocol(model, ids, cfg, methods, e.jobs);
  writeText(out / "results.csv", resultsCsv(r));
  writeText(out / "summary.csv", summaryCsv(r));
  writeText(out / "summary.dat", summaryDat(r));
  std::cout << summaryCsv(r);
  if (r.failures() > 0) std::cerr << r.failures() << " scene fits failed; see results.csv\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shape model fitting to landmarks and image edges"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file mirroring the command-line flags (flags win)");
  Common common;
  FitArgs fitArgs;
  SynthArgs synthArgs;
  EvalArgs evalArgs;

  auto addCommon = [&](CLI::App* sub) {
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    sub->add_option("--w1", common.w1, "Landmark weight")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--w2", common.w2, "Edge weight")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--w3", common.w3, "Prior weight")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--icef-iters", common.icefIters, "ICEF iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_flag("-v,--verbose", common.verbosity, "More output");
  };
  auto addInputs = [&](CLI::App* sub, bool withMethod) {
    sub->add_option("--model", fitArgs.model, "Model file (.e3dm or .json)")->required();
    sub->add_option("--image", fitArgs.image, "Image (PGM or PNG)")->required();
    sub->add_option("--landmarks", fitArgs.landmarks, "Landmark CSV")->required();
    if (withMethod) {
      sub->add_option("--method", fitArgs.method, "landmarks | icef | hard | soft")
          ->capture_default_str()
          ->check(CLI::IsMember({"landmarks", "icef", "hard", "soft"}));
    }
  };
  auto addSynth = [&](CLI::App* sub) {
    sub->add_option("--model-n", synthArgs.modelN, "Synthetic model vertex count (rounded up)")->capture_default_str();
    sub->add_option("--model-s", synthArgs.modelS, "Synthetic model component count")->capture_default_str();
    sub->add_option("--subjects", synthArgs.subjects, "Subjects")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--angles", synthArgs.angles, "Yaw angles in degrees")->delimiter(',')->capture_default_str();
    sub->add_option("--size", synthArgs.size, "Image width and height")->capture_default_str()->check(CLI::PositiveNumber);
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit the model to one image");
  addCommon(fit);
  addInputs(fit, true);
  CLI::App* compare = app.add_subcommand("compare", "Hard and soft fits side by side on one image");
  addCommon(compare);
  addInputs(compare, false);
  CLI::App* synth = app.add_subcommand("synth", "Write synthetic scene bundles");
  addCommon(synth);
  addSynth(synth);
  synth->add_option("--sigma", synthArgs.sigma, "Landmark noise (pixels)")->capture_default_str()->check(CLI::NonNegativeNumber);
  CLI::App* eval = app.add_subcommand("eval", "Run the synthetic evaluation protocol");
  addCommon(eval);
  addSynth(eval);
  eval->add_option("--model", evalArgs.model, "External model; ids are read from <model>.landmarks.json");
  eval->add_option("--sigmas", evalArgs.sigmas, "Landmark noise levels")->delimiter(',')->capture_default_str();
  eval->add_option("--methods", evalArgs.methods, "Methods to run")->delimiter(',')->capture_default_str()
      ->check(CLI::IsMember({"mean-shape", "landmarks", "icef", "hard", "soft"}));
  eval->add_option("--jobs", evalArgs.jobs, "Parallel scenes")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_flag("--walltime", evalArgs.walltime, "Record wall times (output no longer reproducible)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*fit) return cmdFit(common, fitArgs);
    if (*compare) return cmdCompare(common, fitArgs);
    if (*synth) return cmdSynth(common, synthArgs);
    if (*eval) return cmdEval(common, synthArgs, evalArgs);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const DegenerateError& e) {
    std::cerr << "degenerate input: " << e.what() << '\n';
    return kDegenerate;
  } catch (const NoEdgesError& e) {
    std::cerr << "degenerate input: " << e.what() << '\n';
    return kDegenerate;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kUsage;
}
