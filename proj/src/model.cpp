#include "edgefit/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "edgefit/errors.hpp"

namespace edgefit {

namespace {

constexpr char kMagic[4] = {'E', '3', 'D', 'M'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "model I/O assumes a little-endian host");

}  // namespace

std::shared_ptr<const Topology> Topology::build(std::vector<Triangle> triangles,
                                                std::size_t vertexCount) {
  auto topo = std::shared_ptr<Topology>(new Topology());
  topo->vertexCount_ = vertexCount;
  topo->vertexFaces_.resize(vertexCount);

  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> edgeIndex;
  for (std::size_t f = 0; f < triangles.size(); ++f) {
    const auto& tri = triangles[f];
    for (auto v : tri) {
      if (v >= vertexCount) {
        throw InvalidArgument("triangle " + std::to_string(f) + " references vertex " +
                              std::to_string(v) + " >= " + std::to_string(vertexCount));
      }
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw TopologyError("triangle " + std::to_string(f) + " repeats a vertex");
    }
    for (int k = 0; k < 3; ++k) {
      topo->vertexFaces_[tri[k]].push_back(static_cast<std::uint32_t>(f));
      std::uint32_t a = tri[k], b = tri[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      auto [it, inserted] = edgeIndex.try_emplace({a, b}, topo->edges_.size());
      if (inserted) {
        topo->edges_.push_back({a, b, static_cast<std::int32_t>(f), -1});
      } else {
        auto& e = topo->edges_[it->second];
        if (e.face1 >= 0) {
          throw TopologyError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                              ") is shared by more than two triangles");
        }
        e.face1 = static_cast<std::int32_t>(f);
      }
    }
  }
  topo->triangles_ = std::move(triangles);
  return topo;
}

bool Topology::isClosed() const {
  return std::none_of(edges_.begin(), edges_.end(), [](const Edge& e) { return e.onBoundary(); });
}

ShapeModel::ShapeModel(Eigen::VectorXd meanShape, Eigen::MatrixXd components,
                       Eigen::VectorXd variances, std::vector<Triangle> triangles)
    : mean_(std::move(meanShape)),
      components_(std::move(components)),
      variances_(std::move(variances)) {
  if (mean_.size() == 0 || mean_.size() % 3 != 0) {
    throw ParseError("meanShape", "length must be a positive multiple of 3");
  }
  if (components_.rows() != mean_.size()) {
    throw ParseError("components", "expected " + std::to_string(mean_.size()) + " rows, got " +
                                       std::to_string(components_.rows()));
  }
  if (variances_.size() != components_.cols()) {
    throw ParseError("variances", "expected length S=" + std::to_string(components_.cols()) +
                                      ", got " + std::to_string(variances_.size()));
  }
  for (Index i = 0; i < variances_.size(); ++i) {
    if (!(variances_[i] > 0.0) || !std::isfinite(variances_[i])) {
      throw ParseError("variances", "variance " + std::to_string(i) + " must be positive");
    }
    if (i > 0 && variances_[i] > variances_[i - 1]) {
      throw ParseError("variances", "variances must be non-increasing");
    }
  }
  if (!mean_.allFinite()) throw ParseError("meanShape", "non-finite value");
  if (!components_.allFinite()) throw ParseError("components", "non-finite value");
  try {
    topology_ = Topology::build(std::move(triangles), vertexCount());
  } catch (const InvalidArgument& e) {
    throw ParseError("triangles", e.what());
  }
}

Mesh instantiate(const ShapeModel& model, const ShapeCoefficients& coeffs) {
  if (coeffs.alpha.size() != model.componentCount()) {
    throw InvalidArgument("instantiate: expected " + std::to_string(model.componentCount()) +
                          " coefficients, got " + std::to_string(coeffs.alpha.size()));
  }
  Eigen::VectorXd vertices = model.components() * coeffs.alpha + model.meanShape();
  return Mesh{std::move(vertices), model.topology()};
}

std::pair<Eigen::Matrix<double, 3, Eigen::Dynamic>, Eigen::Vector3d> vertexSubmatrix(
    const ShapeModel& model, std::size_t vertex) {
  if (vertex >= model.vertexCount()) {
    throw InvalidArgument("vertexSubmatrix: vertex " + std::to_string(vertex) +
                          " out of range [0, " + std::to_string(model.vertexCount()) + ")");
  }
  const Index row = 3 * static_cast<Index>(vertex);
  return {model.components().middleRows<3>(row), model.meanShape().segment<3>(row)};
}

Eigen::Vector3d instantiateVertex(const ShapeModel& model, const Eigen::VectorXd& alpha,
                                  std::size_t vertex) {
  const Index row = 3 * static_cast<Index>(vertex);
  return model.components().middleRows<3>(row) * alpha + model.meanShape().segment<3>(row);
}

// ---------------------------------------------------------------------------
// Binary container

namespace {

template <typename T>
void writeRaw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void writeDoubles(std::ostream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T read(const char* field) {
    T value;
    if (!in_.read(reinterpret_cast<char*>(&value), sizeof(T))) {
      throw ParseError(field, "unexpected end of file");
    }
    return value;
  }

  void readDoubles(double* dst, std::size_t n, const char* field) {
    if (!in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n * sizeof(double)))) {
      throw ParseError(field, "unexpected end of file (dimension inconsistency)");
    }
  }

 private:
  std::istream& in_;
};

bool hasJsonExtension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".json";
}

}  // namespace

void saveModel(const ShapeModel& model, const std::filesystem::path& path) {
  if (hasJsonExtension(path)) {
    saveModelJson(model, path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open model file for writing");

  const auto n = static_cast<std::uint32_t>(model.vertexCount());
  const auto s = static_cast<std::uint32_t>(model.componentCount());
  out.write(kMagic, 4);
  writeRaw(out, kVersion);
  writeRaw(out, n);
  writeRaw(out, s);
  writeDoubles(out, model.meanShape().data(), 3 * std::size_t{n});
  // Eigen's default storage is column-major, matching the file layout.
  writeDoubles(out, model.components().data(), 3 * std::size_t{n} * s);
  writeDoubles(out, model.variances().data(), s);
  const auto& tris = model.triangles();
  writeRaw(out, static_cast<std::uint32_t>(tris.size()));
  for (const auto& t : tris) {
    for (auto v : t) writeRaw(out, v);
  }
  if (!out) throw IoError(path.string(), "write failed");
}

ShapeModel loadModel(const std::filesystem::path& path) {
  if (hasJsonExtension(path)) return loadModelJson(path);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open model file");
  Reader reader(in);

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw ParseError("magic", "not an E3DM model file");
  }
  const auto version = reader.read<std::uint32_t>("version");
  if (version != kVersion) {
    throw ParseError("version", "unsupported version " + std::to_string(version));
  }
  const auto n = reader.read<std::uint32_t>("N");
  const auto s = reader.read<std::uint32_t>("S");
  if (n == 0) throw ParseError("N", "vertex count must be positive");
  if (s == 0) throw ParseError("S", "component count must be positive");

  Eigen::VectorXd mean(3 * static_cast<Index>(n));
  reader.readDoubles(mean.data(), mean.size(), "meanShape");
  Eigen::MatrixXd comps(3 * static_cast<Index>(n), static_cast<Index>(s));
  reader.readDoubles(comps.data(), comps.size(), "components");
  Eigen::VectorXd vars(static_cast<Index>(s));
  reader.readDoubles(vars.data(), vars.size(), "variances");

  const auto t = reader.read<std::uint32_t>("triangleCount");
  std::vector<Triangle> tris(t);
  for (auto& tri : tris) {
    for (auto& v : tri) v = reader.read<std::uint32_t>("triangles");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError("triangles", "trailing bytes after triangle list (dimension inconsistency)");
  }
  return ShapeModel(std::move(mean), std::move(comps), std::move(vars), std::move(tris));
}

// ---------------------------------------------------------------------------
// JSON sidecar

void saveModelJson(const ShapeModel& model, const std::filesystem::path& path) {
  using nlohmann::json;
  json j;
  j["format"] = "E3DM";
  j["version"] = kVersion;
  j["N"] = model.vertexCount();
  j["S"] = model.componentCount();
  j["meanShape"] = std::vector<double>(model.meanShape().begin(), model.meanShape().end());
  json comps = json::array();
  for (Index c = 0; c < model.componentCount(); ++c) {
    const auto col = model.components().col(c);
    comps.push_back(std::vector<double>(col.begin(), col.end()));
  }
  j["components"] = std::move(comps);
  j["variances"] = std::vector<double>(model.variances().begin(), model.variances().end());
  j["triangles"] = model.triangles();

  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open model file for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

ShapeModel loadModelJson(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open model file");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("json", e.what());
  }

  auto field = [&](const char* name) -> const json& {
    if (!j.contains(name)) throw ParseError(name, "missing field");
    return j.at(name);
  };
  auto toVector = [&](const json& arr, const char* name) {
    if (!arr.is_array()) throw ParseError(name, "expected an array");
    Eigen::VectorXd v(static_cast<Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) throw ParseError(name, "non-numeric entry");
      v[static_cast<Index>(i)] = arr[i].get<double>();
    }
    return v;
  };

  if (field("format") != "E3DM") throw ParseError("format", "expected \"E3DM\"");
  if (field("version").get<std::uint32_t>() != kVersion) {
    throw ParseError("version", "unsupported version");
  }
  const auto n = field("N").get<std::size_t>();
  const auto s = field("S").get<std::size_t>();

  Eigen::VectorXd mean = toVector(field("meanShape"), "meanShape");
  if (static_cast<std::size_t>(mean.size()) != 3 * n) {
    throw ParseError("meanShape", "length " + std::to_string(mean.size()) + " != 3N");
  }
  const auto& compsJson = field("components");
  if (!compsJson.is_array() || compsJson.size() != s) {
    throw ParseError("components", "expected S=" + std::to_string(s) + " columns");
  }
  Eigen::MatrixXd comps(static_cast<Index>(3 * n), static_cast<Index>(s));
  for (std::size_t c = 0; c < s; ++c) {
    Eigen::VectorXd col = toVector(compsJson[c], "components");
    if (static_cast<std::size_t>(col.size()) != 3 * n) {
      throw ParseError("components", "column " + std::to_string(c) + " length != 3N");
    }
    comps.col(static_cast<Index>(c)) = col;
  }
  Eigen::VectorXd vars = toVector(field("variances"), "variances");
  if (static_cast<std::size_t>(vars.size()) != s) {
    throw ParseError("variances", "length " + std::to_string(vars.size()) + " != S=" +
                                      std::to_string(s));
  }
  std::vector<Triangle> tris;
  try {
    tris = field("triangles").get<std::vector<Triangle>>();
  } catch (const json::exception& e) {
    throw ParseError("triangles", e.what());
  }
  return ShapeModel(std::move(mean), std::move(comps), std::move(vars), std::move(tris));
}

void writeObj(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open OBJ file for writing");
  out.precision(9);
  for (std::size_t i = 0; i < mesh.vertexCount(); ++i) {
    const auto v = mesh.vertex(i);
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  }
  if (mesh.topology) {
    for (const auto& t : mesh.topology->triangles()) {
      out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
  }
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace edgefit
