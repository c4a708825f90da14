#include "fundrank/io.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace fundrank::io {

namespace {

using nlohmann::json;

json MatrixToJson(const Mat3& m) {
  json out = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.push_back(m(r, c));
  }
  return out;
}

const json& Field(const json& object, const char* key, const std::string& where) {
  if (!object.is_object() || !object.contains(key)) {
    throw Error(ErrorCode::kParse, where + ": missing field '" + key + "'");
  }
  return object.at(key);
}

std::vector<double> Numbers(const json& value, size_t expected, const std::string& where) {
  if (!value.is_array() || value.size() != expected) {
    throw Error(ErrorCode::kParse, where + ": expected an array of " + std::to_string(expected) +
                                       " numbers");
  }
  std::vector<double> out;
  for (const auto& v : value) {
    if (!v.is_number()) throw Error(ErrorCode::kParse, where + ": non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

Mat3 MatrixFromJson(const json& value, const std::string& where) {
  const std::vector<double> v = Numbers(value, 9, where);
  Mat3 m;
  for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = v[k];
  return m;
}

Vec3 VectorFromJson(const json& value, const std::string& where) {
  const std::vector<double> v = Numbers(value, 3, where);
  return Vec3(v[0], v[1], v[2]);
}

int CountFromJson(const json& object, const char* key, const std::string& where) {
  const json& v = Field(object, key, where);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw Error(ErrorCode::kParse, where + "." + key + ": expected a non-negative integer");
  }
  return v.get<int>();
}

json Parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

json PairsToJson(const MultiviewBlockMatrix& m) {
  json pairs = json::array();
  for (const auto& [i, j] : m.Pairs()) {
    pairs.push_back({{"i", i}, {"j", j}, {"F", MatrixToJson(m.Block(i, j))}});
  }
  return pairs;
}

MultiviewBlockMatrix PairsFromJson(const json& doc) {
  const int n = CountFromJson(doc, "n", "root");
  const json& pairs = Field(doc, "pairs", "root");
  if (!pairs.is_array()) throw Error(ErrorCode::kParse, "root.pairs: expected an array");
  PairwiseEstimateSet estimates;
  for (size_t k = 0; k < pairs.size(); ++k) {
    const std::string where = "pairs[" + std::to_string(k) + "]";
    const json& entry = pairs[k];
    const json& i = Field(entry, "i", where);
    const json& j = Field(entry, "j", where);
    if (!i.is_number_integer() || !j.is_number_integer()) {
      throw Error(ErrorCode::kParse, where + ": i and j must be integers");
    }
    estimates.push_back({i.get<int>(), j.get<int>(), MatrixFromJson(Field(entry, "F", where), where + ".F")});
  }
  return Assemble(estimates, n);
}

}  // namespace

std::string FormatDouble(double value) {
  std::array<char, 64> buffer{};
  const auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return std::string(buffer.data(), end);
}

std::string SceneToJson(const Scene& scene) {
  json cameras = json::array();
  for (const auto& pose : scene.poses) {
    cameras.push_back({{"R", MatrixToJson(pose.R())},
                       {"t", {pose.t().x(), pose.t().y(), pose.t().z()}},
                       {"K", MatrixToJson(pose.K())}});
  }
  json points = json::array();
  for (const auto& p : scene.points) points.push_back({p.x(), p.y(), p.z()});
  json doc = {{"n", scene.poses.size()}, {"cameras", cameras}, {"points", points}};
  return doc.dump(1);
}

Scene SceneFromJson(const std::string& text) {
  const json doc = Parse(text);
  const int n = CountFromJson(doc, "n", "root");
  const json& cameras = Field(doc, "cameras", "root");
  if (!cameras.is_array() || static_cast<int>(cameras.size()) != n) {
    throw Error(ErrorCode::kParse, "root.cameras: expected " + std::to_string(n) + " cameras");
  }
  Scene scene;
  for (int k = 0; k < n; ++k) {
    const std::string where = "cameras[" + std::to_string(k) + "]";
    const json& c = cameras[k];
    const Mat3 k_matrix = c.contains("K") ? MatrixFromJson(c.at("K"), where + ".K") : Mat3::Identity();
    scene.poses.emplace_back(MatrixFromJson(Field(c, "R", where), where + ".R"),
                             VectorFromJson(Field(c, "t", where), where + ".t"), k_matrix);
  }
  if (doc.contains("points")) {
    const json& points = doc.at("points");
    if (!points.is_array()) throw Error(ErrorCode::kParse, "root.points: expected an array");
    for (size_t k = 0; k < points.size(); ++k) {
      scene.points.push_back(VectorFromJson(points[k], "points[" + std::to_string(k) + "]"));
    }
  }
  return scene;
}

std::string EstimatesToJson(const MultiviewBlockMatrix& m) {
  json doc = {{"n", m.n()}, {"pairs", PairsToJson(m)}};
  return doc.dump(1);
}

MultiviewBlockMatrix EstimatesFromJson(const std::string& text) {
  return PairsFromJson(Parse(text));
}

std::string SolutionToJson(const SolverResult& result) {
  const MatX& lambda = result.scales.values();
  json flat = json::array();
  for (Eigen::Index r = 0; r < lambda.rows(); ++r) {
    for (Eigen::Index c = 0; c < lambda.cols(); ++c) flat.push_back(lambda(r, c));
  }
  json doc = {{"n", result.F.n()},
              {"pairs", PairsToJson(result.F)},
              {"lambda", flat},
              {"status", ToString(result.status)},
              {"cost_history", result.state.cost_history}};
  return doc.dump(1);
}

LoadedSolution SolutionFromJson(const std::string& text) {
  const json doc = Parse(text);
  LoadedSolution out;
  out.F = PairsFromJson(doc);
  const int n = out.F.n();
  const std::vector<double> flat = Numbers(Field(doc, "lambda", "root"), static_cast<size_t>(n) * n,
                                           "root.lambda");
  out.scales = ScaleMatrix(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) out.scales.Set(i, j, flat[static_cast<size_t>(i) * n + j]);
  }
  const json& status = Field(doc, "status", "root");
  if (status == "converged") {
    out.status = SolverStatus::kConverged;
  } else if (status == "max_iter") {
    out.status = SolverStatus::kMaxIterations;
  } else {
    throw Error(ErrorCode::kParse, "root.status: expected 'converged' or 'max_iter'");
  }
  if (doc.contains("cost_history")) {
    const json& costs = doc.at("cost_history");
    out.cost_history = Numbers(costs, costs.size(), "root.cost_history");
  }
  return out;
}

std::string CostHistoryCsv(const std::vector<double>& costs) {
  std::ostringstream out;
  out << "irls_iteration,cost\n";
  for (size_t k = 0; k < costs.size(); ++k) out << k << ',' << FormatDouble(costs[k]) << '\n';
  return out.str();
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "failed reading " + path.string());
  return buffer.str();
}

void WriteFile(const std::filesystem::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << contents;
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace fundrank::io
