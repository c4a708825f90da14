#include "fundrank/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "fundrank/io.hpp"
#include "fundrank/random.hpp"

namespace fundrank {

namespace {

using nlohmann::json;

const char* ToString(Baseline b) {
  return b == Baseline::kInputEstimates ? "input-estimates" : "warm-start-only";
}

const char* ToString(IntrinsicsModel m) {
  return m == IntrinsicsModel::kIdentity ? "identity" : "random";
}

std::vector<Vec3> Centers(const std::vector<CameraPose>& poses) {
  std::vector<Vec3> centers;
  for (const auto& p : poses) centers.push_back(p.t());
  return centers;
}

double MeanPairDistance(const std::vector<Vec3>& points) {
  double total = 0.0;
  int count = 0;
  for (size_t a = 0; a < points.size(); ++a) {
    for (size_t b = a + 1; b < points.size(); ++b, ++count) total += (points[a] - points[b]).norm();
  }
  return count > 0 ? total / count : 0.0;
}

ErrorReport Summarize(std::vector<double> essential, std::vector<double> location) {
  ErrorReport report;
  report.essential_errors = std::move(essential);
  report.location_errors = std::move(location);
  if (!report.essential_errors.empty()) {
    report.median_essential = Median(report.essential_errors);
    report.mean_essential =
        std::accumulate(report.essential_errors.begin(), report.essential_errors.end(), 0.0) /
        static_cast<double>(report.essential_errors.size());
  }
  report.median_location = Median(report.location_errors);
  return report;
}

// Directions for the listed pairs; blocks without a usable skew part are skipped.
DirectionSet Directions(const std::vector<std::pair<int, int>>& pairs,
                        const std::vector<Mat3>& essentials, const Scene& scene,
                        int cheirality_points) {
  DirectionSet directions;
  const int points = std::min<int>(cheirality_points, static_cast<int>(scene.points.size()));
  for (size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    const CameraPose& a = scene.poses[i];
    const CameraPose& b = scene.poses[j];
    std::vector<CalibratedMatch> matches;
    for (int p = 0; p < points; ++p) {
      const Vec3 x = a.R().transpose() * (scene.points[p] - a.t());
      const Vec3 y = b.R().transpose() * (scene.points[p] - b.t());
      matches.push_back({x / x.z(), y / y.z()});
    }
    try {
      directions.Set(i, j, ExtractDirection(essentials[k], a.R(), b.R(), matches));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kVanishingSkewPart) throw;
    }
  }
  return directions;
}

Mat3 ToEssential(const Mat3& f, const CameraPose& a, const CameraPose& b) {
  const Mat3 e = a.K().transpose() * f * b.K();
  return e / e.norm();
}

// Fixes the sign of an estimated essential the way a relative-pose
// decomposition would: the skew part of R_a E R_b^T must point along the
// cheirality-consistent direction.
Mat3 OrientEssential(const Mat3& e, const CameraPose& a, const CameraPose& b,
                     const std::vector<Correspondence>& observed) {
  std::vector<CalibratedMatch> matches;
  for (const auto& c : observed) matches.push_back({a.KInverse() * c.first, b.KInverse() * c.second});
  const Mat3 m = a.R() * e * b.R().transpose();
  const Vec3 raw(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  try {
    return raw.dot(ExtractDirection(e, a.R(), b.R(), matches)) < 0.0 ? Mat3(-e) : e;
  } catch (const Error& err) {
    if (err.code() != ErrorCode::kVanishingSkewPart) throw;
    return e;
  }
}

}  // namespace

void ExperimentSpec::Validate() const {
  scene.Validate();
  solver.Validate();
  if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  if (scene.n_cameras < 3) throw Error(ErrorCode::kInvalidArgument, "n_cameras must be >= 3 for the pipeline");
  if (cheirality_points < 0) throw Error(ErrorCode::kInvalidArgument, "cheirality_points must be >= 0");
  if (baseline == Baseline::kWarmStartOnly && warm_start_noise < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "warm_start_noise must be >= 0 for the warm-start-only baseline");
  }
  if (eight_point && scene.n_points < 8) {
    throw Error(ErrorCode::kInvalidArgument, "n_points must be >= 8 for eight_point");
  }
}

std::string SpecToJson(const ExperimentSpec& spec) {
  const SceneConfig& s = spec.scene;
  const SolverConfig& c = spec.solver;
  json doc = {
      {"scene",
       {{"n_cameras", s.n_cameras},
        {"n_points", s.n_points},
        {"layout", ToString(s.layout)},
        {"intrinsics", ToString(s.intrinsics)},
        {"noise_sigma", s.noise_sigma},
        {"outlier_fraction", s.outlier_fraction},
        {"missing_fraction", s.missing_fraction},
        {"scale_jitter", {s.scale_jitter_min, s.scale_jitter_max}},
        {"seed", s.seed}}},
      {"solver",
       {{"delta", c.delta},
        {"max_irls", c.max_irls},
        {"max_admm", c.max_admm},
        {"irls_tol", c.irls_tol},
        {"admm_tol", c.admm_tol}}},
      {"trials", spec.trials},
      {"baseline", ToString(spec.baseline)},
      {"eight_point", spec.eight_point},
      {"warm_start_noise", spec.warm_start_noise},
      {"cheirality_points", spec.cheirality_points},
      {"output_dir", spec.output_dir.string()}};
  return doc.dump(1);
}

ExperimentSpec SpecFromJson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kParse, "spec must be a JSON object");

  ExperimentSpec spec;
  const auto check_keys = [](const json& object, std::initializer_list<const char*> allowed,
                             const std::string& where) {
    for (const auto& [key, value] : object.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        throw Error(ErrorCode::kInvalidArgument, where + ": unknown field '" + key + "'");
      }
    }
  };
  const auto read = [](const json& object, const char* key, auto& target, const std::string& where) {
    if (!object.contains(key)) return;
    try {
      object.at(key).get_to(target);
    } catch (const json::exception&) {
      throw Error(ErrorCode::kInvalidArgument, where + "." + key + ": wrong type");
    }
  };

  check_keys(doc, {"scene", "solver", "trials", "baseline", "eight_point", "warm_start_noise",
                   "cheirality_points", "output_dir"},
             "spec");
  if (doc.contains("scene")) {
    const json& s = doc.at("scene");
    check_keys(s, {"n_cameras", "n_points", "layout", "intrinsics", "noise_sigma",
                   "outlier_fraction", "missing_fraction", "scale_jitter", "seed"},
               "scene");
    read(s, "n_cameras", spec.scene.n_cameras, "scene");
    read(s, "n_points", spec.scene.n_points, "scene");
    read(s, "noise_sigma", spec.scene.noise_sigma, "scene");
    read(s, "outlier_fraction", spec.scene.outlier_fraction, "scene");
    read(s, "missing_fraction", spec.scene.missing_fraction, "scene");
    read(s, "seed", spec.scene.seed, "scene");
    if (s.contains("layout")) {
      std::string layout;
      read(s, "layout", layout, "scene");
      spec.scene.layout = ParseLayout(layout);
    }
    if (s.contains("intrinsics")) {
      std::string model;
      read(s, "intrinsics", model, "scene");
      if (model == "identity") {
        spec.scene.intrinsics = IntrinsicsModel::kIdentity;
      } else if (model == "random") {
        spec.scene.intrinsics = IntrinsicsModel::kRandom;
      } else {
        throw Error(ErrorCode::kInvalidArgument, "scene.intrinsics: expected identity or random");
      }
    }
    if (s.contains("scale_jitter")) {
      std::vector<double> range;
      read(s, "scale_jitter", range, "scene");
      if (range.size() != 2) throw Error(ErrorCode::kInvalidArgument, "scene.scale_jitter: expected [min, max]");
      spec.scene.scale_jitter_min = range[0];
      spec.scene.scale_jitter_max = range[1];
    }
  }
  if (doc.contains("solver")) {
    const json& c = doc.at("solver");
    check_keys(c, {"delta", "max_irls", "max_admm", "irls_tol", "admm_tol"}, "solver");
    read(c, "delta", spec.solver.delta, "solver");
    read(c, "max_irls", spec.solver.max_irls, "solver");
    read(c, "max_admm", spec.solver.max_admm, "solver");
    read(c, "irls_tol", spec.solver.irls_tol, "solver");
    read(c, "admm_tol", spec.solver.admm_tol, "solver");
  }
  read(doc, "trials", spec.trials, "spec");
  read(doc, "eight_point", spec.eight_point, "spec");
  read(doc, "warm_start_noise", spec.warm_start_noise, "spec");
  read(doc, "cheirality_points", spec.cheirality_points, "spec");
  if (doc.contains("baseline")) {
    std::string baseline;
    read(doc, "baseline", baseline, "spec");
    if (baseline == "input-estimates") {
      spec.baseline = Baseline::kInputEstimates;
    } else if (baseline == "warm-start-only") {
      spec.baseline = Baseline::kWarmStartOnly;
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "spec.baseline: expected input-estimates or warm-start-only");
    }
  }
  if (doc.contains("output_dir")) {
    std::string dir;
    read(doc, "output_dir", dir, "spec");
    spec.output_dir = dir;
  }
  spec.Validate();
  return spec;
}

std::string SpecHash(const ExperimentSpec& spec) {
  ExperimentSpec canonical = spec;
  canonical.output_dir.clear();
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : SpecToJson(canonical)) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

TrialRecord RunTrial(const ExperimentSpec& spec, int trial) {
  TrialRecord record;
  record.trial = trial;
  record.seed = DeriveSeed(spec.scene.seed, static_cast<std::uint64_t>(trial));
  try {
    SceneConfig config = spec.scene;
    config.seed = record.seed;
    const Scene scene = GenerateScene(config);
    const int n = config.n_cameras;
    // The pipeline works in calibrated coordinates: essentials are
    // well-conditioned, and pixel-space fundamentals are not.
    const MultiviewBlockMatrix truth = MultiviewFromPoses(scene.poses, EpipolarKind::kEssential);
    std::vector<CameraPose> calibrated;
    for (const auto& pose : scene.poses) calibrated.emplace_back(pose.R(), pose.t());

    CorruptedMeasurements corrupted;
    if (spec.eight_point) {
      Rng rng = MakeRng(record.seed, SeedStream::kObservation);
      PairwiseEstimateSet estimates;
      for (const auto& [i, j] : truth.Pairs()) {
        const auto observed = ObserveCorrespondences(scene, i, j, config.noise_sigma, rng);
        try {
          const Mat3 E = ToEssential(EightPoint(observed), scene.poses[i], scene.poses[j]);
          estimates.push_back({i, j, OrientEssential(E, scene.poses[i], scene.poses[j], observed)});
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kDegenerateConfiguration) throw;
        }
      }
      SceneConfig noiseless = config;
      noiseless.noise_sigma = 0.0;
      corrupted = Corrupt(Assemble(estimates, n), noiseless);
    } else {
      corrupted = Corrupt(truth, config);
    }
    const MultiviewBlockMatrix& measured = corrupted.measured;

    std::optional<InitialGuess> init;
    std::vector<CameraPose> warm_poses;
    if (spec.warm_start_noise >= 0.0) {
      Rng rng = MakeRng(record.seed, SeedStream::kObservation);
      std::normal_distribution<double> normal(0.0, 1.0);
      const double sigma = spec.warm_start_noise * MeanPairDistance(Centers(scene.poses)) / std::sqrt(3.0);
      for (const auto& pose : calibrated) {
        const Vec3 shift(normal(rng), normal(rng), normal(rng));
        warm_poses.emplace_back(pose.R(), pose.t() + sigma * shift);
      }
      init = WarmStart(measured, warm_poses);
    }

    const SolverResult solved = Solve(measured, spec.solver, init);
    record.status = solved.status;
    record.cost_history = solved.state.cost_history;
    record.cost_increases = static_cast<int>(solved.cost_increases.size());

    const std::vector<std::pair<int, int>> compared =
        spec.baseline == Baseline::kInputEstimates ? measured.Pairs() : truth.Pairs();
    std::vector<Mat3> ours_blocks, baseline_blocks;
    std::vector<double> ours_errors, baseline_errors;
    for (const auto& [i, j] : compared) {
      ours_blocks.push_back(solved.F.Block(i, j));
      baseline_blocks.push_back(spec.baseline == Baseline::kInputEstimates
                                    ? measured.Block(i, j)
                                    : EssentialGlobal(warm_poses[i], warm_poses[j]));
      ours_errors.push_back(EssentialError(ours_blocks.back(), truth.Block(i, j)));
      baseline_errors.push_back(EssentialError(baseline_blocks.back(), truth.Block(i, j)));
    }

    // Locations from our completed matrix use every pair.
    std::vector<Mat3> all_blocks;
    for (const auto& [i, j] : truth.Pairs()) all_blocks.push_back(solved.F.Block(i, j));
    const std::vector<Vec3> centers = Centers(scene.poses);
    const auto locate = [&](const DirectionSet& directions) {
      return LocationError(RecoverLocations(directions, n).t, centers);
    };
    record.ours = Summarize(std::move(ours_errors),
                            locate(Directions(truth.Pairs(), all_blocks, scene, spec.cheirality_points)));
    record.baseline = Summarize(std::move(baseline_errors),
                                locate(Directions(compared, baseline_blocks, scene, spec.cheirality_points)));

    const double base = record.baseline.median_essential;
    record.relative_improvement = base > 0.0 ? (base - record.ours.median_essential) / base : 0.0;
    record.improved = record.ours.median_essential < base;
    record.ok = true;
  } catch (const Error& e) {
    record.ok = false;
    record.failure = e.what();
  }
  return record;
}

unsigned ThreadBudget() {
  if (const char* env = std::getenv("FUNDRANK_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) return static_cast<unsigned>(value);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

RunRecord RunExperiment(const ExperimentSpec& spec, unsigned threads) {
  spec.Validate();
  const auto start = std::chrono::steady_clock::now();
  RunRecord record;
  record.spec_hash = SpecHash(spec);
  record.trials.resize(spec.trials);

  const unsigned workers =
      std::min<unsigned>(threads == 0 ? ThreadBudget() : threads, static_cast<unsigned>(spec.trials));
  std::atomic<int> next{0};
  const auto work = [&] {
    for (int k = next++; k < spec.trials; k = next++) record.trials[k] = RunTrial(spec, k);
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::vector<double> ours_ess, base_ess, ours_loc, base_loc;
  for (const auto& t : record.trials) {
    if (!t.ok) continue;
    ours_ess.push_back(t.ours.median_essential);
    base_ess.push_back(t.baseline.median_essential);
    ours_loc.push_back(t.ours.median_location);
    base_loc.push_back(t.baseline.median_location);
  }
  record.essential_comparison = CompareMethods(ours_ess, base_ess);
  record.location_comparison = CompareMethods(ours_loc, base_loc);
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

std::string MetricsCsv(const RunRecord& record) {
  std::ostringstream out;
  out << "trial,seed,median_ess_err,mean_ess_err,median_loc_err,rel_improvement,improved\n";
  for (const auto& t : record.trials) {
    out << t.trial << ',' << t.seed << ',';
    if (t.ok) {
      out << io::FormatDouble(t.ours.median_essential) << ',' << io::FormatDouble(t.ours.mean_essential)
          << ',' << io::FormatDouble(t.ours.median_location) << ','
          << io::FormatDouble(t.relative_improvement) << ',' << (t.improved ? 1 : 0) << '\n';
    } else {
      out << "nan,nan,nan,nan,0\n";
    }
  }
  return out.str();
}

std::string SummaryJson(const RunRecord& record) {
  const auto comparison = [](const MethodComparison& c) {
    return json{{"relative_improvement", c.relative_improvement},
                {"improved_fraction", c.improved_fraction},
                {"zero_baseline_trials", c.zero_baseline_trials}};
  };
  json trials = json::array();
  for (const auto& t : record.trials) {
    json entry = {{"trial", t.trial}, {"seed", t.seed}, {"ok", t.ok}};
    if (t.ok) {
      entry["status"] = ToString(t.status);
      entry["irls_iterations"] = t.cost_history.size();
      entry["cost_increases"] = t.cost_increases;
      entry["baseline_median_ess_err"] = t.baseline.median_essential;
      entry["baseline_median_loc_err"] = t.baseline.median_location;
    } else {
      entry["failure"] = t.failure;
    }
    trials.push_back(entry);
  }
  json doc = {{"spec_hash", record.spec_hash},
              {"essential", comparison(record.essential_comparison)},
              {"location", comparison(record.location_comparison)},
              {"trials", trials}};
  return doc.dump(1);
}

void WriteRunRecord(const ExperimentSpec& spec, const RunRecord& record) {
  const auto& dir = spec.output_dir;
  io::WriteFile(dir / "metrics.csv", MetricsCsv(record));
  io::WriteFile(dir / "summary.json", SummaryJson(record));
  std::ostringstream costs;
  costs << "trial,irls_iteration,cost\n";
  for (const auto& t : record.trials) {
    for (size_t k = 0; k < t.cost_history.size(); ++k) {
      costs << t.trial << ',' << k << ',' << io::FormatDouble(t.cost_history[k]) << '\n';
    }
  }
  io::WriteFile(dir / "costs.csv", costs.str());
  json run = {{"spec_hash", record.spec_hash}, {"wall_seconds", record.wall_seconds},
              {"spec", json::parse(SpecToJson(spec))}};
  io::WriteFile(dir / "run.json", run.dump(1));
}

}  // namespace fundrank
