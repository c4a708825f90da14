// Command-line entry point: gen, rankcheck, solve and pipeline.
//
// Exit codes: 0 ran to completion (including max_iter status), 2 validation
// error, 3 I/O or parse error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "fundrank/consistency_solver.hpp"
#include "fundrank/experiment.hpp"
#include "fundrank/io.hpp"
#include "fundrank/multiview_block.hpp"
#include "fundrank/scene_synth.hpp"

namespace fs = std::filesystem;
using namespace fundrank;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

struct GenOptions {
  SceneConfig scene;
  std::string layout = "sphere";
  bool random_intrinsics = false;
  fs::path out = "scene";
};

struct SolveOptions {
  fs::path estimates;
  SolverConfig solver;
  std::string warm_start;
  fs::path out = "solution";
};

void AddSolverFlags(CLI::App* cmd, SolverConfig& c) {
  cmd->add_option("--delta", c.delta, "IRLS floor")->capture_default_str();
  cmd->add_option("--max-irls", c.max_irls, "IRLS iteration cap")->capture_default_str();
  cmd->add_option("--max-admm", c.max_admm, "ADMM iterations per IRLS pass")->capture_default_str();
  cmd->add_option("--tol-irls", c.irls_tol, "relative cost change stop")->capture_default_str();
  cmd->add_option("--tol-admm", c.admm_tol, "relative primal change stop")->capture_default_str();
}

void PrintVector(const char* label, const VecX& values) {
  std::cout << label << ':';
  for (double v : values) std::cout << ' ' << io::FormatDouble(v);
  std::cout << '\n';
}

int RunGen(GenOptions& o) {
  o.scene.layout = ParseLayout(o.layout);
  o.scene.intrinsics = o.random_intrinsics ? IntrinsicsModel::kRandom : IntrinsicsModel::kIdentity;
  o.scene.Validate();
  const Scene scene = GenerateScene(o.scene);
  const MultiviewBlockMatrix truth = MultiviewFromPoses(scene.poses, EpipolarKind::kFundamental);
  const CorruptedMeasurements corrupted = Corrupt(truth, o.scene);
  io::WriteFile(o.out / "scene.json", io::SceneToJson(scene));
  io::WriteFile(o.out / "truth.json", io::EstimatesToJson(truth));
  io::WriteFile(o.out / "estimates.json", io::EstimatesToJson(corrupted.measured));
  std::cout << "n: " << scene.poses.size() << '\n'
            << "layout: " << ToString(o.scene.layout) << '\n'
            << "collinear: " << (IsCollinear(scene.poses) ? "true" : "false") << '\n'
            << "pairs: " << corrupted.measured.PairCount() << '\n'
            << "outliers: " << corrupted.report.outlier_pairs.size() << '\n'
            << "missing: " << corrupted.report.missing_pairs.size() << '\n';
  return 0;
}

int RunRankcheck(const fs::path& path, double tol) {
  const std::string text = io::ReadFile(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  const MultiviewBlockMatrix m =
      doc.is_object() && doc.contains("cameras")
          ? MultiviewFromPoses(io::SceneFromJson(text).poses, EpipolarKind::kFundamental)
          : io::EstimatesFromJson(text);
  const RankProfile profile = ComputeRankProfile(m.data(), tol);
  const Rank2Stats blocks = BlockRank2Ratio(m);
  const double norm = m.data().norm();
  const double asym = norm > 0.0 ? (m.data() - m.data().transpose()).norm() / norm : 0.0;
  PrintVector("singular_values", profile.singular_values);
  std::cout << "rank: " << profile.rank << '\n'
            << "block_sigma3_over_sigma2: median " << io::FormatDouble(blocks.median) << " mean "
            << io::FormatDouble(blocks.mean) << " max " << io::FormatDouble(blocks.max) << '\n'
            << "symmetry_residual: " << io::FormatDouble(asym) << '\n';
  return 0;
}

int RunSolve(SolveOptions& o) {
  o.solver.Validate();
  const MultiviewBlockMatrix measured = io::EstimatesFromJson(io::ReadFile(o.estimates));
  std::optional<InitialGuess> init;
  if (!o.warm_start.empty()) {
    const Scene scene = io::SceneFromJson(io::ReadFile(o.warm_start));
    if (static_cast<int>(scene.poses.size()) != measured.n()) {
      throw Error(ErrorCode::kDimensionMismatch, "--warm-start: camera count differs from estimates");
    }
    init = WarmStart(measured, scene.poses);
  }
  const SolverResult result = Solve(measured, o.solver, init);
  io::WriteFile(o.out / "solution.json", io::SolutionToJson(result));
  io::WriteFile(o.out / "cost_history.csv", io::CostHistoryCsv(result.state.cost_history));
  const double final_cost = result.state.cost_history.empty() ? Cost(measured, result.A, result.scales)
                                                              : result.state.cost_history.back();
  std::cout << "status: " << ToString(result.status) << '\n'
            << "irls_iterations: " << result.state.irls_iterations << '\n'
            << "final_cost: " << io::FormatDouble(final_cost) << '\n'
            << "cost_increases: " << result.cost_increases.size() << '\n';
  for (const auto& inc : result.cost_increases) {
    std::cerr << "warning: cost increased at IRLS pass " << inc.irls_iteration << ": "
              << io::FormatDouble(inc.previous) << " -> " << io::FormatDouble(inc.current) << '\n';
  }
  return 0;
}

int RunPipeline(const fs::path& spec_path, const std::string& out) {
  ExperimentSpec spec = SpecFromJson(io::ReadFile(spec_path));
  if (!out.empty()) spec.output_dir = out;
  const RunRecord record = RunExperiment(spec);
  WriteRunRecord(spec, record);
  int failed = 0;
  for (const auto& t : record.trials) {
    if (!t.ok) {
      ++failed;
      std::cerr << "trial " << t.trial << " failed: " << t.failure << '\n';
    }
  }
  std::cout << "spec_hash: " << record.spec_hash << '\n'
            << "trials: " << record.trials.size() << " (" << failed << " failed)\n"
            << "relative_improvement: " << io::FormatDouble(record.essential_comparison.relative_improvement)
            << '\n'
            << "improved_fraction: " << io::FormatDouble(record.essential_comparison.improved_fraction)
            << '\n'
            << "output: " << spec.output_dir.string() << '\n';
  return 0;
}

int ExitCodeFor(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kIo:
    case ErrorCode::kParse:
      return kExitIo;
    default:
      return kExitValidation;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank-constrained multiview fundamental matrix recovery"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic scene and corrupted estimates");
  gen_cmd->add_option("--seed", gen.scene.seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--n", gen.scene.n_cameras, "camera count")->capture_default_str();
  gen_cmd->add_option("--points", gen.scene.n_points, "3D point count")->capture_default_str();
  gen_cmd->add_option("--layout", gen.layout, "sphere, ring or collinear")
      ->check(CLI::IsMember({"sphere", "ring", "collinear"}))
      ->capture_default_str();
  gen_cmd->add_flag("--random-intrinsics", gen.random_intrinsics, "draw per-camera K");
  gen_cmd->add_option("--noise", gen.scene.noise_sigma, "relative block noise")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--outliers", gen.scene.outlier_fraction, "outlier pair fraction")
      ->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--missing", gen.scene.missing_fraction, "missing pair fraction")
      ->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--out", gen.out, "output directory")->capture_default_str();

  fs::path rank_file;
  double rank_tol = kDefaultRankTolerance;
  auto* rank_cmd = app.add_subcommand("rankcheck", "report the singular values of a multiview matrix");
  rank_cmd->add_option("file", rank_file, "scene or estimates JSON")->required();
  rank_cmd->add_option("--tol", rank_tol, "relative rank threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  SolveOptions solve;
  auto* solve_cmd = app.add_subcommand("solve", "recover a consistent multiview matrix");
  solve_cmd->add_option("estimates", solve.estimates, "estimates JSON")->required();
  AddSolverFlags(solve_cmd, solve.solver);
  solve_cmd->add_option("--warm-start", solve.warm_start, "scene JSON with initial poses");
  solve_cmd->add_option("--out", solve.out, "output directory")->capture_default_str();

  fs::path spec_path;
  std::string pipeline_out;
  auto* pipe_cmd = app.add_subcommand("pipeline", "run a seeded multi-trial experiment");
  pipe_cmd->add_option("spec", spec_path, "experiment spec JSON")->required();
  pipe_cmd->add_option("--out", pipeline_out, "override output_dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*gen_cmd) return RunGen(gen);
    if (*rank_cmd) return RunRankcheck(rank_file, rank_tol);
    if (*solve_cmd) return RunSolve(solve);
    if (*pipe_cmd) return RunPipeline(spec_path, pipeline_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ExitCodeFor(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
