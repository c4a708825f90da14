#pragma once

#include "fundrank/consistency_solver.hpp"
#include "fundrank/location_recovery.hpp"
#include "fundrank/scene_synth.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fundrank {

enum class Baseline {
  kInputEstimates,  // the corrupted measurements themselves
  kWarmStartOnly,   // essentials re-derived from the perturbed warm-start poses
};

struct ExperimentSpec {
  SceneConfig scene;  // scene.seed is the experiment seed
  SolverConfig solver;
  int trials = 5;
  Baseline baseline = Baseline::kInputEstimates;
  bool eight_point = false;        // re-estimate blocks from noisy correspondences
  double warm_start_noise = -1.0;  // < 0: spectral start; else perturbed-pose start
  int cheirality_points = 20;      // matches used to sign pairwise directions
  std::filesystem::path output_dir = "run";

  void Validate() const;
};

std::string SpecToJson(const ExperimentSpec& spec);
ExperimentSpec SpecFromJson(const std::string& text);
// FNV-1a over the canonical JSON of everything except output_dir.
std::string SpecHash(const ExperimentSpec& spec);

struct ErrorReport {
  std::vector<double> essential_errors;  // x100 convention, per compared pair
  std::vector<double> location_errors;   // per camera after similarity alignment
  double median_essential = 0.0;
  double mean_essential = 0.0;
  double median_location = 0.0;
};

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  ErrorReport ours;
  ErrorReport baseline;
  double relative_improvement = 0.0;  // on median essential error
  bool improved = false;
  SolverStatus status = SolverStatus::kMaxIterations;
  std::vector<double> cost_history;
  int cost_increases = 0;
};

struct RunRecord {
  std::string spec_hash;
  std::vector<TrialRecord> trials;
  MethodComparison essential_comparison;
  MethodComparison location_comparison;
  double wall_seconds = 0.0;
};

// Runs one trial end to end; failures are caught into the record.
TrialRecord RunTrial(const ExperimentSpec& spec, int trial);

// Trials run on up to `threads` workers (0: FUNDRANK_THREADS or hardware
// concurrency); results are ordered by trial index.
RunRecord RunExperiment(const ExperimentSpec& spec, unsigned threads = 0);

// trial,seed,median_ess_err,mean_ess_err,median_loc_err,rel_improvement,improved
std::string MetricsCsv(const RunRecord& record);
std::string SummaryJson(const RunRecord& record);

// metrics.csv, costs.csv, summary.json and run.json (timing) in output_dir.
void WriteRunRecord(const ExperimentSpec& spec, const RunRecord& record);

unsigned ThreadBudget();

}  // namespace fundrank
