#pragma once

#include "fundrank/consistency_solver.hpp"
#include "fundrank/multiview_block.hpp"
#include "fundrank/scene_synth.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fundrank::io {

// Scene file:     {"n", "cameras": [{"R": [9], "t": [3], "K": [9]}], "points": [[3]...]}
// Estimates file: {"n", "pairs": [{"i", "j", "F": [9]}]}
// Solution file:  estimates shape plus "lambda" (n*n row-major), "status",
//                 "cost_history".
// Matrices are flat row-major arrays; doubles round-trip bit-exactly.

std::string SceneToJson(const Scene& scene);
Scene SceneFromJson(const std::string& text);

// One entry per unordered pair (i < j) present in the mask.
std::string EstimatesToJson(const MultiviewBlockMatrix& m);
MultiviewBlockMatrix EstimatesFromJson(const std::string& text);

std::string SolutionToJson(const SolverResult& result);

struct LoadedSolution {
  MultiviewBlockMatrix F;
  ScaleMatrix scales;
  SolverStatus status = SolverStatus::kMaxIterations;
  std::vector<double> cost_history;
};

LoadedSolution SolutionFromJson(const std::string& text);

// "irls_iteration,cost" header then one row per IRLS pass.
std::string CostHistoryCsv(const std::vector<double>& costs);

// Shortest decimal form that parses back to the same double.
std::string FormatDouble(double value);

// Throw kIo on filesystem failures.
std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, const std::string& contents);

}  // namespace fundrank::io
