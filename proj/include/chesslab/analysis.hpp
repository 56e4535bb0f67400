#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chesslab/calibration.hpp"
#include "chesslab/game_model.hpp"
#include "chesslab/simfree.hpp"

namespace chesslab {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Conversion grid: conditional mean final scores for positions that were
// already good for White (calibrated p_white >= alpha at move n), compared
// between an engine self-play corpus and a human corpus.
struct GapGrid {
  std::vector<int> n_values;
  std::vector<double> alpha_values;
  int min_cell = 30;

  // Indexed [n_idx][alpha_idx]; NaN where a cell is undefined.
  std::vector<std::vector<double>> c_engine;
  std::vector<std::vector<double>> c_human;
  std::vector<std::vector<double>> delta;
  std::vector<std::vector<long>> count_engine;
  std::vector<std::vector<long>> count_human;

  double mean_delta = 0.0;  // over defined cells
  int defined_cells = 0;

  bool cell_defined(size_t ni, size_t ai) const;
};

GapGrid gap_grid(const Dataset& engine_dataset, const Dataset& human_dataset,
                 const std::vector<int>& n_values, const std::vector<double>& alpha_values,
                 int min_cell = 30);

// Everything the report subcommand can render. Null members are skipped;
// if nothing at all is present the report fails, listing what it expected.
struct ReportInputs {
  std::vector<std::pair<int, double>> score_vs_budget;  // (budget, mean score)
  const CalibrationBank* bank = nullptr;
  const SimReport* sim = nullptr;
  const GapGrid* grid = nullptr;
  uint64_t seed = 0;
  std::string config_hash;
};

// Emits score_vs_budget.{csv,svg}, calibration_curves.{csv,svg},
// sim_diagnostics.csv and gap_grid.{csv,svg} for whichever inputs are
// present. Every CSV starts with a provenance comment line.
std::vector<std::filesystem::path> write_report(const ReportInputs& inputs,
                                                const std::filesystem::path& out_dir);

}  // namespace chesslab
