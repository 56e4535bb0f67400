#include "chesslab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "chesslab/util.hpp"

namespace chesslab {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Mean final score over records whose point at move n has calibrated
// p_white >= alpha; count reported separately.
void cell_stats(const Dataset& ds, int n, double alpha, double* mean, long* count) {
  double sum = 0.0;
  long c = 0;
  for (const auto& record : ds.records) {
    const MovePoint* at = nullptr;
    for (const auto& p : record.points)
      if (p.t == n) {
        at = &p;
        break;
      }
    if (at == nullptr || !at->pw) continue;
    if (*at->pw >= alpha) {
      sum += record.result;
      ++c;
    }
  }
  *count = c;
  *mean = c > 0 ? sum / static_cast<double>(c) : kNan;
}

}  // namespace

bool GapGrid::cell_defined(size_t ni, size_t ai) const {
  return count_engine[ni][ai] >= min_cell && count_human[ni][ai] >= min_cell;
}

GapGrid gap_grid(const Dataset& engine_dataset, const Dataset& human_dataset,
                 const std::vector<int>& n_values, const std::vector<double>& alpha_values,
                 int min_cell) {
  if (engine_dataset.records.empty() || human_dataset.records.empty())
    throw AnalysisError("gap_grid needs both datasets nonempty");
  if (n_values.empty() || alpha_values.empty())
    throw AnalysisError("gap_grid needs at least one n and one alpha");

  GapGrid grid;
  grid.n_values = n_values;
  grid.alpha_values = alpha_values;
  grid.min_cell = min_cell;
  size_t nn = n_values.size(), na = alpha_values.size();
  grid.c_engine.assign(nn, std::vector<double>(na, kNan));
  grid.c_human.assign(nn, std::vector<double>(na, kNan));
  grid.delta.assign(nn, std::vector<double>(na, kNan));
  grid.count_engine.assign(nn, std::vector<long>(na, 0));
  grid.count_human.assign(nn, std::vector<long>(na, 0));

  double delta_sum = 0.0;
  for (size_t ni = 0; ni < nn; ++ni) {
    for (size_t ai = 0; ai < na; ++ai) {
      cell_stats(engine_dataset, n_values[ni], alpha_values[ai], &grid.c_engine[ni][ai],
                 &grid.count_engine[ni][ai]);
      cell_stats(human_dataset, n_values[ni], alpha_values[ai], &grid.c_human[ni][ai],
                 &grid.count_human[ni][ai]);
      if (grid.cell_defined(ni, ai)) {
        grid.delta[ni][ai] = grid.c_engine[ni][ai] - grid.c_human[ni][ai];
        delta_sum += grid.delta[ni][ai];
        ++grid.defined_cells;
      }
    }
  }
  if (grid.defined_cells == 0)
    throw AnalysisError("gap_grid: no cell reaches min_cell=" + std::to_string(min_cell));
  grid.mean_delta = delta_sum / grid.defined_cells;
  return grid;
}

namespace {

std::string provenance_line(const ReportInputs& inputs) {
  std::ostringstream out;
  out << "# schema_version=" << kSchemaVersion << " config_hash=" << inputs.config_hash
      << " seed=" << inputs.seed << "\n";
  return out.str();
}

// Tiny static SVG helpers: one polyline chart, one heatmap. CSV is the
// authoritative output; these exist for quick eyeballing.
std::string svg_header(int w, int h) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return out.str();
}

std::string polyline_chart(const std::vector<std::vector<std::pair<double, double>>>& series,
                           const std::vector<std::string>& labels, const std::string& title) {
  const int w = 640, h = 420, margin = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = 1.0;
  for (const auto& s : series)
    for (auto [x, y] : s) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto sx = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (w - 2 * margin); };
  auto sy = [&](double y) { return h - margin - (y - ymin) / (ymax - ymin) * (h - 2 * margin); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::ostringstream out;
  out << svg_header(w, h);
  out << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
      << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << h - margin << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double y = ymin + (ymax - ymin) * i / 4.0;
    out << "<text x=\"" << margin - 6 << "\" y=\"" << sy(y) + 4
        << "\" text-anchor=\"end\" font-size=\"10\">" << y << "</text>\n";
    double x = xmin + (xmax - xmin) * i / 4.0;
    out << "<text x=\"" << sx(x) << "\" y=\"" << h - margin + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << x << "</text>\n";
  }
  for (size_t si = 0; si < series.size(); ++si) {
    out << "<polyline fill=\"none\" stroke=\"" << colors[si % 4] << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : series[si]) out << sx(x) << "," << sy(y) << " ";
    out << "\"/>\n";
    if (si < labels.size()) {
      out << "<text x=\"" << w - margin - 4 << "\" y=\"" << margin + 16 * (si + 1)
          << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << colors[si % 4] << "\">"
          << labels[si] << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string heatmap_chart(const GapGrid& grid) {
  const int cell = 46, margin = 70;
  int w = margin * 2 + cell * static_cast<int>(grid.alpha_values.size());
  int h = margin * 2 + cell * static_cast<int>(grid.n_values.size());
  std::ostringstream out;
  out << svg_header(w, h);
  out << "<text x=\"" << w / 2
      << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">conversion gap (engine - human)"
      << "</text>\n";
  for (size_t ni = 0; ni < grid.n_values.size(); ++ni) {
    out << "<text x=\"" << margin - 8 << "\" y=\"" << margin + cell * ni + cell / 2 + 4
        << "\" text-anchor=\"end\" font-size=\"10\">n=" << grid.n_values[ni] << "</text>\n";
    for (size_t ai = 0; ai < grid.alpha_values.size(); ++ai) {
      if (ni == 0) {
        out << "<text x=\"" << margin + cell * ai + cell / 2 << "\" y=\"" << margin - 8
            << "\" text-anchor=\"middle\" font-size=\"10\">a=" << grid.alpha_values[ai]
            << "</text>\n";
      }
      std::string fill = "#dddddd";
      std::string label = "-";
      if (grid.cell_defined(ni, ai)) {
        double d = grid.delta[ni][ai];
        double unit = std::clamp(d / 0.2, -1.0, 1.0);
        int red = unit > 0 ? 255 : static_cast<int>(255 * (1.0 + unit));
        int blue = unit < 0 ? 255 : static_cast<int>(255 * (1.0 - unit));
        int green = std::min(red, blue);
        char color[16];
        std::snprintf(color, sizeof color, "#%02x%02x%02x", red, green, blue);
        fill = color;
        char text[16];
        std::snprintf(text, sizeof text, "%.2f", d);
        label = text;
      }
      out << "<rect x=\"" << margin + cell * ai << "\" y=\"" << margin + cell * ni
          << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"" << fill
          << "\" stroke=\"white\"/>\n";
      out << "<text x=\"" << margin + cell * ai + cell / 2 << "\" y=\""
          << margin + cell * ni + cell / 2 + 4
          << "\" text-anchor=\"middle\" font-size=\"10\">" << label << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace

std::vector<std::filesystem::path> write_report(const ReportInputs& inputs,
                                                const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> written;
  bool any = !inputs.score_vs_budget.empty() || inputs.bank || inputs.sim || inputs.grid;
  if (!any) {
    throw AnalysisError(
        "report has nothing to render; expected at least one of: score-vs-budget table, "
        "calibration bank, simulation report, gap grid");
  }
  fs::create_directories(out_dir);

  if (!inputs.score_vs_budget.empty()) {
    std::ostringstream csv;
    csv << provenance_line(inputs) << "budget,avg_score\n";
    std::vector<std::pair<double, double>> line;
    for (auto [budget, score] : inputs.score_vs_budget) {
      csv << budget << "," << score << "\n";
      line.emplace_back(budget, score);
    }
    fs::path p = out_dir / "score_vs_budget.csv";
    atomic_write_file(p, csv.str());
    written.push_back(p);
    fs::path svg = out_dir / "score_vs_budget.svg";
    atomic_write_file(svg, polyline_chart({line}, {"avg score"}, "average score vs budget"));
    written.push_back(svg);
  }

  if (inputs.bank != nullptr) {
    // Two bucket curves on one axis: an early bucket and a later one.
    const CalibrationBank& bank = *inputs.bank;
    int early_move = std::min(5, bank.horizon);
    int late_move = std::min(30, bank.horizon);
    std::ostringstream csv;
    csv << provenance_line(inputs) << "x,early_bucket,late_bucket\n";
    std::vector<std::pair<double, double>> early, late;
    for (int i = 0; i <= 100; ++i) {
      double x = i / 100.0;
      double e = bank.calibrate(early_move, x);
      double l = bank.calibrate(late_move, x);
      csv << x << "," << e << "," << l << "\n";
      early.emplace_back(x, e);
      late.emplace_back(x, l);
    }
    fs::path p = out_dir / "calibration_curves.csv";
    atomic_write_file(p, csv.str());
    written.push_back(p);
    fs::path svg = out_dir / "calibration_curves.svg";
    atomic_write_file(
        svg, polyline_chart({early, late},
                            {"move " + std::to_string(early_move), "move " + std::to_string(late_move)},
                            "calibrated win probability vs raw score"));
    written.push_back(svg);
  }

  if (inputs.sim != nullptr) {
    std::ostringstream csv;
    csv << provenance_line(inputs) << "assist,frac_fired,avg_move\n";
    for (size_t k = 0; k < inputs.sim->frac_fired.size(); ++k)
      csv << k + 1 << "," << inputs.sim->frac_fired[k] << "," << inputs.sim->avg_move[k] << "\n";
    csv << "# avg_score=" << inputs.sim->avg_score << " runs=" << inputs.sim->runs << "\n";
    fs::path p = out_dir / "sim_diagnostics.csv";
    atomic_write_file(p, csv.str());
    written.push_back(p);
  }

  if (inputs.grid != nullptr) {
    std::ostringstream csv;
    csv << provenance_line(inputs) << "n,alpha,c_engine,c_human,delta,count_engine,count_human\n";
    for (size_t ni = 0; ni < inputs.grid->n_values.size(); ++ni) {
      for (size_t ai = 0; ai < inputs.grid->alpha_values.size(); ++ai) {
        csv << inputs.grid->n_values[ni] << "," << inputs.grid->alpha_values[ai] << ",";
        if (inputs.grid->cell_defined(ni, ai)) {
          csv << inputs.grid->c_engine[ni][ai] << "," << inputs.grid->c_human[ni][ai] << ","
              << inputs.grid->delta[ni][ai];
        } else {
          csv << ",,";
        }
        csv << "," << inputs.grid->count_engine[ni][ai] << ","
            << inputs.grid->count_human[ni][ai] << "\n";
      }
    }
    csv << "# mean_delta=" << inputs.grid->mean_delta
        << " defined_cells=" << inputs.grid->defined_cells << "\n";
    fs::path p = out_dir / "gap_grid.csv";
    atomic_write_file(p, csv.str());
    written.push_back(p);
    fs::path svg = out_dir / "gap_grid.svg";
    atomic_write_file(svg, heatmap_chart(*inputs.grid));
    written.push_back(svg);
  }
  return written;
}

}  // namespace chesslab
