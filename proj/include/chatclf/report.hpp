#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chatclf/eval.hpp"

namespace chatclf {

using Json = nlohmann::ordered_json;

inline constexpr const char* kMetricNames[4] = {"accuracy", "precision", "recall", "f1"};

struct SummaryBlock {
  bool reduced = false;
  std::vector<std::pair<std::string, MetricSummary>> models;  // column order
};

struct Table2Block {
  bool reduced = false;
  std::vector<std::string> models;
  // values[metric][model] holds the mean; best marks every cell equal to the
  // row maximum at the printed precision.
  std::vector<std::vector<double>> values;
  std::vector<std::vector<bool>> best;
};

struct Table2 {
  std::vector<Table2Block> blocks;

  // Three decimals, best cells suffixed with '*'.
  std::string text() const;
};

Table2 render_table2(const std::vector<SummaryBlock>& blocks);

// Block of a comparison result, models in the order they were evaluated.
SummaryBlock summary_block(const MonteCarloResult& result, bool reduced);

std::string format_fixed3(double v);

struct ExperimentResults {
  std::optional<MonteCarloResult> cag;
  std::optional<MonteCarloResult> mag;
  std::optional<MonteCarloResult> without_reduction;
  std::optional<MonteCarloResult> with_reduction;
  std::optional<SweepResult> sweep;
  std::optional<MonteCarloResult> cv;
  std::string paired_model = "SVM";
};

inline const std::vector<std::string> kFigureNames = {"fig4", "fig5", "fig6", "fig7", "fig8"};

// fig4: run, then <model>:CAg and <model>:MAg f1 per model.
// fig5/fig6: run, then one f1 column per model, without/with reduction.
// fig7: run, f1 without and with reduction for the paired model.
// fig8: one row per train fraction with the f1 summary.
// Throws ValidationError naming the experiment a figure needs when absent.
std::string figure_csv(const std::string& figure, const ExperimentResults& results);
std::map<std::string, std::string> emit_figure_data(const ExperimentResults& results,
                                                    const std::vector<std::string>& figures = kFigureNames);
std::vector<std::string> available_figures(const ExperimentResults& results);

// Per-run CSV: model,run,seed,accuracy,precision,recall,f1,reduced. Reals are
// written with 17 significant digits so they read back exactly.
void write_runs_csv(const std::vector<RunMetrics>& runs, std::ostream& out);
std::vector<RunMetrics> read_runs_csv(std::istream& in);
// Sweep CSV: the per-run columns with train_fraction first.
void write_sweep_csv(const SweepResult& sweep, std::ostream& out);
SweepResult read_sweep_csv(std::istream& in);

// run,reduction: fraction of features removed in each run.
void write_reduction_csv(const std::vector<double>& per_run, std::ostream& out);
std::vector<double> read_reduction_csv(std::istream& in);

Json summary_json(const MonteCarloResult& result);
Json summary_json(const SweepResult& sweep);
Json to_json(const MetricSummary& summary);

// Rebuilds a comparison result from stored per-run rows (summaries recomputed).
MonteCarloResult result_from_runs(const std::vector<RunMetrics>& runs);

struct ReportBundle {
  Table2 table2;
  std::map<std::string, std::string> files;  // file name -> contents
  Json provenance;

  void write(const std::filesystem::path& dir) const;
};

// Renders everything the results support. Needs at least one comparison.
ReportBundle make_report(const ExperimentResults& results, Json provenance);

}  // namespace chatclf
