#include "chatclf/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "chatclf/csv.hpp"
#include "chatclf/error.hpp"

namespace chatclf {
namespace {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double metric_of(const MetricSummary& s, int metric) {
  switch (metric) {
    case 0: return s.accuracy.mean;
    case 1: return s.precision.mean;
    case 2: return s.recall.mean;
    default: return s.f1.mean;
  }
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

const MonteCarloResult& require(const std::optional<MonteCarloResult>& r, const std::string& figure,
                                const std::string& experiment) {
  if (!r) throw ValidationError(figure + " needs the " + experiment + " experiment, which has no results");
  return *r;
}

std::vector<std::vector<double>> f1_columns(const MonteCarloResult& r, std::size_t& run_count) {
  std::vector<std::vector<double>> cols;
  run_count = 0;
  for (const auto& model : r.model_order) {
    std::vector<double> col;
    for (const auto& m : r.runs_of(model)) col.push_back(m.f1);
    run_count = std::max(run_count, col.size());
    cols.push_back(std::move(col));
  }
  return cols;
}

std::string distribution_csv(const MonteCarloResult& r) {
  std::size_t n = 0;
  const auto cols = f1_columns(r, n);
  std::ostringstream out;
  std::vector<std::string> header{"run"};
  header.insert(header.end(), r.model_order.begin(), r.model_order.end());
  out << csv::join(header) << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << i;
    for (const auto& c : cols) out << ',' << (i < c.size() ? format_g17(c[i]) : "");
    out << '\n';
  }
  return out.str();
}

void check_columns(const std::vector<std::string>& header, const std::vector<std::string>& expected,
                   const std::string& what) {
  if (header != expected) {
    throw ValidationError(what + ": expected header " + csv::join(expected) + ", got " + csv::join(header));
  }
}

double parse_real(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError(what + ": bad number '" + s + "'");
}

RunMetrics parse_run_fields(const std::vector<std::string>& f, std::size_t offset, const std::string& what) {
  RunMetrics m;
  m.model_kind = f[offset];
  m.run_index = static_cast<std::size_t>(parse_real(f[offset + 1], what));
  m.seed = std::stoull(f[offset + 2]);
  m.accuracy = parse_real(f[offset + 3], what);
  m.precision = parse_real(f[offset + 4], what);
  m.recall = parse_real(f[offset + 5], what);
  m.f1 = parse_real(f[offset + 6], what);
  if (f[offset + 7] != "0" && f[offset + 7] != "1") throw ValidationError(what + ": reduced must be 0 or 1");
  m.reduced = f[offset + 7] == "1";
  return m;
}

std::string run_fields(const RunMetrics& m) {
  return csv::join({m.model_kind, std::to_string(m.run_index), std::to_string(m.seed), format_g17(m.accuracy),
                    format_g17(m.precision), format_g17(m.recall), format_g17(m.f1), m.reduced ? "1" : "0"});
}

const std::vector<std::string> kRunHeader = {"model", "run", "seed", "accuracy", "precision",
                                             "recall", "f1", "reduced"};

}  // namespace

std::string format_fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  return s == "-0.000" ? "0.000" : s;
}

Table2 render_table2(const std::vector<SummaryBlock>& blocks) {
  if (blocks.empty()) throw ValidationError("render_table2: no summaries");
  Table2 t;
  for (const auto& b : blocks) {
    if (b.models.empty()) throw ValidationError("render_table2: block has no models");
    Table2Block out;
    out.reduced = b.reduced;
    for (const auto& [name, s] : b.models) out.models.push_back(name);
    for (int metric = 0; metric < 4; ++metric) {
      std::vector<double> row;
      for (const auto& [name, s] : b.models) row.push_back(metric_of(s, metric));
      std::string best_text;
      double best_value = -1.0;
      for (double v : row) {
        if (v > best_value) {
          best_value = v;
          best_text = format_fixed3(v);
        }
      }
      std::vector<bool> best;
      for (double v : row) best.push_back(format_fixed3(v) == best_text);
      out.values.push_back(std::move(row));
      out.best.push_back(std::move(best));
    }
    t.blocks.push_back(std::move(out));
  }
  return t;
}

std::string Table2::text() const {
  std::ostringstream out;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    if (bi) out << '\n';
    out << (b.reduced ? "with feature reduction" : "without feature reduction") << '\n';
    out << pad("metric", 11);
    for (const auto& m : b.models) out << pad(m, 8);
    out << '\n';
    for (int metric = 0; metric < 4; ++metric) {
      out << pad(kMetricNames[metric], 11);
      for (std::size_t j = 0; j < b.models.size(); ++j) {
        out << pad(format_fixed3(b.values[metric][j]) + (b.best[metric][j] ? "*" : ""), 8);
      }
      out << '\n';
    }
  }
  std::string s = out.str();
  // Trailing spaces from column padding are dropped line by line.
  std::string trimmed;
  std::istringstream lines(s);
  for (std::string line; std::getline(lines, line);) {
    line.erase(line.find_last_not_of(' ') + 1);
    trimmed += line + '\n';
  }
  return trimmed;
}

SummaryBlock summary_block(const MonteCarloResult& result, bool reduced) {
  SummaryBlock b;
  b.reduced = reduced;
  for (const auto& m : result.model_order) b.models.emplace_back(m, result.summaries.at(m));
  return b;
}

std::string figure_csv(const std::string& figure, const ExperimentResults& results) {
  if (figure == "fig4") {
    const auto& cag = require(results.cag, figure, "CAg fusion comparison");
    const auto& mag = require(results.mag, figure, "MAg fusion comparison");
    std::size_t n_cag = 0, n_mag = 0;
    const auto a = f1_columns(cag, n_cag);
    const auto b = f1_columns(mag, n_mag);
    std::vector<std::string> header{"run"};
    std::vector<const std::vector<double>*> cols;
    for (std::size_t i = 0; i < cag.model_order.size(); ++i) {
      const auto& model = cag.model_order[i];
      const auto it = std::find(mag.model_order.begin(), mag.model_order.end(), model);
      if (it == mag.model_order.end()) {
        throw ValidationError("fig4: model " + model + " missing from the MAg results");
      }
      header.push_back(model + ":CAg");
      header.push_back(model + ":MAg");
      cols.push_back(&a[i]);
      cols.push_back(&b[static_cast<std::size_t>(it - mag.model_order.begin())]);
    }
    std::ostringstream out;
    out << csv::join(header) << '\n';
    for (std::size_t r = 0; r < std::max(n_cag, n_mag); ++r) {
      out << r;
      for (const auto* c : cols) out << ',' << (r < c->size() ? format_g17((*c)[r]) : "");
      out << '\n';
    }
    return out.str();
  }
  if (figure == "fig5") return distribution_csv(require(results.without_reduction, figure, "comparison without reduction"));
  if (figure == "fig6") return distribution_csv(require(results.with_reduction, figure, "comparison with reduction"));
  if (figure == "fig7") {
    const auto& without = require(results.without_reduction, figure, "comparison without reduction");
    const auto& with = require(results.with_reduction, figure, "comparison with reduction");
    const auto a = without.runs_of(results.paired_model);
    const auto b = with.runs_of(results.paired_model);
    if (a.empty() || b.empty()) {
      throw ValidationError("fig7: model " + results.paired_model + " missing from the comparison results");
    }
    if (a.size() != b.size()) throw ValidationError("fig7: paired runs differ in count");
    std::ostringstream out;
    out << "run,without_reduction,with_reduction\n";
    for (std::size_t r = 0; r < a.size(); ++r) out << r << ',' << format_g17(a[r].f1) << ',' << format_g17(b[r].f1) << '\n';
    return out.str();
  }
  if (figure == "fig8") {
    if (!results.sweep) throw ValidationError("fig8 needs the train-size sweep experiment, which has no results");
    std::ostringstream out;
    out << "train_fraction,runs,mean_f1,median_f1,std_f1,min_f1,max_f1\n";
    for (const auto& p : results.sweep->points) {
      const auto& f = p.summary.f1;
      out << csv::join({format_g17(p.train_fraction), std::to_string(p.summary.runs), format_g17(f.mean),
                        format_g17(f.median), format_g17(f.std), format_g17(f.min), format_g17(f.max)})
          << '\n';
    }
    return out.str();
  }
  throw ValidationError("unknown figure '" + figure + "'");
}

std::map<std::string, std::string> emit_figure_data(const ExperimentResults& results,
                                                    const std::vector<std::string>& figures) {
  std::map<std::string, std::string> out;
  for (const auto& f : figures) out[f + ".csv"] = figure_csv(f, results);
  return out;
}

std::vector<std::string> available_figures(const ExperimentResults& results) {
  std::vector<std::string> out;
  if (results.cag && results.mag) out.push_back("fig4");
  if (results.without_reduction) out.push_back("fig5");
  if (results.with_reduction) out.push_back("fig6");
  if (results.without_reduction && results.with_reduction) out.push_back("fig7");
  if (results.sweep) out.push_back("fig8");
  return out;
}

void write_runs_csv(const std::vector<RunMetrics>& runs, std::ostream& out) {
  out << csv::join(kRunHeader) << '\n';
  for (const auto& m : runs) out << run_fields(m) << '\n';
}

std::vector<RunMetrics> read_runs_csv(std::istream& in) {
  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header) throw ValidationError("runs CSV: empty file");
  check_columns(*header, kRunHeader, "runs CSV");
  std::vector<RunMetrics> runs;
  while (auto f = reader.next()) {
    const std::string what = "runs CSV line " + std::to_string(reader.record_line());
    if (f->size() != kRunHeader.size()) throw ValidationError(what + ": wrong field count");
    runs.push_back(parse_run_fields(*f, 0, what));
  }
  return runs;
}

void write_sweep_csv(const SweepResult& sweep, std::ostream& out) {
  std::vector<std::string> header{"train_fraction"};
  header.insert(header.end(), kRunHeader.begin(), kRunHeader.end());
  out << csv::join(header) << '\n';
  for (const auto& p : sweep.points) {
    for (const auto& m : p.runs) out << format_g17(p.train_fraction) << ',' << run_fields(m) << '\n';
  }
}

SweepResult read_sweep_csv(std::istream& in) {
  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header) throw ValidationError("sweep CSV: empty file");
  std::vector<std::string> expected{"train_fraction"};
  expected.insert(expected.end(), kRunHeader.begin(), kRunHeader.end());
  check_columns(*header, expected, "sweep CSV");
  SweepResult sweep;
  while (auto f = reader.next()) {
    const std::string what = "sweep CSV line " + std::to_string(reader.record_line());
    if (f->size() != expected.size()) throw ValidationError(what + ": wrong field count");
    const double frac = parse_real((*f)[0], what);
    RunMetrics m = parse_run_fields(*f, 1, what);
    if (sweep.model_kind.empty()) sweep.model_kind = m.model_kind;
    if (sweep.points.empty() || sweep.points.back().train_fraction != frac) {
      if (!sweep.points.empty() && !(frac > sweep.points.back().train_fraction)) {
        throw ValidationError(what + ": train fractions must be increasing");
      }
      sweep.points.push_back({frac, {}, {}});
    }
    sweep.points.back().runs.push_back(m);
  }
  for (auto& p : sweep.points) p.summary = summarize(p.runs);
  return sweep;
}

void write_reduction_csv(const std::vector<double>& per_run, std::ostream& out) {
  out << "run,reduction\n";
  for (std::size_t r = 0; r < per_run.size(); ++r) out << r << ',' << format_g17(per_run[r]) << '\n';
}

std::vector<double> read_reduction_csv(std::istream& in) {
  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header) throw ValidationError("reduction CSV: empty file");
  check_columns(*header, {"run", "reduction"}, "reduction CSV");
  std::vector<double> out;
  while (auto f = reader.next()) {
    const std::string what = "reduction CSV line " + std::to_string(reader.record_line());
    if (f->size() != 2 || parse_real((*f)[0], what) != static_cast<double>(out.size())) {
      throw ValidationError(what + ": expected run " + std::to_string(out.size()));
    }
    out.push_back(parse_real((*f)[1], what));
  }
  return out;
}

Json to_json(const MetricSummary& s) {
  Json j;
  j["runs"] = s.runs;
  const MetricStats* stats[4] = {&s.accuracy, &s.precision, &s.recall, &s.f1};
  for (int i = 0; i < 4; ++i) {
    j[kMetricNames[i]] = {{"mean", stats[i]->mean}, {"median", stats[i]->median}, {"std", stats[i]->std},
                          {"min", stats[i]->min}, {"max", stats[i]->max}};
  }
  j["f1_histogram"] = s.f1_histogram;
  return j;
}

Json summary_json(const MonteCarloResult& result) {
  Json j;
  Json models = Json::array();
  for (const auto& m : result.model_order) {
    Json entry = {{"model", m}};
    entry.update(to_json(result.summaries.at(m)));
    models.push_back(entry);
  }
  j["models"] = models;
  const bool reduced = !result.runs.empty() && result.runs.front().reduced;
  if (reduced && !result.reduction_per_run.empty()) {
    const auto r = describe(result.reduction_per_run);
    j["reduction"] = {{"mean", r.mean}, {"median", r.median}, {"std", r.std}, {"min", r.min}, {"max", r.max}};
  }
  return j;
}

Json summary_json(const SweepResult& sweep) {
  Json points = Json::array();
  for (const auto& p : sweep.points) {
    Json entry = {{"train_fraction", p.train_fraction}};
    entry.update(to_json(p.summary));
    points.push_back(entry);
  }
  return Json{{"model", sweep.model_kind}, {"points", points}};
}

MonteCarloResult result_from_runs(const std::vector<RunMetrics>& runs) {
  MonteCarloResult r;
  r.runs = runs;
  for (const auto& m : runs) {
    if (std::find(r.model_order.begin(), r.model_order.end(), m.model_kind) == r.model_order.end()) {
      r.model_order.push_back(m.model_kind);
    }
  }
  for (const auto& model : r.model_order) r.summaries[model] = summarize(r.runs_of(model));
  return r;
}

void ReportBundle::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, contents] : files) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    out << contents;
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  }
}

ReportBundle make_report(const ExperimentResults& results, Json provenance) {
  std::vector<SummaryBlock> blocks;
  if (results.without_reduction) blocks.push_back(summary_block(*results.without_reduction, false));
  if (results.with_reduction) blocks.push_back(summary_block(*results.with_reduction, true));
  if (blocks.empty()) {
    throw ValidationError("report needs the model comparison experiment (with or without reduction)");
  }
  ReportBundle bundle;
  bundle.table2 = render_table2(blocks);
  bundle.files["table2.txt"] = bundle.table2.text();
  for (auto& [name, contents] : emit_figure_data(results, available_figures(results))) {
    bundle.files[name] = std::move(contents);
  }

  std::vector<RunMetrics> all;
  Json summary;
  if (results.without_reduction) {
    all.insert(all.end(), results.without_reduction->runs.begin(), results.without_reduction->runs.end());
    summary["without_reduction"] = summary_json(*results.without_reduction);
  }
  if (results.with_reduction) {
    all.insert(all.end(), results.with_reduction->runs.begin(), results.with_reduction->runs.end());
    summary["with_reduction"] = summary_json(*results.with_reduction);
  }
  std::ostringstream runs_csv;
  write_runs_csv(all, runs_csv);
  if (results.with_reduction) {
    std::ostringstream red;
    write_reduction_csv(results.with_reduction->reduction_per_run, red);
    bundle.files["reduction.csv"] = red.str();
  }
  bundle.files["runs.csv"] = runs_csv.str();

  if (results.cag && results.mag) {
    summary["fusion"] = {{"CAg", summary_json(*results.cag)}, {"MAg", summary_json(*results.mag)}};
    std::ostringstream a, b;
    write_runs_csv(results.cag->runs, a);
    write_runs_csv(results.mag->runs, b);
    bundle.files["runs_cag.csv"] = a.str();
    bundle.files["runs_mag.csv"] = b.str();
  }
  if (results.sweep) {
    summary["sweep"] = summary_json(*results.sweep);
    std::ostringstream s;
    write_sweep_csv(*results.sweep, s);
    bundle.files["sweep.csv"] = s.str();
  }
  if (results.cv) {
    summary["cv"] = summary_json(*results.cv);
    std::ostringstream s;
    write_runs_csv(results.cv->runs, s);
    bundle.files["cv_runs.csv"] = s.str();
    if (!results.cv->runs.empty() && results.cv->runs.front().reduced) {
      std::ostringstream red;
      write_reduction_csv(results.cv->reduction_per_run, red);
      bundle.files["cv_reduction.csv"] = red.str();
    }
  }
  bundle.files["summary.json"] = summary.dump(2) + "\n";
  bundle.provenance = std::move(provenance);
  bundle.files["provenance.json"] = bundle.provenance.dump(2) + "\n";
  return bundle;
}

}  // namespace chatclf
