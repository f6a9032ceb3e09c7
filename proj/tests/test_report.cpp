#include <doctest.h>

#include <cmath>
#include <sstream>

#include "chatclf/csv.hpp"
#include "chatclf/error.hpp"
#include "chatclf/report.hpp"
#include "chatclf/rng.hpp"
#include "helpers.hpp"

using namespace chatclf;

namespace {

RunMetrics run(const std::string& model, std::size_t index, double f1, bool reduced = false) {
  RunMetrics m;
  m.model_kind = model;
  m.run_index = index;
  m.seed = 1000 + index;
  m.accuracy = f1;
  m.precision = 0.5 + f1 / 2;
  m.recall = f1 * 0.9;
  m.f1 = f1;
  m.reduced = reduced;
  return m;
}

MonteCarloResult comparison(const std::vector<std::string>& models, std::size_t runs, std::uint64_t seed,
                            bool reduced = false) {
  Rng rng(seed);
  std::vector<RunMetrics> all;
  for (const auto& m : models) {
    for (std::size_t r = 0; r < runs; ++r) all.push_back(run(m, r, 0.7 + 0.3 * rng.uniform(), reduced));
  }
  auto res = result_from_runs(all);
  if (reduced) res.reduction_per_run.assign(runs, 0.5);
  return res;
}

SweepResult sweep(std::size_t points, std::size_t runs) {
  std::vector<double> fr = default_sweep_fractions();
  fr.resize(points);
  SweepResult s;
  s.model_kind = "SVM";
  for (double f : fr) {
    SweepPoint p;
    p.train_fraction = f;
    for (std::size_t r = 0; r < runs; ++r) p.runs.push_back(run("SVM", r, f));
    p.summary = summarize(p.runs);
    s.points.push_back(p);
  }
  return s;
}

std::vector<std::vector<std::string>> parse(const std::string& text) {
  std::istringstream in(text);
  csv::Reader reader(in);
  std::vector<std::vector<std::string>> rows;
  while (auto r = reader.next()) rows.push_back(*r);
  return rows;
}

}  // namespace

TEST_CASE("one model and one block give a 4 x 1 grid") {
  const auto res = comparison({"SVM"}, 3, 1);
  const auto t = render_table2({summary_block(res, false)});
  REQUIRE(t.blocks.size() == 1);
  CHECK(t.blocks[0].models == std::vector<std::string>{"SVM"});
  REQUIRE(t.blocks[0].values.size() == 4);
  for (const auto& row : t.blocks[0].values) CHECK(row.size() == 1);
  for (const auto& row : t.blocks[0].best) CHECK(row == std::vector<bool>{true});
  CHECK(t.text().find("without feature reduction") != std::string::npos);
  CHECK_THROWS_AS(render_table2({}), ValidationError);
  CHECK_THROWS_AS(render_table2({SummaryBlock{}}), ValidationError);
}

TEST_CASE("tied cells are all marked best") {
  SummaryBlock b;
  MetricSummary hi, lo;
  hi.runs = lo.runs = 1;
  hi.accuracy.mean = hi.precision.mean = hi.recall.mean = hi.f1.mean = 0.95;
  lo.accuracy.mean = lo.precision.mean = lo.recall.mean = lo.f1.mean = 0.90;
  // equal at three decimals
  MetricSummary tie = hi;
  tie.f1.mean = 0.9504;
  b.models = {{"A", hi}, {"B", lo}, {"C", tie}};
  const auto t = render_table2({b});
  const auto& best = t.blocks[0].best;
  CHECK(best[3] == std::vector<bool>{true, false, true});
  CHECK(best[0] == std::vector<bool>{true, false, true});
  const auto text = t.text();
  CHECK(text.find("0.950*") != std::string::npos);
  CHECK(text.find("0.900*") == std::string::npos);
}

TEST_CASE("every printed cell equals the stored summary at three decimals") {
  const auto without = comparison({"MLP", "SVM", "LR"}, 20, 2);
  const auto with = comparison({"MLP", "SVM", "LR"}, 20, 3, true);
  const auto t = render_table2({summary_block(without, false), summary_block(with, true)});
  REQUIRE(t.blocks.size() == 2);
  CHECK(t.blocks[1].reduced);
  const auto text = t.text();
  CHECK(text.find("with feature reduction") != std::string::npos);
  for (std::size_t b = 0; b < 2; ++b) {
    const auto& res = b ? with : without;
    for (std::size_t j = 0; j < 3; ++j) {
      const auto& s = res.summaries.at(t.blocks[b].models[j]);
      const double expect[4] = {s.accuracy.mean, s.precision.mean, s.recall.mean, s.f1.mean};
      for (int m = 0; m < 4; ++m) {
        CHECK(t.blocks[b].values[static_cast<std::size_t>(m)][j] == expect[m]);
        CHECK(text.find(format_fixed3(expect[m])) != std::string::npos);
      }
    }
  }
  CHECK(format_fixed3(0.9555) == "0.956");
  CHECK(format_fixed3(1.0) == "1.000");
}

TEST_CASE("figure CSV shapes") {
  ExperimentResults r;
  const std::vector<std::string> seven{"MLP", "BNB", "KNN", "GBT", "GNB", "SVM", "LR"};
  r.without_reduction = comparison(seven, 5, 4);
  r.with_reduction = comparison(seven, 5, 5, true);
  r.cag = comparison({"SVM"}, 5, 6);
  r.mag = comparison({"SVM"}, 5, 7);
  r.sweep = sweep(19, 2);

  const auto fig5 = parse(figure_csv("fig5", r));
  REQUIRE(fig5.size() == 6);
  CHECK(fig5[0].size() == 8);
  CHECK(fig5[0][0] == "run");
  CHECK(std::vector<std::string>(fig5[0].begin() + 1, fig5[0].end()) == seven);

  const auto fig4 = parse(figure_csv("fig4", r));
  CHECK(fig4[0] == std::vector<std::string>{"run", "SVM:CAg", "SVM:MAg"});

  const auto fig7 = parse(figure_csv("fig7", r));
  CHECK(fig7[0] == std::vector<std::string>{"run", "without_reduction", "with_reduction"});
  CHECK(fig7.size() == 6);

  const auto fig8 = parse(figure_csv("fig8", r));
  CHECK(fig8.size() == 20);
  CHECK(fig8[0] == std::vector<std::string>{"train_fraction", "runs", "mean_f1", "median_f1", "std_f1", "min_f1", "max_f1"});

  CHECK(available_figures(r) == kFigureNames);
  CHECK(emit_figure_data(r).size() == 5);
  CHECK_THROWS_AS(figure_csv("fig9", r), ValidationError);
}

TEST_CASE("missing experiments are named") {
  ExperimentResults empty;
  CHECK(available_figures(empty).empty());
  CHECK_THROWS_WITH_AS(figure_csv("fig8", empty), doctest::Contains("sweep"), ValidationError);
  CHECK_THROWS_WITH_AS(figure_csv("fig4", empty), doctest::Contains("experiment"), ValidationError);
  CHECK_THROWS_AS(make_report(empty, Json::object()), ValidationError);
}

TEST_CASE("per-run CSV round-trips exactly") {
  const auto res = comparison({"GNB", "KNN"}, 7, 8, true);
  std::ostringstream a;
  write_runs_csv(res.runs, a);
  CHECK(a.str().rfind("model,run,seed,accuracy,precision,recall,f1,reduced\n", 0) == 0);
  std::istringstream in(a.str());
  const auto back = read_runs_csv(in);
  REQUIRE(back.size() == res.runs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].model_kind == res.runs[i].model_kind);
    CHECK(back[i].run_index == res.runs[i].run_index);
    CHECK(back[i].seed == res.runs[i].seed);
    CHECK(back[i].f1 == res.runs[i].f1);
    CHECK(back[i].precision == res.runs[i].precision);
    CHECK(back[i].reduced);
  }
  std::ostringstream b;
  write_runs_csv(back, b);
  CHECK(a.str() == b.str());

  const auto sw = sweep(4, 3);
  std::ostringstream s1;
  write_sweep_csv(sw, s1);
  std::istringstream s_in(s1.str());
  const auto sw_back = read_sweep_csv(s_in);
  REQUIRE(sw_back.points.size() == 4);
  CHECK(sw_back.points[2].train_fraction == sw.points[2].train_fraction);
  CHECK(sw_back.points[2].summary.f1.mean == sw.points[2].summary.f1.mean);

  std::ostringstream r1;
  write_reduction_csv({0.25, 0.5}, r1);
  std::istringstream r_in(r1.str());
  CHECK(read_reduction_csv(r_in) == std::vector<double>{0.25, 0.5});
}

TEST_CASE("re-rendering from stored runs changes nothing") {
  ExperimentResults r;
  r.without_reduction = comparison({"SVM", "LR"}, 9, 9);
  r.with_reduction = comparison({"SVM", "LR"}, 9, 10, true);
  r.sweep = sweep(3, 2);
  const auto first = make_report(r, Json::object());

  ExperimentResults again;
  std::vector<RunMetrics> without, with;
  {
    std::istringstream in(first.files.at("runs.csv"));
    for (auto& m : read_runs_csv(in)) (m.reduced ? with : without).push_back(m);
  }
  again.without_reduction = result_from_runs(without);
  again.with_reduction = result_from_runs(with);
  {
    std::istringstream in(first.files.at("reduction.csv"));
    again.with_reduction->reduction_per_run = read_reduction_csv(in);
  }
  {
    std::istringstream in(first.files.at("sweep.csv"));
    again.sweep = read_sweep_csv(in);
  }
  const auto second = make_report(again, Json::object());
  CHECK(first.table2.text() == second.table2.text());
  for (const auto& [name, body] : first.files) {
    CAPTURE(name);
    REQUIRE(second.files.count(name));
    CHECK(second.files.at(name) == body);
  }

  testing::TempDir dir("report");
  first.write(dir.path());
  CHECK(testing::slurp(dir / "table2.txt") == first.table2.text());
  CHECK(std::filesystem::exists(dir / "fig8.csv"));
  CHECK(std::filesystem::exists(dir / "provenance.json"));
}

TEST_CASE("summary JSON carries the recomputed statistics") {
  const auto res = comparison({"SVM"}, 11, 11, true);
  const auto j = summary_json(res);
  const auto& s = res.summaries.at("SVM");
  CHECK(j.dump().find("\"SVM\"") != std::string::npos);
  const auto back = to_json(s);
  CHECK(back["runs"].get<std::size_t>() == 11);
  CHECK(back["f1"]["mean"].get<double>() == s.f1.mean);
  CHECK(back["f1"]["std"].get<double>() == s.f1.std);
}
