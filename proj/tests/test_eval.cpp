#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "chatclf/error.hpp"
#include "chatclf/eval.hpp"
#include "chatclf/rng.hpp"
#include "chatclf/synthetic.hpp"
#include "helpers.hpp"

using namespace chatclf;

namespace {

LabeledDataset small_benchmark(std::uint64_t seed = 4) {
  SyntheticSpec s;
  s.n_samples = 240;
  s.dim = 20;
  s.n_informative = 4;
  s.class_separation = 1.0;
  s.seed = seed;
  return labeled_dataset(generate(s));
}

ModelSpec svm() { return ModelSpec::make(ModelKind::SVM, {}, 9); }

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("metrics on hand confusion matrices") {
  auto all = metrics({1, 0, 1}, {1, 0, 1});
  CHECK(all.accuracy == 1.0);
  CHECK(all.precision == 1.0);
  CHECK(all.recall == 1.0);
  CHECK(all.f1 == 1.0);

  // TP = FP = FN = TN = 1
  auto half = metrics({1, 1, 0, 0}, {1, 0, 1, 0});
  CHECK(half.accuracy == 0.5);
  CHECK(half.precision == 0.5);
  CHECK(half.recall == 0.5);
  CHECK(half.f1 == 0.5);

  auto zero = metrics({1, 0, 1}, {0, 0, 0});
  CHECK(zero.precision == 0.0);
  CHECK(zero.precision_undefined);
  CHECK(zero.recall == 0.0);
  CHECK_FALSE(zero.recall_undefined);
  CHECK(zero.f1 == 0.0);

  CHECK_THROWS_AS(metrics({1, 0}, {1}), ValidationError);
  CHECK_THROWS_AS(metrics({}, {}), ValidationError);
}

TEST_CASE("f1 is the harmonic mean of precision and recall on random labels") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(30);
    Labels a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.below(2));
      b[i] = static_cast<int>(rng.below(2));
    }
    const auto m = metrics(a, b);
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += a[i] && b[i];
      fp += !a[i] && b[i];
      fn += a[i] && !b[i];
      tn += !a[i] && !b[i];
    }
    CHECK(m.accuracy == doctest::Approx((tp + tn) / static_cast<double>(n)).epsilon(1e-15));
    CHECK(m.precision == (tp + fp > 0 ? tp / (tp + fp) : 0.0));
    CHECK(m.recall == (tp + fn > 0 ? tp / (tp + fn) : 0.0));
    const double pr = m.precision + m.recall;
    CHECK(m.f1 == doctest::Approx(pr > 0 ? 2 * m.precision * m.recall / pr : 0.0).epsilon(1e-15));
    for (double v : {m.accuracy, m.precision, m.recall, m.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("describe uses the population standard deviation") {
  const auto s = describe({1, 2, 3, 4});
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
  CHECK(s.min == 1);
  CHECK(s.max == 4);
  CHECK(describe({7}).std == 0.0);
}

TEST_CASE("stratified split keeps class ratios within one sample") {
  Rng rng(6);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 10 + rng.below(300);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i < 2 ? static_cast<int>(i) : rng.bernoulli(0.3) ? 1 : 0;
    const double frac = 0.1 + 0.8 * rng.uniform();
    SplitIndices s;
    try {
      s = stratified_split(y, frac, rng.next_u64());
    } catch (const ValidationError&) {
      continue;  // a class would be lost on one side
    }
    CHECK(s.train.size() + s.test.size() == n);
    CHECK(s.train.size() == static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))));
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    CHECK(std::is_sorted(s.test.begin(), s.test.end()));
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == n);
    double ones = 0, train_ones = 0;
    for (std::size_t i = 0; i < n; ++i) ones += y[i];
    for (auto i : s.train) train_ones += y[i];
    const double share = ones * static_cast<double>(s.train.size()) / static_cast<double>(n);
    CHECK(std::abs(train_ones - share) <= 1.0);
    const double zero_share = (static_cast<double>(n) - ones) * static_cast<double>(s.train.size()) / static_cast<double>(n);
    CHECK(std::abs((static_cast<double>(s.train.size()) - train_ones) - zero_share) <= 1.0);
  }
}

TEST_CASE("stratified split edge cases") {
  Labels y(100);
  for (std::size_t i = 0; i < 100; ++i) y[i] = static_cast<int>(i % 2);
  const auto s = stratified_split(y, 0.95, 1);
  CHECK(s.train.size() == 95);
  CHECK(s.test.size() == 5);
  CHECK(stratified_split(y, 0.5, 3).train == stratified_split(y, 0.5, 3).train);
  CHECK(stratified_split(y, 0.5, 3).train != stratified_split(y, 0.5, 4).train);
  CHECK_THROWS_AS(stratified_split(y, 0.01, 1), ValidationError);
  CHECK_THROWS_AS(stratified_split(y, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(stratified_split(y, 1.0, 1), ValidationError);
}

TEST_CASE("mc_compare: two runs per model, reproducible and paired") {
  const auto d = small_benchmark();
  EvalOptions opt;
  opt.runs = 2;
  opt.seed = 17;
  const std::vector<ModelSpec> specs{svm(), ModelSpec::make(ModelKind::GNB)};
  const auto a = mc_compare(d, specs, opt);
  const auto b = mc_compare(d, specs, opt);
  CHECK(a.model_order == std::vector<std::string>{"SVM", "GNB"});
  CHECK(a.runs_of("SVM").size() == 2);
  CHECK(a.runs_of("GNB").size() == 2);
  REQUIRE(a.runs.size() == b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].f1 == b.runs[i].f1);
    CHECK(a.runs[i].seed == b.runs[i].seed);
    CHECK(a.runs[i].run_index == i % 2);
  }
  CHECK(a.summaries.at("SVM").runs == 2);
  opt.seed = 18;
  const auto c = mc_compare(d, specs, opt);
  CHECK(c.runs[0].seed != a.runs[0].seed);
  CHECK_THROWS_AS(mc_compare(d, specs, [] { EvalOptions o; o.runs = 0; return o; }()), ValidationError);
}

TEST_CASE("summaries agree with the stored per-run metrics") {
  const auto d = small_benchmark(5);
  EvalOptions opt;
  opt.runs = 25;
  opt.seed = 3;
  const auto r = mc_compare(d, {ModelSpec::make(ModelKind::GNB)}, opt);
  const auto runs = r.runs_of("GNB");
  const auto& s = r.summaries.at("GNB");
  std::vector<double> f1;
  for (const auto& m : runs) f1.push_back(m.f1);
  double mean = 0;
  for (double v : f1) mean += v;
  mean /= static_cast<double>(f1.size());
  double var = 0;
  for (double v : f1) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(f1.size()));
  CHECK(std::abs(s.f1.mean - mean) <= 1e-12);
  CHECK(std::abs(s.f1.median - median_of(f1)) <= 1e-12);
  CHECK(std::abs(s.f1.std - sd) <= 1e-12);
  CHECK(s.f1.min <= s.f1.median);
  CHECK(s.f1.median <= s.f1.max);
  CHECK(s.f1.std >= 0.0);
  std::size_t hist = 0;
  for (auto c : s.f1_histogram) hist += c;
  CHECK(s.f1_histogram.size() == kF1HistogramBins);
  CHECK(hist == runs.size());
}

TEST_CASE("per-run reduction sees only training rows") {
  const auto d = small_benchmark(6);
  EvalOptions opt;
  opt.runs = 4;
  opt.seed = 8;
  opt.reduction.enabled = true;
  opt.reduction.gbt.rounds = 20;
  opt.record_selection_rows = true;
  const auto r = mc_compare(d, {svm()}, opt);
  REQUIRE(r.selection_ids.size() == 4);
  REQUIRE(r.test_ids.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    std::set<std::string> seen(r.selection_ids[i].begin(), r.selection_ids[i].end());
    CHECK_FALSE(seen.empty());
    for (const auto& id : r.test_ids[i]) CHECK(seen.count(id) == 0);
    CHECK(seen.size() + r.test_ids[i].size() == d.size());
  }
  for (const auto& m : r.runs) {
    CHECK(m.reduced);
    CHECK(m.features_used <= d.dim());
  }
  CHECK(r.reduction_per_run.size() == 4);
  for (double v : r.reduction_per_run) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("aggregate reduction applies one mask everywhere") {
  const auto d = small_benchmark(7);
  EvalOptions opt;
  opt.runs = 3;
  opt.reduction.enabled = true;
  opt.reduction.mode = MaskMode::aggregate;
  opt.reduction.global_mask.assign(d.dim(), false);
  opt.reduction.global_mask[0] = opt.reduction.global_mask[3] = true;
  const auto r = mc_compare(d, {svm()}, opt);
  for (const auto& m : r.runs) CHECK(m.features_used == 2);
  for (double v : r.reduction_per_run) CHECK(v == doctest::Approx(18.0 / 20.0));
  CHECK(mask_mode_from_string(to_string(MaskMode::aggregate)) == MaskMode::aggregate);
  CHECK(mask_mode_from_string("per-run") == MaskMode::per_run);
  CHECK_THROWS_AS(mask_mode_from_string("global"), ValidationError);
}

TEST_CASE("train-size sweep") {
  const auto d = small_benchmark(8);
  const auto fr = default_sweep_fractions();
  REQUIRE(fr.size() == 19);
  CHECK(fr.front() == doctest::Approx(0.05));
  CHECK(fr.back() == doctest::Approx(0.95));
  for (std::size_t i = 1; i < fr.size(); ++i) CHECK(fr[i] > fr[i - 1]);

  const auto one = train_size_sweep(d, svm(), {0.5}, 1, 2);
  REQUIRE(one.points.size() == 1);
  CHECK(one.points[0].summary.runs == 1);
  CHECK(one.model_kind == "SVM");

  const auto sw = train_size_sweep(d, svm(), {0.1, 0.3, 0.9}, 3, 2);
  REQUIRE(sw.points.size() == 3);
  for (const auto& p : sw.points) CHECK(p.runs.size() == 3);
  CHECK(sw.points[1].train_fraction == 0.3);

  CHECK_THROWS_AS(train_size_sweep(d, svm(), {0.3, 0.2}, 1, 2), ValidationError);
  CHECK_THROWS_AS(train_size_sweep(d, svm(), {0.001}, 1, 2), ValidationError);
  CHECK_THROWS_AS(train_size_sweep(d, svm(), {}, 1, 2), ValidationError);
}

TEST_CASE("shuffle-split cross-validation") {
  const auto d = small_benchmark(9);
  const auto a = shuffle_split_cv(d, svm(), 10, 0.2, 4);
  const auto b = shuffle_split_cv(d, svm(), 10, 0.2, 4);
  CHECK(a.runs.size() == 10);
  CHECK(a.summaries.at("SVM").f1.mean == b.summaries.at("SVM").f1.mean);
  CHECK(a.summaries.at("SVM").f1.std == b.summaries.at("SVM").f1.std);
}

TEST_CASE("a failed run reports its index") {
  auto d = small_benchmark(10);
  EvalOptions opt;
  opt.runs = 2;
  // more neighbours than training rows fails inside every run
  const auto spec = ModelSpec::make(ModelKind::KNN, {{"k", 239}});
  CHECK_THROWS_WITH_AS(mc_compare(d, {spec}, opt), doctest::Contains("eval run"), StageError);
}
