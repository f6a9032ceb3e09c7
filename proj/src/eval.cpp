#include "chatclf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chatclf/error.hpp"
#include "chatclf/parallel.hpp"

namespace chatclf {

RunMetrics metrics(const Labels& y_true, const Labels& y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw ValidationError("metrics: y_true has " + std::to_string(y_true.size()) +
                          " labels, y_pred has " + std::to_string(y_pred.size()));
  }
  if (y_true.empty()) throw ValidationError("metrics: empty label vectors");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool t = y_true[i] == 1;
    const bool p = y_pred[i] == 1;
    tp += t && p;
    fp += !t && p;
    fn += t && !p;
    tn += !t && !p;
  }
  RunMetrics m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(y_true.size());
  m.precision_undefined = tp + fp == 0;
  m.recall_undefined = tp + fn == 0;
  m.precision = m.precision_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = m.recall_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double denom = m.precision + m.recall;
  m.f1 = denom > 0 ? 2.0 * m.precision * m.recall / denom : 0.0;
  return m;
}

MetricStats describe(const std::vector<double>& values) {
  MetricStats s;
  if (values.empty()) return s;
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(n));
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

MetricSummary summarize(const std::vector<RunMetrics>& runs) {
  MetricSummary s;
  s.runs = runs.size();
  std::vector<double> acc, prec, rec, f1;
  for (const auto& r : runs) {
    acc.push_back(r.accuracy);
    prec.push_back(r.precision);
    rec.push_back(r.recall);
    f1.push_back(r.f1);
  }
  s.accuracy = describe(acc);
  s.precision = describe(prec);
  s.recall = describe(rec);
  s.f1 = describe(f1);
  s.f1_histogram.assign(kF1HistogramBins, 0);
  for (double v : f1) {
    auto bin = static_cast<std::size_t>(v * kF1HistogramBins);
    ++s.f1_histogram[std::min(bin, kF1HistogramBins - 1)];
  }
  return s;
}

SplitIndices stratified_split(const Labels& y, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train fraction must be in (0, 1)");
  }
  const std::size_t n = y.size();
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] != 0 && y[i] != 1) throw ValidationError("labels must be 0 or 1");
    by_class[y[i]].push_back(i);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));

  std::size_t take[2];
  double remainder[2];
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = train_fraction * static_cast<double>(by_class[c].size());
    take[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(take[c]);
    assigned += take[c];
  }
  while (assigned < n_train) {
    const int c = remainder[1] > remainder[0] ? 1 : 0;
    if (take[c] >= by_class[c].size()) break;
    ++take[c];
    remainder[c] = -1.0;
    ++assigned;
  }
  for (int c = 0; c < 2; ++c) {
    if (take[c] == 0 || take[c] >= by_class[c].size()) {
      throw ValidationError("train fraction " + std::to_string(train_fraction) +
                            " leaves class " + std::to_string(c) + " absent from one side of the split");
    }
  }

  Rng rng(seed);
  SplitIndices split;
  for (int c = 0; c < 2; ++c) {
    auto rows = by_class[c];
    rng.shuffle(rows);
    split.train.insert(split.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take[c]));
    split.test.insert(split.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(take[c]), rows.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::string to_string(MaskMode mode) { return mode == MaskMode::per_run ? "per-run" : "aggregate"; }

MaskMode mask_mode_from_string(const std::string& text) {
  if (text == "per-run" || text == "per_run") return MaskMode::per_run;
  if (text == "aggregate") return MaskMode::aggregate;
  throw ValidationError("unknown mask mode '" + text + "' (expected per-run or aggregate)");
}

std::vector<RunMetrics> MonteCarloResult::runs_of(const std::string& model_kind) const {
  std::vector<RunMetrics> out;
  for (const auto& r : runs) {
    if (r.model_kind == model_kind) out.push_back(r);
  }
  return out;
}

MonteCarloResult mc_compare(const LabeledDataset& data, const std::vector<ModelSpec>& specs,
                            const EvalOptions& options) {
  if (options.runs < 1) throw ValidationError("mc_compare: runs must be >= 1");
  if (specs.empty()) throw ValidationError("mc_compare: no model specs");
  if (data.count(0) == 0 || data.count(1) == 0) {
    throw ValidationError("mc_compare: data must contain both classes");
  }
  for (const auto& s : specs) s.validate();
  const auto& red = options.reduction;

  std::vector<bool> shared_mask;
  if (red.enabled && red.mode == MaskMode::aggregate) {
    shared_mask = red.global_mask;
    if (shared_mask.empty()) {
      shared_mask = probe_select_mc(data, red.aggregate_runs, red.tau,
                                    derive_seed(options.seed, "global-mask"), red.gbt)
                        .final_mask;
    }
    if (shared_mask.size() != data.dim()) {
      throw ValidationError("mc_compare: global mask length does not match data dim");
    }
  }

  const auto runs = static_cast<std::size_t>(options.runs);
  std::vector<std::vector<RunMetrics>> slots(runs);
  MonteCarloResult result;
  result.reduction_per_run.assign(runs, 0.0);
  if (options.record_selection_rows) {
    result.selection_ids.resize(runs);
    result.test_ids.resize(runs);
  }

  parallel_for(runs, [&](std::size_t r) {
    const std::uint64_t split_seed = derive_seed(options.seed, "split", r);
    SplitIndices split;
    try {
      split = stratified_split(data.y, options.train_fraction, split_seed);
    } catch (const ValidationError& e) {
      throw StageError("eval run " + std::to_string(r), e.what());
    }
    LabeledDataset train = data.subset(split.train);
    LabeledDataset test = data.subset(split.test);

    if (red.enabled) {
      std::vector<bool> mask;
      if (red.mode == MaskMode::per_run) {
        if (options.record_selection_rows) result.selection_ids[r] = train.ids;
        mask = probe_run(train, derive_seed(options.seed, "probe", r), red.gbt).kept_mask;
        if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
          throw StageError("eval run " + std::to_string(r), "probe selection kept no features");
        }
      } else {
        mask = shared_mask;
      }
      const auto kept = static_cast<double>(std::count(mask.begin(), mask.end(), true));
      result.reduction_per_run[r] = 1.0 - kept / static_cast<double>(data.dim());
      train = apply_mask(train, mask);
      test.x = apply_mask(test.x, mask);
    }
    if (options.record_selection_rows) result.test_ids[r] = test.ids;

    for (const auto& base : specs) {
      ModelSpec spec = base;
      spec.seed = derive_seed(base.seed ^ options.seed, "fit/" + to_string(base.kind), r);
      try {
        const TrainedModel model = fit(spec, train);
        RunMetrics m = metrics(test.y, predict(model, test.x));
        m.run_index = r;
        m.seed = split_seed;
        m.model_kind = to_string(base.kind);
        m.reduced = red.enabled;
        m.features_used = train.dim();
        slots[r].push_back(m);
      } catch (const ValidationError& e) {
        throw StageError("eval run " + std::to_string(r) + " model " + to_string(base.kind), e.what());
      }
    }
  });

  for (std::size_t s = 0; s < specs.size(); ++s) {
    const std::string kind = to_string(specs[s].kind);
    result.model_order.push_back(kind);
    std::vector<RunMetrics> model_runs;
    for (std::size_t r = 0; r < runs; ++r) model_runs.push_back(slots[r][s]);
    result.summaries[kind] = summarize(model_runs);
    result.runs.insert(result.runs.end(), model_runs.begin(), model_runs.end());
  }
  return result;
}

std::vector<double> default_sweep_fractions() {
  std::vector<double> f;
  for (int k = 1; k <= 19; ++k) f.push_back(k * 0.05);
  return f;
}

SweepResult train_size_sweep(const LabeledDataset& data, const ModelSpec& spec,
                             const std::vector<double>& fractions, int runs_per_fraction,
                             std::uint64_t seed, const ReductionOptions& reduction) {
  if (fractions.empty()) throw ValidationError("train_size_sweep: no fractions");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] > 0.0 && fractions[i] < 1.0)) {
      throw ValidationError("train_size_sweep: fractions must lie in (0, 1)");
    }
    if (i > 0 && !(fractions[i] > fractions[i - 1])) {
      throw ValidationError("train_size_sweep: fractions must be strictly increasing");
    }
    // Fail before any training when a fraction cannot be stratified.
    stratified_split(data.y, fractions[i], 0);
  }
  SweepResult sweep;
  sweep.model_kind = to_string(spec.kind);
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    EvalOptions opt;
    opt.runs = runs_per_fraction;
    opt.train_fraction = fractions[i];
    opt.seed = derive_seed(seed, "sweep", i);
    opt.reduction = reduction;
    const auto mc = mc_compare(data, {spec}, opt);
    sweep.points.push_back({fractions[i], mc.summaries.at(sweep.model_kind), mc.runs});
  }
  return sweep;
}

MonteCarloResult shuffle_split_cv(const LabeledDataset& data, const ModelSpec& spec, int iterations,
                                  double train_fraction, std::uint64_t seed,
                                  const ReductionOptions& reduction) {
  EvalOptions opt;
  opt.runs = iterations;
  opt.train_fraction = train_fraction;
  opt.seed = seed;
  opt.reduction = reduction;
  return mc_compare(data, {spec}, opt);
}

}  // namespace chatclf
