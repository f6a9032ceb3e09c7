#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "chatclf/classifiers.hpp"
#include "chatclf/feature_select.hpp"
#include "chatclf/rng.hpp"

namespace chatclf {

// Positive class is label 1. Undefined precision or recall (zero
// denominator) is reported as 0 and flagged; f1 is 0 when p + r = 0.
struct RunMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
  std::string model_kind;
  bool reduced = false;
  std::size_t features_used = 0;
};

RunMetrics metrics(const Labels& y_true, const Labels& y_pred);

struct MetricStats {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
};

MetricStats describe(const std::vector<double>& values);

inline constexpr std::size_t kF1HistogramBins = 20;

struct MetricSummary {
  std::size_t runs = 0;
  MetricStats accuracy, precision, recall, f1;
  std::vector<std::size_t> f1_histogram;  // kF1HistogramBins equal bins over [0, 1]
};

MetricSummary summarize(const std::vector<RunMetrics>& runs);

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

// Train size is round(train_fraction * n), split across classes by largest
// remainder so each class's train count is within one of its exact share.
// Throws ValidationError when either side would lose a class.
SplitIndices stratified_split(const Labels& y, double train_fraction, std::uint64_t seed);

enum class MaskMode { per_run, aggregate };

std::string to_string(MaskMode mode);
MaskMode mask_mode_from_string(const std::string& text);

struct ReductionOptions {
  bool enabled = false;
  // per_run: one probe run on each training partition (no leakage).
  // aggregate: `global_mask` applied to every run, or, when empty, one mask
  // from probe_select_mc over the whole dataset.
  MaskMode mode = MaskMode::per_run;
  GBTConfig gbt;
  int aggregate_runs = 100;
  double tau = 0.5;
  std::vector<bool> global_mask;
};

struct EvalOptions {
  int runs = 1000;
  double train_fraction = 0.66;
  std::uint64_t seed = 0;
  ReductionOptions reduction;
  bool record_selection_rows = false;
};

struct MonteCarloResult {
  // Grouped by model in spec order, then by run index.
  std::vector<RunMetrics> runs;
  std::map<std::string, MetricSummary> summaries;
  std::vector<std::string> model_order;
  // Per run: fraction of features removed (0 without reduction).
  std::vector<double> reduction_per_run;
  // Per run, when requested: ids of the rows the selector saw, and the test ids.
  std::vector<std::vector<std::string>> selection_ids;
  std::vector<std::vector<std::string>> test_ids;

  std::vector<RunMetrics> runs_of(const std::string& model_kind) const;
};

// Every run draws one stratified split shared by all models (paired
// comparison). Run r uses split seed derive_seed(seed, "split", r), probe
// seed derive_seed(seed, "probe", r) and model seeds derived from both the
// spec seed and r.
MonteCarloResult mc_compare(const LabeledDataset& data, const std::vector<ModelSpec>& specs,
                            const EvalOptions& options);

struct SweepPoint {
  double train_fraction = 0.0;
  MetricSummary summary;
  std::vector<RunMetrics> runs;
};

struct SweepResult {
  std::string model_kind;
  std::vector<SweepPoint> points;
};

std::vector<double> default_sweep_fractions();  // 0.05, 0.10, ..., 0.95

SweepResult train_size_sweep(const LabeledDataset& data, const ModelSpec& spec,
                             const std::vector<double>& fractions, int runs_per_fraction,
                             std::uint64_t seed, const ReductionOptions& reduction = {});

MonteCarloResult shuffle_split_cv(const LabeledDataset& data, const ModelSpec& spec,
                                  int iterations = 10, double train_fraction = 0.2,
                                  std::uint64_t seed = 0, const ReductionOptions& reduction = {});

}  // namespace chatclf
