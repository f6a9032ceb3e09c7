#pragma once

#include <cstdint>
#include <vector>

#include "chatclf/embeddings.hpp"
#include "chatclf/gbt.hpp"

namespace chatclf {

struct ProbeRunResult {
  std::vector<bool> kept_mask;      // importances[j] > probe_importance
  double probe_importance = 0.0;
  std::vector<double> importances;  // total gain per real feature
  std::uint64_t seed = 0;

  std::size_t kept() const;
};

// Appends one standard-normal probe column drawn from `seed`, fits boosted
// trees on [X, probe] and keeps the features whose total gain strictly
// exceeds the probe's. Ties, including both at zero, are dropped.
ProbeRunResult probe_run(const LabeledDataset& data, std::uint64_t seed,
                         const GBTConfig& config = {});

struct SelectionReport {
  std::vector<double> keep_fraction_per_feature;
  std::vector<bool> final_mask;  // keep_fraction >= tau
  int runs = 0;
  double tau = 0.5;
  double mean_reduction = 0.0;   // mean over runs of 1 - kept/d
  std::vector<std::size_t> kept_per_run;
  std::uint64_t seed = 0;

  std::size_t kept() const;
};

// Seed of run r is derive_seed(seed, "probe", r); runs may execute in
// parallel without changing the report.
SelectionReport probe_select_mc(const LabeledDataset& data, int runs = 1000, double tau = 0.5,
                                std::uint64_t seed = 0, const GBTConfig& config = {});

// Rebuilds the final mask of an existing report at another tau.
std::vector<bool> threshold_mask(const std::vector<double>& keep_fraction, double tau);

LabeledDataset apply_mask(const LabeledDataset& data, const std::vector<bool>& mask);
Matrix apply_mask(const Matrix& x, const std::vector<bool>& mask);

// Compact bitset file: "QMSK" | u32 version | u32 length | ceil(length / 8)
// bytes, bit j of byte j / 8 set when feature j is kept (LSB first).
void write_mask(const std::vector<bool>& mask, std::ostream& out);
std::vector<bool> read_mask(std::istream& in);

}  // namespace chatclf
