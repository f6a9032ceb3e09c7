#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "chatclf/embeddings.hpp"
#include "chatclf/types.hpp"

namespace chatclf {

enum class ModelKind { LR, SVM, GNB, BNB, KNN, GBT, MLP };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
// Column order used in reports.
const std::vector<ModelKind>& all_model_kinds();

using Hyperparams = std::map<std::string, double>;

Hyperparams default_hyperparams(ModelKind kind);

struct ModelSpec {
  ModelKind kind = ModelKind::SVM;
  Hyperparams hyperparams;
  std::uint64_t seed = 0;

  // Defaults for `kind` overlaid with `overrides`; unknown keys and out of
  // range values throw ValidationError.
  static ModelSpec make(ModelKind kind, const Hyperparams& overrides = {}, std::uint64_t seed = 0);

  double get(const std::string& key) const;
  int get_int(const std::string& key) const;
  void validate() const;
};

struct TrainingDiagnostics {
  double final_loss = 0.0;
  int iterations = 0;
  bool converged = false;
  // Objective after each iteration (epoch or boosting round). Non-increasing
  // for LR, SVM and GBT.
  std::vector<double> objective_trace;
};

struct ParamBlob {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
};

using ParamBlobs = std::vector<ParamBlob>;

// Learned state of one model family.
class Classifier {
 public:
  virtual ~Classifier() = default;

  // Probability of class 1 for LR/GNB/BNB/MLP/GBT, signed margin for SVM,
  // vote fraction for KNN.
  virtual Vector score(const Matrix& x) const = 0;
  // predict(x) = score(x) > threshold().
  virtual double threshold() const { return 0.5; }
  virtual ParamBlobs parameters() const = 0;
};

struct TrainedModel {
  ModelSpec spec;
  std::size_t train_dim = 0;
  std::shared_ptr<const Classifier> impl;
  TrainingDiagnostics diagnostics;
};

// Requires n >= 2, both classes present and finite X.
TrainedModel fit(const ModelSpec& spec, const LabeledDataset& data);

Vector predict_score(const TrainedModel& model, const Matrix& x);
Labels predict(const TrainedModel& model, const Matrix& x);

// Versioned container: "QMDL" | u32 version | kind | seed | train_dim |
// hyperparameters | named f64 parameter blobs.
void save_model(const TrainedModel& model, std::ostream& out);
TrainedModel load_model(std::istream& in);

// Rebuilds a classifier from its parameter blobs.
std::shared_ptr<const Classifier> restore_classifier(const ModelSpec& spec, std::size_t train_dim,
                                                     const ParamBlobs& blobs);

}  // namespace chatclf
