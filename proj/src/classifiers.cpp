#include "chatclf/classifiers.hpp"

#include <cmath>

#include "chatclf/error.hpp"
#include "chatclf/models.hpp"

namespace chatclf {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LR: return "LR";
    case ModelKind::SVM: return "SVM";
    case ModelKind::GNB: return "GNB";
    case ModelKind::BNB: return "BNB";
    case ModelKind::KNN: return "KNN";
    case ModelKind::GBT: return "GBT";
    case ModelKind::MLP: return "MLP";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  for (ModelKind k : all_model_kinds()) {
    if (to_string(k) == name) return k;
  }
  if (name == "XGB") return ModelKind::GBT;
  throw ValidationError("unknown model kind '" + name + "'");
}

const std::vector<ModelKind>& all_model_kinds() {
  static const std::vector<ModelKind> kinds = {ModelKind::MLP, ModelKind::BNB, ModelKind::KNN,
                                               ModelKind::GBT, ModelKind::GNB, ModelKind::SVM,
                                               ModelKind::LR};
  return kinds;
}

Hyperparams default_hyperparams(ModelKind kind) {
  switch (kind) {
    case ModelKind::LR:
      return {{"C", 1.0}, {"tol", 1e-6}, {"max_iter", 1000}, {"history", 10}};
    case ModelKind::SVM:
      return {{"C", 1.0}, {"max_epochs", 50}, {"tol", 1e-5}};
    case ModelKind::GNB:
      return {{"var_smoothing", 1e-9}};
    case ModelKind::BNB:
      return {{"alpha", 1.0}, {"binarize", 0.0}};
    case ModelKind::KNN:
      return {{"k", 5}};
    case ModelKind::GBT:
      return {{"rounds", 100}, {"max_depth", 6}, {"learning_rate", 0.3}, {"lambda", 1.0},
              {"gamma", 0.0}, {"min_child_weight", 1.0}, {"max_bin", 256}};
    case ModelKind::MLP:
      return {{"hidden", 100}, {"learning_rate", 1e-3}, {"alpha", 1e-4}, {"max_epochs", 200},
              {"batch_size", 32}, {"tol", 1e-4}, {"n_iter_no_change", 10}, {"beta1", 0.9},
              {"beta2", 0.999}, {"epsilon", 1e-8}};
  }
  return {};
}

ModelSpec ModelSpec::make(ModelKind kind, const Hyperparams& overrides, std::uint64_t seed) {
  ModelSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  spec.hyperparams = default_hyperparams(kind);
  for (const auto& [key, value] : overrides) {
    if (!spec.hyperparams.count(key)) {
      throw ValidationError("unknown hyperparameter '" + key + "' for " + to_string(kind));
    }
    spec.hyperparams[key] = value;
  }
  spec.validate();
  return spec;
}

double ModelSpec::get(const std::string& key) const {
  const auto it = hyperparams.find(key);
  if (it == hyperparams.end()) {
    throw ValidationError("hyperparameter '" + key + "' not set for " + to_string(kind));
  }
  return it->second;
}

int ModelSpec::get_int(const std::string& key) const {
  const double v = get(key);
  if (v != std::floor(v)) throw ValidationError("hyperparameter '" + key + "' must be an integer");
  return static_cast<int>(v);
}

namespace {

void require(bool ok, const ModelSpec& spec, const std::string& what) {
  if (!ok) throw ValidationError(to_string(spec.kind) + ": " + what);
}

models::LogisticRegression::Options lr_options(const ModelSpec& s) {
  return {s.get("C"), s.get("tol"), s.get_int("max_iter"), s.get_int("history")};
}

models::LinearSvm::Options svm_options(const ModelSpec& s) {
  return {s.get("C"), s.get_int("max_epochs"), s.get("tol")};
}

models::MultilayerPerceptron::Options mlp_options(const ModelSpec& s) {
  models::MultilayerPerceptron::Options o;
  o.hidden = s.get_int("hidden");
  o.learning_rate = s.get("learning_rate");
  o.alpha = s.get("alpha");
  o.max_epochs = s.get_int("max_epochs");
  o.batch_size = s.get_int("batch_size");
  o.tol = s.get("tol");
  o.n_iter_no_change = s.get_int("n_iter_no_change");
  o.beta1 = s.get("beta1");
  o.beta2 = s.get("beta2");
  o.epsilon = s.get("epsilon");
  return o;
}

GBTConfig gbt_config(const ModelSpec& s) {
  GBTConfig c;
  c.rounds = s.get_int("rounds");
  c.max_depth = s.get_int("max_depth");
  c.learning_rate = s.get("learning_rate");
  c.lambda = s.get("lambda");
  c.gamma = s.get("gamma");
  c.min_child_weight = s.get("min_child_weight");
  c.max_bin = s.get_int("max_bin");
  return c;
}

}  // namespace

void ModelSpec::validate() const {
  const auto& s = *this;
  switch (kind) {
    case ModelKind::LR: {
      const auto o = lr_options(s);
      require(o.C > 0, s, "C must be > 0");
      require(o.tol > 0, s, "tol must be > 0");
      require(o.max_iter >= 1, s, "max_iter must be >= 1");
      require(o.history >= 1, s, "history must be >= 1");
      break;
    }
    case ModelKind::SVM: {
      const auto o = svm_options(s);
      require(o.C > 0, s, "C must be > 0");
      require(o.max_epochs >= 1, s, "max_epochs must be >= 1");
      require(o.tol >= 0, s, "tol must be >= 0");
      break;
    }
    case ModelKind::GNB:
      require(get("var_smoothing") >= 0, s, "var_smoothing must be >= 0");
      break;
    case ModelKind::BNB:
      require(get("alpha") > 0, s, "alpha must be > 0");
      break;
    case ModelKind::KNN:
      require(get_int("k") >= 1, s, "k must be >= 1");
      break;
    case ModelKind::GBT:
      gbt_config(s).validate();
      break;
    case ModelKind::MLP: {
      const auto o = mlp_options(s);
      require(o.hidden >= 1, s, "hidden must be >= 1");
      require(o.learning_rate > 0, s, "learning_rate must be > 0");
      require(o.alpha >= 0, s, "alpha must be >= 0");
      require(o.max_epochs >= 1, s, "max_epochs must be >= 1");
      require(o.batch_size >= 1, s, "batch_size must be >= 1");
      require(o.n_iter_no_change >= 1, s, "n_iter_no_change must be >= 1");
      require(o.beta1 >= 0 && o.beta1 < 1 && o.beta2 >= 0 && o.beta2 < 1, s, "betas must be in [0, 1)");
      require(o.epsilon > 0, s, "epsilon must be > 0");
      break;
    }
  }
}

TrainedModel fit(const ModelSpec& spec, const LabeledDataset& data) {
  spec.validate();
  const Matrix& x = data.x;
  const Labels& y = data.y;
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw ValidationError("fit: X has " + std::to_string(x.rows()) + " rows but y has " +
                          std::to_string(y.size()));
  }
  if (y.size() < 2) throw ValidationError("fit: need at least 2 samples");
  if (x.cols() == 0) throw ValidationError("fit: X has no features");
  if (data.count(0) == 0 || data.count(1) == 0) {
    throw ValidationError("fit: training data has a single class");
  }
  if (data.count(0) + data.count(1) != y.size()) throw ValidationError("fit: labels must be 0 or 1");
  if (!x.allFinite()) throw ValidationError("fit: non-finite feature values");

  TrainedModel model;
  model.spec = spec;
  model.train_dim = static_cast<std::size_t>(x.cols());
  auto& diag = model.diagnostics;
  switch (spec.kind) {
    case ModelKind::LR:
      model.impl = std::make_shared<models::LogisticRegression>(
          models::LogisticRegression::fit(x, y, lr_options(spec), diag));
      break;
    case ModelKind::SVM:
      model.impl = std::make_shared<models::LinearSvm>(
          models::LinearSvm::fit(x, y, svm_options(spec), spec.seed, diag));
      break;
    case ModelKind::GNB:
      model.impl = std::make_shared<models::GaussianNaiveBayes>(
          models::GaussianNaiveBayes::fit(x, y, spec.get("var_smoothing")));
      diag.converged = true;
      diag.iterations = 1;
      break;
    case ModelKind::BNB:
      model.impl = std::make_shared<models::BernoulliNaiveBayes>(
          models::BernoulliNaiveBayes::fit(x, y, spec.get("alpha"), spec.get("binarize")));
      diag.converged = true;
      diag.iterations = 1;
      break;
    case ModelKind::KNN: {
      const int k = spec.get_int("k");
      if (static_cast<std::size_t>(k) > y.size()) {
        throw ValidationError("KNN: k exceeds the number of training samples");
      }
      model.impl = std::make_shared<models::KNearestNeighbors>(x, y, k);
      diag.converged = true;
      break;
    }
    case ModelKind::GBT: {
      auto gbt = GradientBoostedTrees::fit(x, y, gbt_config(spec));
      diag.objective_trace.assign(gbt.training_loss().begin() + 1, gbt.training_loss().end());
      diag.final_loss = gbt.training_loss().back();
      diag.iterations = static_cast<int>(gbt.trees().size());
      diag.converged = true;
      model.impl = std::make_shared<models::BoostedTreesClassifier>(std::move(gbt));
      break;
    }
    case ModelKind::MLP:
      model.impl = std::make_shared<models::MultilayerPerceptron>(
          models::MultilayerPerceptron::fit(x, y, mlp_options(spec), spec.seed, diag));
      break;
  }
  return model;
}

Vector predict_score(const TrainedModel& model, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.train_dim) {
    throw ValidationError("predict: input has " + std::to_string(x.cols()) +
                          " features, model was trained on " + std::to_string(model.train_dim));
  }
  if (x.rows() == 0) return Vector(0);
  return model.impl->score(x);
}

Labels predict(const TrainedModel& model, const Matrix& x) {
  const Vector s = predict_score(model, x);
  const double t = model.impl->threshold();
  Labels out(static_cast<std::size_t>(s.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) out[static_cast<std::size_t>(i)] = s[i] > t ? 1 : 0;
  return out;
}

std::shared_ptr<const Classifier> restore_classifier(const ModelSpec& spec, std::size_t dim,
                                                     const ParamBlobs& blobs) {
  switch (spec.kind) {
    case ModelKind::LR:
      return std::make_shared<models::LogisticRegression>(models::LogisticRegression::from(blobs, dim));
    case ModelKind::SVM:
      return std::make_shared<models::LinearSvm>(models::LinearSvm::from(blobs, dim));
    case ModelKind::GNB:
      return std::make_shared<models::GaussianNaiveBayes>(models::GaussianNaiveBayes::from(blobs, dim));
    case ModelKind::BNB:
      return std::make_shared<models::BernoulliNaiveBayes>(models::BernoulliNaiveBayes::from(blobs, dim));
    case ModelKind::KNN:
      return std::make_shared<models::KNearestNeighbors>(models::KNearestNeighbors::from(blobs, dim));
    case ModelKind::GBT:
      return std::make_shared<models::BoostedTreesClassifier>(models::BoostedTreesClassifier::from(blobs, dim));
    case ModelKind::MLP:
      return std::make_shared<models::MultilayerPerceptron>(models::MultilayerPerceptron::from(blobs, dim));
  }
  throw ValidationError("unknown model kind");
}

}  // namespace chatclf
