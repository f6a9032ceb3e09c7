#pragma once

// Concrete model families behind the Classifier interface. Exposed so tests
// can check learned state against independent computations.

#include <cstdint>

#include "chatclf/classifiers.hpp"
#include "chatclf/gbt.hpp"

namespace chatclf::models {

double sigmoid(double z);

// L2-regularized logistic regression, objective
//   0.5 ||w||^2 + C * sum_i log(1 + exp(-s_i (w.x_i + b))),  s_i = +-1,
// minimized with L-BFGS and a backtracking line search.
class LogisticRegression final : public Classifier {
 public:
  struct Options {
    double C = 1.0;
    double tol = 1e-6;  // on the infinity norm of the gradient
    int max_iter = 1000;
    int history = 10;
  };

  LogisticRegression(Vector w, double b) : w_(std::move(w)), b_(b) {}

  static LogisticRegression fit(const Matrix& x, const Labels& y, const Options& opt,
                                TrainingDiagnostics& diag);
  static double objective(const Matrix& x, const Labels& y, const Vector& w, double b, double C,
                          Vector* grad_w = nullptr, double* grad_b = nullptr);

  Vector score(const Matrix& x) const override;
  ParamBlobs parameters() const override;
  static LogisticRegression from(const ParamBlobs& blobs, std::size_t dim);

  const Vector& weights() const { return w_; }
  double bias() const { return b_; }

 private:
  Vector w_;
  double b_;
};

// Linear SVM, primal objective
//   lambda/2 ||w||^2 + 1/n sum_i max(0, 1 - s_i (w.x_i + b)),  lambda = 1/(C n),
// with the bias treated as a weight on a constant feature. Solved by
// averaged stochastic subgradient descent over seeded epoch permutations.
class LinearSvm final : public Classifier {
 public:
  struct Options {
    double C = 1.0;
    int max_epochs = 50;
    double tol = 1e-5;  // relative objective change between epochs
  };

  LinearSvm(Vector w, double b) : w_(std::move(w)), b_(b) {}

  static LinearSvm fit(const Matrix& x, const Labels& y, const Options& opt, std::uint64_t seed,
                       TrainingDiagnostics& diag);
  static double objective(const Matrix& x, const Labels& y, const Vector& w, double b, double lambda);

  Vector score(const Matrix& x) const override;
  double threshold() const override { return 0.0; }
  ParamBlobs parameters() const override;
  static LinearSvm from(const ParamBlobs& blobs, std::size_t dim);

  const Vector& weights() const { return w_; }
  double bias() const { return b_; }

 private:
  Vector w_;
  double b_;
};

class GaussianNaiveBayes final : public Classifier {
 public:
  // Row c holds class c statistics.
  GaussianNaiveBayes(Matrix means, Matrix variances, Vector log_prior)
      : means_(std::move(means)), variances_(std::move(variances)), log_prior_(std::move(log_prior)) {}

  // Variances get var_smoothing * (largest feature variance over all of X).
  static GaussianNaiveBayes fit(const Matrix& x, const Labels& y, double var_smoothing);

  // Per-row joint log-likelihood log P(c) + log P(x | c), columns c = 0, 1.
  Matrix joint_log_likelihood(const Matrix& x) const;
  Vector score(const Matrix& x) const override;
  ParamBlobs parameters() const override;
  static GaussianNaiveBayes from(const ParamBlobs& blobs, std::size_t dim);

  const Matrix& means() const { return means_; }
  const Matrix& variances() const { return variances_; }

 private:
  Matrix means_;
  Matrix variances_;
  Vector log_prior_;
};

class BernoulliNaiveBayes final : public Classifier {
 public:
  BernoulliNaiveBayes(Matrix log_p, Matrix log_not_p, Vector log_prior, double binarize)
      : log_p_(std::move(log_p)), log_not_p_(std::move(log_not_p)),
        log_prior_(std::move(log_prior)), binarize_(binarize) {}

  // x > binarize counts as 1; feature probabilities use Laplace smoothing
  // (count + alpha) / (n_c + 2 alpha).
  static BernoulliNaiveBayes fit(const Matrix& x, const Labels& y, double alpha, double binarize);

  Matrix joint_log_likelihood(const Matrix& x) const;
  Vector score(const Matrix& x) const override;
  ParamBlobs parameters() const override;
  static BernoulliNaiveBayes from(const ParamBlobs& blobs, std::size_t dim);

 private:
  Matrix log_p_;
  Matrix log_not_p_;
  Vector log_prior_;
  double binarize_;
};

// Exact Euclidean k-nearest neighbours. Neighbours are ordered by
// (distance, training index). The score is the fraction of class-1 votes;
// on an even split it moves +-0.25/k toward the class whose neighbours have
// the larger summed inverse distance, staying at 0.5 (class 0) when equal.
class KNearestNeighbors final : public Classifier {
 public:
  KNearestNeighbors(Matrix x, Labels y, int k) : x_(std::move(x)), y_(std::move(y)), k_(k) {}

  Vector score(const Matrix& x) const override;
  ParamBlobs parameters() const override;
  static KNearestNeighbors from(const ParamBlobs& blobs, std::size_t dim);

 private:
  Matrix x_;
  Labels y_;
  int k_;
};

class BoostedTreesClassifier final : public Classifier {
 public:
  explicit BoostedTreesClassifier(GradientBoostedTrees model) : model_(std::move(model)) {}

  Vector score(const Matrix& x) const override { return model_.predict_proba(x); }
  ParamBlobs parameters() const override;
  static BoostedTreesClassifier from(const ParamBlobs& blobs, std::size_t dim);

  const GradientBoostedTrees& model() const { return model_; }

 private:
  GradientBoostedTrees model_;
};

// One hidden ReLU layer, sigmoid output, cross-entropy loss with L2 penalty
// alpha / (2 m) * (||W1||^2 + ||W2||^2) for a batch of m rows, trained with
// Adam on shuffled mini-batches.
class MultilayerPerceptron final : public Classifier {
 public:
  struct Options {
    int hidden = 100;
    double learning_rate = 1e-3;
    double alpha = 1e-4;
    int max_epochs = 200;
    int batch_size = 32;
    double tol = 1e-4;
    int n_iter_no_change = 10;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  struct Params {
    Matrix w1;  // dim x hidden
    Vector b1;  // hidden
    Vector w2;  // hidden
    double b2 = 0.0;
  };

  explicit MultilayerPerceptron(Params p) : p_(std::move(p)) {}

  static MultilayerPerceptron fit(const Matrix& x, const Labels& y, const Options& opt,
                                  std::uint64_t seed, TrainingDiagnostics& diag);

  // Batch loss and its gradient with respect to every parameter.
  static double loss_and_gradient(const Params& p, const Matrix& x, const Labels& y, double alpha,
                                  Params& grad);
  static Params initialize(std::size_t dim, int hidden, std::uint64_t seed);

  Vector score(const Matrix& x) const override;
  ParamBlobs parameters() const override;
  static MultilayerPerceptron from(const ParamBlobs& blobs, std::size_t dim);

  const Params& params() const { return p_; }

 private:
  Params p_;
};

}  // namespace chatclf::models
