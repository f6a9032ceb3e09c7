#include <cmath>
#include <numbers>

#include "blob_util.hpp"
#include "chatclf/models.hpp"

namespace chatclf::models {

namespace {

Vector class_log_prior(const Labels& y) {
  double ones = 0;
  for (int v : y) ones += v;
  const double n = static_cast<double>(y.size());
  Vector lp(2);
  lp[0] = std::log((n - ones) / n);
  lp[1] = std::log(ones / n);
  return lp;
}

// P(class 1) from two joint log-likelihood columns.
Vector posterior_one(const Matrix& jll) {
  Vector p(jll.rows());
  for (Eigen::Index i = 0; i < jll.rows(); ++i) p[i] = sigmoid(jll(i, 1) - jll(i, 0));
  return p;
}

}  // namespace

GaussianNaiveBayes GaussianNaiveBayes::fit(const Matrix& x, const Labels& y, double var_smoothing) {
  const Eigen::Index d = x.cols();
  const double n = static_cast<double>(x.rows());
  const Eigen::RowVectorXd overall_mean = x.colwise().mean();
  const double max_var = ((x.rowwise() - overall_mean).array().square().colwise().sum() / n).maxCoeff();
  const double epsilon = var_smoothing * max_var;

  Matrix means = Matrix::Zero(2, d);
  Matrix vars = Matrix::Zero(2, d);
  Vector counts = Vector::Zero(2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    means.row(c) += x.row(i);
    counts[c] += 1;
  }
  for (int c = 0; c < 2; ++c) means.row(c) /= counts[c];
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    vars.row(c) += (x.row(i) - means.row(c)).array().square().matrix();
  }
  for (int c = 0; c < 2; ++c) vars.row(c) = (vars.row(c).array() / counts[c] + epsilon).matrix();
  return GaussianNaiveBayes(std::move(means), std::move(vars), class_log_prior(y));
}

Matrix GaussianNaiveBayes::joint_log_likelihood(const Matrix& x) const {
  Matrix jll(x.rows(), 2);
  for (int c = 0; c < 2; ++c) {
    const double norm = -0.5 * (2.0 * std::numbers::pi * variances_.row(c).array()).log().sum();
    const Eigen::ArrayXd inv_var = variances_.row(c).array().inverse().transpose();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::ArrayXd diff = (x.row(i) - means_.row(c)).array().transpose();
      jll(i, c) = log_prior_[c] + norm - 0.5 * (diff.square() * inv_var).sum();
    }
  }
  return jll;
}

Vector GaussianNaiveBayes::score(const Matrix& x) const { return posterior_one(joint_log_likelihood(x)); }

ParamBlobs GaussianNaiveBayes::parameters() const {
  return {detail::blob("means", means_), detail::blob("variances", variances_),
          detail::blob("log_prior", log_prior_)};
}

GaussianNaiveBayes GaussianNaiveBayes::from(const ParamBlobs& blobs, std::size_t dim) {
  return GaussianNaiveBayes(detail::matrix_blob(blobs, "means", 2, dim),
                            detail::matrix_blob(blobs, "variances", 2, dim),
                            detail::vector_blob(blobs, "log_prior", 2));
}

BernoulliNaiveBayes BernoulliNaiveBayes::fit(const Matrix& x, const Labels& y, double alpha,
                                             double binarize) {
  const Eigen::Index d = x.cols();
  Matrix ones = Matrix::Zero(2, d);
  Vector counts = Vector::Zero(2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    ones.row(c) += (x.row(i).array() > binarize).cast<double>().matrix();
    counts[c] += 1;
  }
  Matrix log_p(2, d), log_not_p(2, d);
  for (int c = 0; c < 2; ++c) {
    const Eigen::ArrayXd p = (ones.row(c).array() + alpha) / (counts[c] + 2.0 * alpha);
    log_p.row(c) = p.log().matrix().transpose();
    log_not_p.row(c) = (1.0 - p).log().matrix().transpose();
  }
  return BernoulliNaiveBayes(std::move(log_p), std::move(log_not_p), class_log_prior(y), binarize);
}

Matrix BernoulliNaiveBayes::joint_log_likelihood(const Matrix& x) const {
  const Matrix bits = (x.array() > binarize_).cast<double>().matrix();
  // jll = bits * log p + (1 - bits) * log(1 - p) + prior
  Matrix jll = bits * (log_p_ - log_not_p_).transpose();
  for (int c = 0; c < 2; ++c) jll.col(c).array() += log_not_p_.row(c).sum() + log_prior_[c];
  return jll;
}

Vector BernoulliNaiveBayes::score(const Matrix& x) const { return posterior_one(joint_log_likelihood(x)); }

ParamBlobs BernoulliNaiveBayes::parameters() const {
  return {detail::blob("log_p", log_p_), detail::blob("log_not_p", log_not_p_),
          detail::blob("log_prior", log_prior_), detail::blob("binarize", binarize_)};
}

BernoulliNaiveBayes BernoulliNaiveBayes::from(const ParamBlobs& blobs, std::size_t dim) {
  return BernoulliNaiveBayes(detail::matrix_blob(blobs, "log_p", 2, dim),
                             detail::matrix_blob(blobs, "log_not_p", 2, dim),
                             detail::vector_blob(blobs, "log_prior", 2),
                             detail::scalar_blob(blobs, "binarize"));
}

}  // namespace chatclf::models
