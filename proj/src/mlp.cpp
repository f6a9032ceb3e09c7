#include <cmath>
#include <limits>

#include "blob_util.hpp"
#include "chatclf/models.hpp"
#include "chatclf/rng.hpp"

namespace chatclf::models {

namespace {

double bce(double z, int label) {
  const double m = label ? z : -z;
  return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

// Flat views over every parameter, in a fixed order, for the optimizer.
template <typename P, typename F>
void for_each_param(P& p, F&& f) {
  f(p.w1.data(), static_cast<std::size_t>(p.w1.size()));
  f(p.b1.data(), static_cast<std::size_t>(p.b1.size()));
  f(p.w2.data(), static_cast<std::size_t>(p.w2.size()));
  f(&p.b2, std::size_t{1});
}

}  // namespace

MultilayerPerceptron::Params MultilayerPerceptron::initialize(std::size_t dim, int hidden,
                                                              std::uint64_t seed) {
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  Params p;
  p.w1.resize(d, hidden);
  p.b1 = Vector::Zero(hidden);
  p.w2.resize(hidden);
  const double bound1 = std::sqrt(6.0 / static_cast<double>(dim));
  const double bound2 = std::sqrt(6.0 / static_cast<double>(hidden));
  for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = bound1 * (2.0 * rng.uniform() - 1.0);
  for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2[i] = bound2 * (2.0 * rng.uniform() - 1.0);
  return p;
}

double MultilayerPerceptron::loss_and_gradient(const Params& p, const Matrix& x, const Labels& y,
                                               double alpha, Params& grad) {
  const double m = static_cast<double>(x.rows());
  Matrix pre = x * p.w1;
  pre.rowwise() += p.b1.transpose();
  const Matrix h = pre.cwiseMax(0.0);
  const Vector z = (h * p.w2).array() + p.b2;

  double loss = 0.0;
  Vector dz(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const int label = y[static_cast<std::size_t>(i)];
    loss += bce(z[i], label);
    dz[i] = (sigmoid(z[i]) - label) / m;
  }
  loss /= m;
  loss += 0.5 * alpha / m * (p.w1.squaredNorm() + p.w2.squaredNorm());

  grad.w2 = h.transpose() * dz + (alpha / m) * p.w2;
  grad.b2 = dz.sum();
  Matrix dpre = dz * p.w2.transpose();
  dpre = dpre.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  grad.w1 = x.transpose() * dpre + (alpha / m) * p.w1;
  grad.b1 = dpre.colwise().sum().transpose();
  return loss;
}

MultilayerPerceptron MultilayerPerceptron::fit(const Matrix& x, const Labels& y, const Options& opt,
                                               std::uint64_t seed, TrainingDiagnostics& diag) {
  const std::size_t n = y.size();
  const std::size_t d = static_cast<std::size_t>(x.cols());
  Params p = initialize(d, opt.hidden, derive_seed(seed, "mlp/init"));
  Rng rng(derive_seed(seed, "mlp/batches"));

  Params m1 = p, m2 = p, grad = p;
  for_each_param(m1, [](double* v, std::size_t k) { std::fill(v, v + k, 0.0); });
  for_each_param(m2, [](double* v, std::size_t k) { std::fill(v, v + k, 0.0); });

  const auto batch = static_cast<std::size_t>(std::min<std::size_t>(n, static_cast<std::size_t>(opt.batch_size)));
  Matrix xb;
  Labels yb;
  double best_loss = std::numeric_limits<double>::infinity();
  int no_improvement = 0;
  long step = 0;
  diag = {};
  int epoch = 0;
  for (; epoch < opt.max_epochs; ++epoch) {
    const auto order = rng.permutation(n);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const auto rows = static_cast<Eigen::Index>(end - start);
      xb.resize(rows, x.cols());
      yb.resize(end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = x.row(static_cast<Eigen::Index>(order[i]));
        yb[i - start] = y[order[i]];
      }
      epoch_loss += loss_and_gradient(p, xb, yb, opt.alpha, grad) * static_cast<double>(end - start);

      ++step;
      const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
      const double lr = opt.learning_rate * std::sqrt(c2) / c1;
      // Walk parameters, gradients and both moments in lockstep.
      double* pv[4];
      double* gv[4];
      double* m1v[4];
      double* m2v[4];
      std::size_t len[4];
      int slot = 0;
      for_each_param(p, [&](double* v, std::size_t k) { pv[slot] = v; len[slot++] = k; });
      slot = 0;
      for_each_param(grad, [&](double* v, std::size_t) { gv[slot++] = v; });
      slot = 0;
      for_each_param(m1, [&](double* v, std::size_t) { m1v[slot++] = v; });
      slot = 0;
      for_each_param(m2, [&](double* v, std::size_t) { m2v[slot++] = v; });
      for (int s = 0; s < 4; ++s) {
        for (std::size_t j = 0; j < len[s]; ++j) {
          const double g = gv[s][j];
          m1v[s][j] = opt.beta1 * m1v[s][j] + (1.0 - opt.beta1) * g;
          m2v[s][j] = opt.beta2 * m2v[s][j] + (1.0 - opt.beta2) * g * g;
          pv[s][j] -= lr * m1v[s][j] / (std::sqrt(m2v[s][j]) + opt.epsilon);
        }
      }
    }
    epoch_loss /= static_cast<double>(n);
    diag.objective_trace.push_back(epoch_loss);
    diag.final_loss = epoch_loss;

    if (epoch_loss > best_loss - opt.tol) {
      ++no_improvement;
    } else {
      no_improvement = 0;
    }
    best_loss = std::min(best_loss, epoch_loss);
    if (no_improvement > opt.n_iter_no_change) {
      diag.converged = true;
      ++epoch;
      break;
    }
  }
  diag.iterations = epoch;
  return MultilayerPerceptron(std::move(p));
}

Vector MultilayerPerceptron::score(const Matrix& x) const {
  Matrix pre = x * p_.w1;
  pre.rowwise() += p_.b1.transpose();
  Vector z = (pre.cwiseMax(0.0) * p_.w2).array() + p_.b2;
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sigmoid(z[i]);
  return z;
}

ParamBlobs MultilayerPerceptron::parameters() const {
  return {detail::blob("w1", p_.w1), detail::blob("b1", p_.b1), detail::blob("w2", p_.w2),
          detail::blob("b2", p_.b2)};
}

MultilayerPerceptron MultilayerPerceptron::from(const ParamBlobs& blobs, std::size_t dim) {
  const auto hidden = detail::find_blob(blobs, "b1").rows;
  Params p;
  p.w1 = detail::matrix_blob(blobs, "w1", dim, hidden);
  p.b1 = detail::vector_blob(blobs, "b1", hidden);
  p.w2 = detail::vector_blob(blobs, "w2", hidden);
  p.b2 = detail::scalar_blob(blobs, "b2");
  return MultilayerPerceptron(std::move(p));
}

}  // namespace chatclf::models
