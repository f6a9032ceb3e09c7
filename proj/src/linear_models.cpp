#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "blob_util.hpp"
#include "chatclf/models.hpp"
#include "chatclf/rng.hpp"

namespace chatclf::models {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(-m)) without overflow.
double logistic_loss(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

double sign_of(int label) { return label ? 1.0 : -1.0; }

}  // namespace

double LogisticRegression::objective(const Matrix& x, const Labels& y, const Vector& w, double b,
                                     double C, Vector* grad_w, double* grad_b) {
  const Vector z = (x * w).array() + b;
  double loss = 0.0;
  Vector residual(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double s = sign_of(y[static_cast<std::size_t>(i)]);
    loss += logistic_loss(s * z[i]);
    residual[i] = sigmoid(z[i]) - (s > 0 ? 1.0 : 0.0);
  }
  if (grad_w) *grad_w = w + C * (x.transpose() * residual);
  if (grad_b) *grad_b = C * residual.sum();
  return 0.5 * w.squaredNorm() + C * loss;
}

LogisticRegression LogisticRegression::fit(const Matrix& x, const Labels& y, const Options& opt,
                                           TrainingDiagnostics& diag) {
  const Eigen::Index d = x.cols();
  // Parameters packed as [w; b].
  auto eval = [&](const Vector& theta, Vector& grad) {
    Vector gw;
    double gb;
    const double f = objective(x, y, theta.head(d), theta[d], opt.C, &gw, &gb);
    grad.resize(d + 1);
    grad.head(d) = gw;
    grad[d] = gb;
    return f;
  };

  Vector theta = Vector::Zero(d + 1);
  Vector grad;
  double f = eval(theta, grad);
  std::deque<std::pair<Vector, Vector>> history;  // (s, y) pairs, newest last

  diag = {};
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() <= opt.tol) {
      diag.converged = true;
      break;
    }
    // Two-loop recursion.
    Vector q = grad;
    std::vector<double> alpha(history.size());
    for (std::size_t k = history.size(); k-- > 0;) {
      const auto& [s, yk] = history[k];
      alpha[k] = s.dot(q) / yk.dot(s);
      q -= alpha[k] * yk;
    }
    if (!history.empty()) {
      const auto& [s, yk] = history.back();
      q *= s.dot(yk) / yk.squaredNorm();
    } else {
      q /= std::max(1.0, grad.norm());
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      const auto& [s, yk] = history[k];
      const double beta = yk.dot(q) / yk.dot(s);
      q += (alpha[k] - beta) * s;
    }
    Vector dir = -q;
    double slope = grad.dot(dir);
    if (!(slope < 0)) {
      history.clear();
      dir = -grad / std::max(1.0, grad.norm());
      slope = grad.dot(dir);
    }

    // Armijo backtracking keeps the objective monotone.
    double step = 1.0;
    Vector next, next_grad;
    double f_next = f;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      next = theta + step * dir;
      f_next = eval(next, next_grad);
      if (f_next <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      diag.converged = true;  // no further decrease representable
      break;
    }
    Vector s = next - theta;
    Vector yk = next_grad - grad;
    if (s.dot(yk) > 1e-12 * yk.squaredNorm()) {
      history.emplace_back(std::move(s), std::move(yk));
      if (static_cast<int>(history.size()) > opt.history) history.pop_front();
    }
    const double rel = (f - f_next) / std::max({std::abs(f), std::abs(f_next), 1.0});
    theta = std::move(next);
    grad = std::move(next_grad);
    f = f_next;
    diag.objective_trace.push_back(f);
    if (rel <= 2.2e-9) {
      diag.converged = true;
      ++iter;
      break;
    }
  }
  diag.iterations = iter;
  diag.final_loss = f;
  return LogisticRegression(theta.head(d), theta[d]);
}

Vector LogisticRegression::score(const Matrix& x) const {
  Vector z = (x * w_).array() + b_;
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sigmoid(z[i]);
  return z;
}

ParamBlobs LogisticRegression::parameters() const {
  return {detail::blob("w", w_), detail::blob("b", b_)};
}

LogisticRegression LogisticRegression::from(const ParamBlobs& blobs, std::size_t dim) {
  return LogisticRegression(detail::vector_blob(blobs, "w", dim), detail::scalar_blob(blobs, "b"));
}

double LinearSvm::objective(const Matrix& x, const Labels& y, const Vector& w, double b, double lambda) {
  const Vector z = (x * w).array() + b;
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    hinge += std::max(0.0, 1.0 - sign_of(y[static_cast<std::size_t>(i)]) * z[i]);
  }
  return 0.5 * lambda * (w.squaredNorm() + b * b) + hinge / static_cast<double>(z.size());
}

namespace {

struct SgdState {
  Vector w;
  double b = 0.0;
  Vector w_avg;
  double b_avg = 0.0;
  double t = 0.0;
};

// One pass of averaged SGD over `order`. Averaging starts once t exceeds avg_start.
void sgd_epoch(const Matrix& x, const Labels& y, const std::vector<std::size_t>& order, double lambda,
               double eta0, double avg_start, SgdState& st) {
  for (std::size_t i : order) {
    const auto row = x.row(static_cast<Eigen::Index>(i));
    const double s = y[i] ? 1.0 : -1.0;
    const double eta = eta0 / std::pow(1.0 + lambda * eta0 * st.t, 0.75);
    const double margin = s * (row.dot(st.w) + st.b);
    const double shrink = 1.0 - eta * lambda;
    st.w *= shrink;
    st.b *= shrink;
    if (margin < 1.0) {
      st.w += (eta * s) * row.transpose();
      st.b += eta * s;
    }
    st.t += 1.0;
    const double mu = 1.0 / std::max(1.0, st.t - avg_start);
    st.w_avg += mu * (st.w - st.w_avg);
    st.b_avg += mu * (st.b - st.b_avg);
  }
}

}  // namespace

LinearSvm LinearSvm::fit(const Matrix& x, const Labels& y, const Options& opt, std::uint64_t seed,
                         TrainingDiagnostics& diag) {
  const std::size_t n = y.size();
  const Eigen::Index d = x.cols();
  const double lambda = 1.0 / (opt.C * static_cast<double>(n));
  Rng rng(seed);

  // Initial step size: the candidate with the lowest objective after one
  // pass over a subsample of at most 1000 rows.
  std::vector<std::size_t> probe_rows = rng.permutation(n);
  probe_rows.resize(std::min<std::size_t>(n, 1000));
  const Matrix xs = [&] {
    Matrix m(static_cast<Eigen::Index>(probe_rows.size()), d);
    for (std::size_t i = 0; i < probe_rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(probe_rows[i]));
    return m;
  }();
  Labels ys(probe_rows.size());
  for (std::size_t i = 0; i < probe_rows.size(); ++i) ys[i] = y[probe_rows[i]];
  std::vector<std::size_t> sub_order(probe_rows.size());
  std::iota(sub_order.begin(), sub_order.end(), std::size_t{0});

  double eta0 = 1.0;
  double best_trial = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 30; ++k) {
    const double eta = std::ldexp(1.0, -k);
    SgdState st{Vector::Zero(d), 0.0, Vector::Zero(d), 0.0, 0.0};
    sgd_epoch(xs, ys, sub_order, lambda, eta, std::numeric_limits<double>::infinity(), st);
    const double obj = objective(xs, ys, st.w, st.b, lambda);
    if (obj < best_trial) {
      best_trial = obj;
      eta0 = eta;
    }
  }

  SgdState st{Vector::Zero(d), 0.0, Vector::Zero(d), 0.0, 0.0};
  Vector best_w = Vector::Zero(d);
  double best_b = 0.0;
  double best = objective(x, y, best_w, best_b, lambda);
  diag = {};
  int epoch = 0;
  for (; epoch < opt.max_epochs; ++epoch) {
    const auto order = rng.permutation(n);
    sgd_epoch(x, y, order, lambda, eta0, static_cast<double>(n), st);
    // The averaged iterate is only meaningful after the first epoch.
    const Vector& w = epoch == 0 ? st.w : st.w_avg;
    const double b = epoch == 0 ? st.b : st.b_avg;
    const double obj = objective(x, y, w, b, lambda);
    double improvement = 0.0;
    if (obj < best) {
      improvement = (best - obj) / std::max(best, 1e-12);
      best = obj;
      best_w = w;
      best_b = b;
    }
    diag.objective_trace.push_back(best);
    if (epoch > 0 && improvement < opt.tol) {
      diag.converged = true;
      ++epoch;
      break;
    }
  }
  diag.iterations = epoch;
  diag.final_loss = best;
  return LinearSvm(std::move(best_w), best_b);
}

Vector LinearSvm::score(const Matrix& x) const { return (x * w_).array() + b_; }

ParamBlobs LinearSvm::parameters() const { return {detail::blob("w", w_), detail::blob("b", b_)}; }

LinearSvm LinearSvm::from(const ParamBlobs& blobs, std::size_t dim) {
  return LinearSvm(detail::vector_blob(blobs, "w", dim), detail::scalar_blob(blobs, "b"));
}

}  // namespace chatclf::models
