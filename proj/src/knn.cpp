#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "blob_util.hpp"
#include "chatclf/models.hpp"

namespace chatclf::models {

Vector KNearestNeighbors::score(const Matrix& x) const {
  const Eigen::Index n = x_.rows();
  const auto k = static_cast<std::size_t>(k_);
  Vector out(x.rows());
  Eigen::VectorXd dist(n);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (Eigen::Index q = 0; q < x.rows(); ++q) {
    // Direct differences rather than the ||a||^2 + ||b||^2 - 2ab expansion,
    // which loses precision on near ties.
    dist = (x_.rowwise() - x.row(q)).rowwise().squaredNorm();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double da = dist[static_cast<Eigen::Index>(a)];
                        const double db = dist[static_cast<Eigen::Index>(b)];
                        return da < db || (da == db && a < b);
                      });
    std::size_t votes = 0;
    double inv[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < k; ++j) {
      const int label = y_[order[j]];
      votes += static_cast<std::size_t>(label);
      const double dj = std::sqrt(dist[static_cast<Eigen::Index>(order[j])]);
      inv[label] += dj > 0 ? 1.0 / dj : std::numeric_limits<double>::infinity();
    }
    double s = static_cast<double>(votes) / static_cast<double>(k);
    if (2 * votes == k) {
      if (inv[1] > inv[0]) s += 0.25 / static_cast<double>(k);
      else if (inv[1] < inv[0]) s -= 0.25 / static_cast<double>(k);
    }
    out[q] = s;
  }
  return out;
}

ParamBlobs KNearestNeighbors::parameters() const {
  Vector labels(static_cast<Eigen::Index>(y_.size()));
  for (std::size_t i = 0; i < y_.size(); ++i) labels[static_cast<Eigen::Index>(i)] = y_[i];
  return {detail::blob("x", x_), detail::blob("y", labels), detail::blob("k", static_cast<double>(k_))};
}

KNearestNeighbors KNearestNeighbors::from(const ParamBlobs& blobs, std::size_t dim) {
  const auto& yb = detail::find_blob(blobs, "y");
  const std::size_t n = yb.rows;
  const Vector labels = detail::vector_blob(blobs, "y", n);
  Labels y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = labels[static_cast<Eigen::Index>(i)] > 0.5 ? 1 : 0;
  return KNearestNeighbors(detail::matrix_blob(blobs, "x", n, dim), std::move(y),
                           static_cast<int>(detail::scalar_blob(blobs, "k")));
}

}  // namespace chatclf::models
