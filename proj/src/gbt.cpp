#include "chatclf/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chatclf/error.hpp"

namespace chatclf {

void GBTConfig::validate() const {
  if (rounds < 1) throw ValidationError("gbt: rounds must be >= 1");
  if (max_depth < 1) throw ValidationError("gbt: max_depth must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("gbt: learning_rate must be > 0");
  if (lambda < 0.0) throw ValidationError("gbt: lambda must be >= 0");
  if (gamma < 0.0) throw ValidationError("gbt: gamma must be >= 0");
  if (min_child_weight < 0.0) throw ValidationError("gbt: min_child_weight must be >= 0");
  if (max_bin < 2 || max_bin > 256) throw ValidationError("gbt: max_bin must be in [2, 256]");
}

double RegressionTree::predict(const double* row) const {
  std::int32_t i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = row[n.feature] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

namespace {

// Same tolerance XGBoost uses before accepting a split.
constexpr double kMinSplitGain = 1e-6;

struct GradPair {
  double g = 0.0;
  double h = 0.0;
};

// Quantile cut points per feature; bin(x) = number of cuts <= x, so
// bin(x) <= b exactly when x < cuts[b].
struct BinnedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<double>> cuts;
  std::vector<std::size_t> offset;  // start of each feature's bins in a histogram
  std::size_t total_bins = 0;
  std::vector<std::uint8_t> bins;   // column major: bins[f * rows + i]

  std::size_t bin_count(std::size_t f) const { return cuts[f].size() + 1; }
};

BinnedMatrix bin_matrix(const Matrix& x, int max_bin) {
  BinnedMatrix b;
  b.rows = static_cast<std::size_t>(x.rows());
  b.cols = static_cast<std::size_t>(x.cols());
  b.cuts.resize(b.cols);
  b.offset.resize(b.cols);
  b.bins.resize(b.rows * b.cols);
  std::vector<double> col(b.rows);
  for (std::size_t f = 0; f < b.cols; ++f) {
    for (std::size_t i = 0; i < b.rows; ++i) col[i] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
    std::sort(col.begin(), col.end());
    auto& cuts = b.cuts[f];
    const std::size_t n = col.size();
    // Candidate boundaries between sorted positions idx-1 and idx.
    const std::size_t max_bins = static_cast<std::size_t>(max_bin);
    std::vector<std::size_t> positions;
    std::size_t distinct = n == 0 ? 0 : 1;
    for (std::size_t i = 1; i < n; ++i) distinct += col[i] != col[i - 1];
    if (distinct <= max_bins) {
      for (std::size_t i = 1; i < n; ++i) {
        if (col[i] != col[i - 1]) positions.push_back(i);
      }
    } else {
      for (std::size_t k = 1; k < max_bins; ++k) positions.push_back(k * n / max_bins);
    }
    for (std::size_t idx : positions) {
      if (idx == 0 || idx >= n || col[idx] == col[idx - 1]) continue;
      const double cut = col[idx - 1] + 0.5 * (col[idx] - col[idx - 1]);
      if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
    }
    b.offset[f] = b.total_bins;
    b.total_bins += cuts.size() + 1;
    std::uint8_t* out = b.bins.data() + f * b.rows;
    for (std::size_t i = 0; i < b.rows; ++i) {
      const double v = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
      out[i] = static_cast<std::uint8_t>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
    }
  }
  return b;
}

struct Split {
  double gain = 0.0;
  std::int32_t feature = -1;
  std::size_t bin = 0;  // rows with bin <= this go left
  GradPair left;
};

class TreeBuilder {
 public:
  TreeBuilder(const BinnedMatrix& data, const std::vector<GradPair>& grad, const GBTConfig& config,
              std::vector<double>& margin)
      : data_(data), grad_(grad), config_(config), margin_(margin) {}

  RegressionTree build(std::vector<std::uint32_t>& rows) {
    tree_.nodes.clear();
    std::vector<GradPair> hist(data_.total_bins);
    build_histogram(rows.data(), rows.size(), hist);
    GradPair total;
    for (std::uint32_t r : rows) {
      total.g += grad_[r].g;
      total.h += grad_[r].h;
    }
    tree_.nodes.emplace_back();
    grow(0, rows.data(), rows.size(), total, 0, std::move(hist));
    return std::move(tree_);
  }

 private:
  double score(const GradPair& p) const { return p.g * p.g / (p.h + config_.lambda); }

  void build_histogram(const std::uint32_t* rows, std::size_t n, std::vector<GradPair>& hist) const {
    std::fill(hist.begin(), hist.end(), GradPair{});
    for (std::size_t f = 0; f < data_.cols; ++f) {
      const std::uint8_t* col = data_.bins.data() + f * data_.rows;
      GradPair* hf = hist.data() + data_.offset[f];
      for (std::size_t k = 0; k < n; ++k) {
        const std::uint32_t r = rows[k];
        GradPair& slot = hf[col[r]];
        slot.g += grad_[r].g;
        slot.h += grad_[r].h;
      }
    }
  }

  Split best_split(const std::vector<GradPair>& hist, const GradPair& total) const {
    Split best;
    const double parent = score(total);
    const double mcw = config_.min_child_weight;
    for (std::size_t f = 0; f < data_.cols; ++f) {
      const GradPair* hf = hist.data() + data_.offset[f];
      const std::size_t nb = data_.bin_count(f);
      GradPair left;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        left.g += hf[b].g;
        left.h += hf[b].h;
        if (left.h < mcw) continue;
        const GradPair right{total.g - left.g, total.h - left.h};
        if (right.h < mcw) break;
        const double gain = score(left) + score(right) - parent - config_.gamma;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = static_cast<std::int32_t>(f);
          best.bin = b;
          best.left = left;
        }
      }
    }
    return best;
  }

  // Also applies the leaf output to the training margins of its rows.
  void make_leaf(std::size_t node, const std::uint32_t* rows, std::size_t n, const GradPair& total) {
    const double value = -config_.learning_rate * total.g / (total.h + config_.lambda);
    tree_.nodes[node].value = value;
    for (std::size_t k = 0; k < n; ++k) margin_[rows[k]] += value;
  }

  void grow(std::size_t node, std::uint32_t* rows, std::size_t n, const GradPair& total, int depth,
            std::vector<GradPair> hist) {
    if (depth >= config_.max_depth || total.h < 2.0 * config_.min_child_weight || n < 2) {
      make_leaf(node, rows, n, total);
      return;
    }
    const Split split = best_split(hist, total);
    if (split.feature < 0 || !(split.gain > kMinSplitGain)) {
      make_leaf(node, rows, n, total);
      return;
    }

    const auto f = static_cast<std::size_t>(split.feature);
    const std::uint8_t* col = data_.bins.data() + f * data_.rows;
    std::uint32_t* mid = std::stable_partition(
        rows, rows + n, [&](std::uint32_t r) { return col[r] <= split.bin; });
    const std::size_t n_left = static_cast<std::size_t>(mid - rows);
    const GradPair left = split.left;
    const GradPair right{total.g - left.g, total.h - left.h};

    const auto left_id = tree_.nodes.size();
    tree_.nodes.emplace_back();
    tree_.nodes.emplace_back();
    {
      auto& nd = tree_.nodes[node];
      nd.feature = split.feature;
      nd.threshold = data_.cuts[f][split.bin];
      nd.left = static_cast<std::int32_t>(left_id);
      nd.right = static_cast<std::int32_t>(left_id + 1);
      nd.gain = split.gain;
    }

    std::vector<GradPair> left_hist, right_hist;
    if (depth + 1 < config_.max_depth) {
      // Build the smaller child directly, derive the sibling by subtraction.
      std::vector<GradPair> small(data_.total_bins);
      const bool left_small = n_left <= n - n_left;
      if (left_small) {
        build_histogram(rows, n_left, small);
      } else {
        build_histogram(mid, n - n_left, small);
      }
      for (std::size_t i = 0; i < hist.size(); ++i) {
        hist[i].g -= small[i].g;
        hist[i].h -= small[i].h;
      }
      if (left_small) {
        left_hist = std::move(small);
        right_hist = std::move(hist);
      } else {
        right_hist = std::move(small);
        left_hist = std::move(hist);
      }
    } else {
      hist.clear();
      hist.shrink_to_fit();
    }
    grow(left_id, rows, n_left, left, depth + 1, std::move(left_hist));
    grow(left_id + 1, mid, n - n_left, right, depth + 1, std::move(right_hist));
  }

  const BinnedMatrix& data_;
  const std::vector<GradPair>& grad_;
  const GBTConfig& config_;
  std::vector<double>& margin_;
  RegressionTree tree_;
};

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_loss(const std::vector<double>& margin, const Labels& y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    // log(1 + exp(-s z)) with s = +-1, computed stably.
    const double z = y[i] ? margin[i] : -margin[i];
    sum += z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
  }
  return sum / static_cast<double>(y.size());
}

}  // namespace

GradientBoostedTrees GradientBoostedTrees::fit(const Matrix& x, const Labels& y,
                                               const GBTConfig& config) {
  config.validate();
  const std::size_t n = static_cast<std::size_t>(x.rows());
  if (n == 0 || y.size() != n) throw ValidationError("gbt: X and y sizes differ or are empty");
  if (x.cols() == 0) throw ValidationError("gbt: X has no columns");

  const BinnedMatrix data = bin_matrix(x, config.max_bin);
  std::vector<double> margin(n, 0.0);
  std::vector<GradPair> grad(n);
  std::vector<std::uint32_t> rows(n);

  GradientBoostedTrees model;
  model.dim_ = data.cols;
  model.training_loss_.push_back(log_loss(margin, y));

  TreeBuilder builder(data, grad, config, margin);
  for (int round = 0; round < config.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i].g = p - static_cast<double>(y[i]);
      grad[i].h = std::max(p * (1.0 - p), 1e-16);
    }
    std::iota(rows.begin(), rows.end(), 0u);
    RegressionTree tree = builder.build(rows);

    model.trees_.push_back(std::move(tree));
    model.training_loss_.push_back(log_loss(margin, y));
  }
  return model;
}

Vector GradientBoostedTrees::margin(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != dim_) {
    throw ValidationError("gbt: input has " + std::to_string(x.cols()) + " columns, model expects " +
                          std::to_string(dim_));
  }
  Vector out = Vector::Zero(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double* row = x.data() + i * x.cols();
    double s = 0.0;
    for (const auto& t : trees_) s += t.predict(row);
    out[i] = s;
  }
  return out;
}

Vector GradientBoostedTrees::predict_proba(const Matrix& x) const {
  Vector m = margin(x);
  for (Eigen::Index i = 0; i < m.size(); ++i) m[i] = sigmoid(m[i]);
  return m;
}

std::vector<double> GradientBoostedTrees::gain_importance() const {
  std::vector<double> imp(dim_, 0.0);
  for (const auto& t : trees_) {
    for (const auto& nd : t.nodes) {
      if (nd.feature >= 0) imp[static_cast<std::size_t>(nd.feature)] += nd.gain;
    }
  }
  return imp;
}

std::vector<std::size_t> GradientBoostedTrees::split_counts() const {
  std::vector<std::size_t> counts(dim_, 0);
  for (const auto& t : trees_) {
    for (const auto& nd : t.nodes) {
      if (nd.feature >= 0) ++counts[static_cast<std::size_t>(nd.feature)];
    }
  }
  return counts;
}

}  // namespace chatclf
