#include "chatclf/feature_select.hpp"

#include <algorithm>
#include <cstring>

#include "chatclf/error.hpp"
#include "chatclf/parallel.hpp"
#include "chatclf/rng.hpp"

namespace chatclf {

std::size_t ProbeRunResult::kept() const {
  return static_cast<std::size_t>(std::count(kept_mask.begin(), kept_mask.end(), true));
}

std::size_t SelectionReport::kept() const {
  return static_cast<std::size_t>(std::count(final_mask.begin(), final_mask.end(), true));
}

namespace {

void check_trainable(const LabeledDataset& data, const char* who) {
  if (data.dim() == 0) throw ValidationError(std::string(who) + ": data has no features");
  if (data.size() != static_cast<std::size_t>(data.x.rows())) {
    throw ValidationError(std::string(who) + ": X and y sizes differ");
  }
  if (data.count(0) == 0 || data.count(1) == 0) {
    throw ValidationError(std::string(who) + ": y must contain both classes");
  }
}

}  // namespace

ProbeRunResult probe_run(const LabeledDataset& data, std::uint64_t seed, const GBTConfig& config) {
  check_trainable(data, "probe_run");
  const Eigen::Index n = data.x.rows();
  const Eigen::Index d = data.x.cols();

  Matrix augmented(n, d + 1);
  augmented.leftCols(d) = data.x;
  Rng rng(seed);
  for (Eigen::Index i = 0; i < n; ++i) augmented(i, d) = rng.normal();

  const auto model = GradientBoostedTrees::fit(augmented, data.y, config);
  auto gains = model.gain_importance();

  ProbeRunResult result;
  result.seed = seed;
  result.probe_importance = gains.back();
  gains.pop_back();
  result.importances = std::move(gains);
  result.kept_mask.resize(static_cast<std::size_t>(d));
  for (std::size_t j = 0; j < result.importances.size(); ++j) {
    result.kept_mask[j] = result.importances[j] > result.probe_importance;
  }
  return result;
}

std::vector<bool> threshold_mask(const std::vector<double>& keep_fraction, double tau) {
  std::vector<bool> mask(keep_fraction.size());
  for (std::size_t j = 0; j < keep_fraction.size(); ++j) mask[j] = keep_fraction[j] >= tau;
  return mask;
}

SelectionReport probe_select_mc(const LabeledDataset& data, int runs, double tau,
                                std::uint64_t seed, const GBTConfig& config) {
  if (runs < 1) throw ValidationError("probe_select_mc: runs must be >= 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("probe_select_mc: tau must be in (0, 1]");
  check_trainable(data, "probe_select_mc");
  config.validate();

  std::vector<std::vector<bool>> masks(static_cast<std::size_t>(runs));
  parallel_for(masks.size(), [&](std::size_t r) {
    masks[r] = probe_run(data, derive_seed(seed, "probe", r), config).kept_mask;
  });

  const std::size_t d = data.dim();
  SelectionReport report;
  report.runs = runs;
  report.tau = tau;
  report.seed = seed;
  std::vector<std::size_t> kept_count(d, 0);
  double reduction_sum = 0.0;
  for (const auto& mask : masks) {
    std::size_t kept = 0;
    for (std::size_t j = 0; j < d; ++j) {
      if (mask[j]) {
        ++kept_count[j];
        ++kept;
      }
    }
    report.kept_per_run.push_back(kept);
    reduction_sum += 1.0 - static_cast<double>(kept) / static_cast<double>(d);
  }
  report.keep_fraction_per_feature.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    report.keep_fraction_per_feature[j] = static_cast<double>(kept_count[j]) / runs;
  }
  report.final_mask = threshold_mask(report.keep_fraction_per_feature, tau);
  report.mean_reduction = reduction_sum / runs;
  return report;
}

Matrix apply_mask(const Matrix& x, const std::vector<bool>& mask) {
  if (mask.size() != static_cast<std::size_t>(x.cols())) {
    throw ValidationError("apply_mask: mask length " + std::to_string(mask.size()) +
                          " does not match dim " + std::to_string(x.cols()));
  }
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j]) cols.push_back(static_cast<Eigen::Index>(j));
  }
  if (cols.empty()) throw ValidationError("apply_mask: mask selects no features");
  Matrix out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = x.col(cols[c]);
  return out;
}

LabeledDataset apply_mask(const LabeledDataset& data, const std::vector<bool>& mask) {
  LabeledDataset out;
  out.x = apply_mask(data.x, mask);
  out.y = data.y;
  out.ids = data.ids;
  return out;
}

namespace {
constexpr char kMaskMagic[4] = {'Q', 'M', 'S', 'K'};

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ValidationError("truncated mask file");
    v |= static_cast<std::uint32_t>(c & 0xFF) << (8 * i);
  }
  return v;
}
}  // namespace

void write_mask(const std::vector<bool>& mask, std::ostream& out) {
  out.write(kMaskMagic, 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(mask.size()));
  std::vector<char> bytes((mask.size() + 7) / 8, 0);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j]) bytes[j / 8] = static_cast<char>(bytes[j / 8] | (1 << (j % 8)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<bool> read_mask(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMaskMagic, 4) != 0) {
    throw ValidationError("bad magic: not a mask file");
  }
  if (get_u32(in) != 1) throw ValidationError("unsupported mask version");
  const std::uint32_t len = get_u32(in);
  std::vector<char> bytes((len + 7) / 8);
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw ValidationError("truncated mask file");
  std::vector<bool> mask(len);
  for (std::size_t j = 0; j < len; ++j) mask[j] = (bytes[j / 8] >> (j % 8)) & 1;
  return mask;
}

}  // namespace chatclf
