#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "blob_util.hpp"
#include "chatclf/models.hpp"

namespace chatclf {

namespace models {

ParamBlobs BoostedTreesClassifier::parameters() const {
  std::size_t total = 0;
  for (const auto& t : model_.trees()) total += t.nodes.size();
  Matrix nodes(static_cast<Eigen::Index>(total), 6);
  Vector sizes(static_cast<Eigen::Index>(model_.trees().size()));
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < model_.trees().size(); ++k) {
    const auto& t = model_.trees()[k];
    sizes[static_cast<Eigen::Index>(k)] = static_cast<double>(t.nodes.size());
    for (const auto& nd : t.nodes) {
      nodes.row(r++) << nd.feature, nd.threshold, nd.left, nd.right, nd.value, nd.gain;
    }
  }
  return {detail::blob("tree_sizes", sizes), detail::blob("nodes", nodes)};
}

BoostedTreesClassifier BoostedTreesClassifier::from(const ParamBlobs& blobs, std::size_t dim) {
  const auto& sb = detail::find_blob(blobs, "tree_sizes");
  const Vector sizes = detail::vector_blob(blobs, "tree_sizes", sb.rows);
  const std::size_t total = static_cast<std::size_t>(sizes.sum());
  const Matrix nodes = detail::matrix_blob(blobs, "nodes", total, 6);
  std::vector<RegressionTree> trees(static_cast<std::size_t>(sizes.size()));
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < trees.size(); ++k) {
    const auto count = static_cast<std::size_t>(sizes[static_cast<Eigen::Index>(k)]);
    for (std::size_t j = 0; j < count; ++j, ++r) {
      TreeNode nd;
      nd.feature = static_cast<std::int32_t>(nodes(r, 0));
      nd.threshold = nodes(r, 1);
      nd.left = static_cast<std::int32_t>(nodes(r, 2));
      nd.right = static_cast<std::int32_t>(nodes(r, 3));
      nd.value = nodes(r, 4);
      nd.gain = nodes(r, 5);
      const auto limit = static_cast<std::int32_t>(count);
      if (nd.feature >= static_cast<std::int32_t>(dim) ||
          (nd.feature >= 0 && (nd.left <= 0 || nd.left >= limit || nd.right <= 0 || nd.right >= limit))) {
        throw ValidationError("corrupt tree node in model file");
      }
      trees[k].nodes.push_back(nd);
    }
  }
  return BoostedTreesClassifier(GradientBoostedTrees(dim, std::move(trees)));
}

}  // namespace models

namespace {

constexpr char kModelMagic[4] = {'Q', 'M', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

template <typename UInt>
void put(std::ostream& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::ostream& out, double v) { put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::ostream& out, const std::string& s) {
  put<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename UInt>
UInt get(std::istream& in) {
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ValidationError("truncated model file");
    v |= static_cast<UInt>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get<std::uint64_t>(in)); }

std::string get_str(std::istream& in) {
  const auto len = get<std::uint16_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (in.gcount() != len) throw ValidationError("truncated model file");
  return s;
}

}  // namespace

void save_model(const TrainedModel& model, std::ostream& out) {
  out.write(kModelMagic, 4);
  put<std::uint32_t>(out, kModelVersion);
  put_str(out, to_string(model.spec.kind));
  put<std::uint64_t>(out, model.spec.seed);
  put<std::uint64_t>(out, model.train_dim);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.spec.hyperparams.size()));
  for (const auto& [key, value] : model.spec.hyperparams) {
    put_str(out, key);
    put_f64(out, value);
  }
  const ParamBlobs blobs = model.impl->parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(blobs.size()));
  for (const auto& b : blobs) {
    put_str(out, b.name);
    put<std::uint64_t>(out, b.rows);
    put<std::uint64_t>(out, b.cols);
    for (double v : b.values) put_f64(out, v);
  }
}

TrainedModel load_model(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw ValidationError("bad magic: not a model file");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kModelVersion) throw ValidationError("unsupported model version " + std::to_string(version));
  TrainedModel model;
  model.spec.kind = model_kind_from_string(get_str(in));
  model.spec.seed = get<std::uint64_t>(in);
  model.train_dim = get<std::uint64_t>(in);
  const auto n_hp = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_hp; ++i) {
    auto key = get_str(in);
    model.spec.hyperparams[key] = get_f64(in);
  }
  model.spec.validate();
  const auto n_blobs = get<std::uint32_t>(in);
  ParamBlobs blobs;
  for (std::uint32_t i = 0; i < n_blobs; ++i) {
    ParamBlob b;
    b.name = get_str(in);
    b.rows = get<std::uint64_t>(in);
    b.cols = get<std::uint64_t>(in);
    if (b.cols != 0 && b.rows > (std::uint64_t{1} << 40) / b.cols) throw ValidationError("corrupt blob shape");
    b.values.resize(b.rows * b.cols);
    for (auto& v : b.values) v = get_f64(in);
    blobs.push_back(std::move(b));
  }
  model.impl = restore_classifier(model.spec, model.train_dim, blobs);
  return model;
}

}  // namespace chatclf
