#include "chatclf/embeddings.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "chatclf/error.hpp"

namespace chatclf {

namespace {

constexpr char kMagic[4] = {'Q', 'E', 'M', 'B'};

template <typename UInt>
void put_le(std::ostream& out, UInt v) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(bytes, sizeof(UInt));
}

void put_string16(std::ostream& out, const std::string& s, const char* what) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ValidationError(std::string(what) + " longer than 65535 bytes");
  }
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  void read(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw ValidationError(std::string("truncated embedding file while reading ") + what);
    }
  }

  template <typename UInt>
  UInt get_le(const char* what) {
    unsigned char bytes[sizeof(UInt)];
    read(reinterpret_cast<char*>(bytes), sizeof(UInt), what);
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
    return v;
  }

  std::string get_string16(const char* what) {
    const auto len = get_le<std::uint16_t>(what);
    std::string s(len, '\0');
    if (len) read(s.data(), len, what);
    return s;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace

void EmbeddingMatrix::validate() const {
  if (vectors.cols() == 0) throw ValidationError("embedding dim must be >= 1");
  if (static_cast<std::size_t>(vectors.rows()) != ids.size()) {
    throw ValidationError("embedding row count does not match id count");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ValidationError("duplicate embedding id '" + id + "'");
  }
  for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
    if (!vectors.row(r).allFinite()) {
      throw ValidationError("non-finite value in embedding '" + ids[static_cast<std::size_t>(r)] + "'");
    }
  }
}

std::size_t LabeledDataset::count(int label) const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
  LabeledDataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    out.y.push_back(y[rows[i]]);
    if (!ids.empty()) out.ids.push_back(ids[rows[i]]);
  }
  return out;
}

void write_embeddings(const EmbeddingMatrix& m, std::ostream& out) {
  m.validate();
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kQembVersion);
  put_le<std::uint64_t>(out, m.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  put_string16(out, m.model_name, "model name");
  for (std::size_t r = 0; r < m.size(); ++r) {
    put_string16(out, m.ids[r], "embedding id");
    for (std::size_t c = 0; c < m.dim(); ++c) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(
                                     m.vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    }
  }
}

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write embeddings to '" + path.string() + "'");
  write_embeddings(m, out);
  out.flush();
  if (!out) throw ValidationError("failed writing embeddings to '" + path.string() + "'");
}

EmbeddingMatrix read_embeddings(std::istream& in) {
  ByteReader r(in);
  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw ValidationError("bad magic: not a QEMB file");
  const auto version = r.get_le<std::uint32_t>("version");
  if (version != kQembVersion) {
    throw ValidationError("unsupported QEMB version " + std::to_string(version));
  }
  const auto count = r.get_le<std::uint64_t>("count");
  const auto dim = r.get_le<std::uint32_t>("dim");
  if (dim == 0) throw ValidationError("embedding dim must be >= 1");
  EmbeddingMatrix m;
  m.model_name = r.get_string16("model name");

  // Grow row by row so a corrupt count cannot force a huge allocation.
  std::vector<float> values;
  std::vector<char> raw(static_cast<std::size_t>(dim) * 4);
  for (std::uint64_t i = 0; i < count; ++i) {
    m.ids.push_back(r.get_string16("id"));
    r.read(raw.data(), raw.size(), "vector payload");
    for (std::uint32_t c = 0; c < dim; ++c) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[c * 4 + b])) << (8 * b);
      }
      values.push_back(std::bit_cast<float>(bits));
    }
  }
  if (!r.at_end()) throw ValidationError("trailing bytes after QEMB payload");
  m.vectors = Eigen::Map<FloatMatrix>(values.data(), static_cast<Eigen::Index>(count),
                                      static_cast<Eigen::Index>(dim));
  m.validate();
  return m;
}

EmbeddingMatrix read_embeddings_jsonl(std::istream& in) {
  EmbeddingMatrix m;
  std::vector<float> values;
  std::size_t dim = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where + "malformed embedding record: " + e.what());
    }
    if (!obj.contains("id") || !obj["id"].is_string() || !obj.contains("vector") ||
        !obj["vector"].is_array()) {
      throw ValidationError(where + "embedding record needs string 'id' and array 'vector'");
    }
    const auto& vec = obj["vector"];
    if (m.ids.empty()) {
      dim = vec.size();
      if (dim == 0) throw ValidationError(where + "embedding dim must be >= 1");
      if (obj.contains("model") && obj["model"].is_string()) m.model_name = obj["model"];
    } else if (vec.size() != dim) {
      throw ValidationError(where + "vector has " + std::to_string(vec.size()) +
                            " values, expected " + std::to_string(dim));
    }
    for (const auto& v : vec) {
      if (!v.is_number()) throw ValidationError(where + "non-numeric vector entry");
      values.push_back(v.get<float>());
    }
    m.ids.push_back(obj["id"].get<std::string>());
  }
  if (m.ids.empty()) throw ValidationError("JSONL embedding file has no records");
  m.vectors = Eigen::Map<FloatMatrix>(values.data(), static_cast<Eigen::Index>(m.ids.size()),
                                      static_cast<Eigen::Index>(dim));
  m.validate();
  return m;
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open embeddings '" + path.string() + "'");
  if (in.peek() == 'Q') return read_embeddings(in);
  return read_embeddings_jsonl(in);
}

JoinResult join(const FusedLabels& fused, const EmbeddingMatrix& m, MissingIdPolicy policy) {
  std::unordered_map<std::string, Eigen::Index> row_of;
  row_of.reserve(m.ids.size());
  for (std::size_t i = 0; i < m.ids.size(); ++i) row_of.emplace(m.ids[i], static_cast<Eigen::Index>(i));

  JoinResult result;
  std::vector<Eigen::Index> rows;
  for (const auto& e : fused.entries) {
    const auto it = row_of.find(e.message_id);
    if (it == row_of.end()) {
      result.missing_ids.push_back(e.message_id);
      continue;
    }
    rows.push_back(it->second);
    result.data.y.push_back(e.label);
    result.data.ids.push_back(e.message_id);
  }
  if (rows.empty()) throw ValidationError("join: fused labels and embeddings share no ids");
  if (policy == MissingIdPolicy::strict && !result.missing_ids.empty()) {
    throw ValidationError("join: " + std::to_string(result.missing_ids.size()) +
                          " fused ids have no embedding (first: '" + result.missing_ids.front() + "')");
  }
  result.data.x.resize(static_cast<Eigen::Index>(rows.size()), m.vectors.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    result.data.x.row(static_cast<Eigen::Index>(i)) = m.vectors.row(rows[i]).cast<double>();
  }
  return result;
}

}  // namespace chatclf
