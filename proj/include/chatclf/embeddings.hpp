#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chatclf/agreement.hpp"
#include "chatclf/types.hpp"

namespace chatclf {

struct EmbeddingMatrix {
  std::vector<std::string> ids;
  FloatMatrix vectors;  // ids.size() x dim
  std::string model_name;

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }

  // Throws ValidationError on dim 0, row/id count mismatch, duplicate ids or
  // non-finite entries.
  void validate() const;

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.ids == b.ids && a.model_name == b.model_name &&
           a.vectors.rows() == b.vectors.rows() && a.vectors.cols() == b.vectors.cols() &&
           a.vectors == b.vectors;
  }
};

struct LabeledDataset {
  Matrix x;
  Labels y;
  std::vector<std::string> ids;

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }
  std::size_t count(int label) const;

  // Rows in the given order.
  LabeledDataset subset(const std::vector<std::size_t>& rows) const;
};

inline constexpr std::uint32_t kQembVersion = 1;

// QEMB1: "QEMB" | version u32 | count u64 | dim u32 | model_name (u16 len +
// UTF-8) | count x { id (u16 len + UTF-8) | dim x f32 }, all little endian.
void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);
void write_embeddings(const EmbeddingMatrix& m, std::ostream& out);

// Reads QEMB1, or JSONL lines {"id": ..., "vector": [...]} when the file does
// not start with the magic.
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);
// QEMB1 only.
EmbeddingMatrix read_embeddings(std::istream& in);
EmbeddingMatrix read_embeddings_jsonl(std::istream& in);

enum class MissingIdPolicy { skip, strict };

struct JoinResult {
  LabeledDataset data;
  std::vector<std::string> missing_ids;
};

// Rows follow the fused order. Missing ids are skipped (and listed) or, in
// strict mode, rejected. Zero overlap is always an error.
JoinResult join(const FusedLabels& fused, const EmbeddingMatrix& m,
                MissingIdPolicy policy = MissingIdPolicy::skip);

}  // namespace chatclf
