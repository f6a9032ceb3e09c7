#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace chatclf {

struct Message {
  std::string id;
  std::string room_id;
  std::string user_id;
  std::int64_t timestamp_ms = 0;  // UTC
  std::string text;
  bool is_moderator = false;
  // Set for empty texts; such messages are kept but never silently.
  bool degenerate = false;

  friend bool operator==(const Message&, const Message&) = default;
};

struct Corpus {
  std::vector<Message> messages;  // ordered by (room_id, timestamp_ms)
  std::map<std::string, std::string> metadata;
  std::vector<std::string> warnings;

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.messages == b.messages && a.metadata == b.metadata;
  }
};

struct Annotation {
  std::string message_id;
  std::string annotator_id;
  int label = 0;  // 0 or 1

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AnnotationSet {
  std::vector<Annotation> annotations;
  std::vector<std::string> warnings;
};

enum class CorpusFormat { jsonl, csv };

struct CorpusStats {
  std::int64_t room_count = 0;
  std::int64_t message_count_with_moderator = 0;
  std::int64_t message_count_without_moderator = 0;
  std::int64_t user_count = 0;  // distinct non-moderator authors
  // Length statistics over the messages selected by the filter passed to
  // corpus_stats.
  double mean_chars = 0.0;
  double median_chars = 0.0;
  double mean_tokens = 0.0;
  double median_tokens = 0.0;
};

enum class MessageFilter { all, exclude_moderator };

// Sorts by (room_id, timestamp_ms), stable for equal keys, and checks id
// uniqueness. Throws ValidationError naming the first duplicate id.
void normalize(Corpus& corpus);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
Corpus parse_corpus(std::istream& in, CorpusFormat format);
CorpusFormat corpus_format_from_path(const std::filesystem::path& path);

// One JSON object per line, keys in a fixed order. Parsing this output
// yields an equal corpus, and re-serializing that is byte-identical.
void write_corpus_jsonl(const Corpus& corpus, std::ostream& out);
void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);

// Accepts CSV with header message_id,annotator_id,label or JSONL with the
// same keys. When a corpus is given, unknown message ids become warnings.
AnnotationSet load_annotations(const std::filesystem::path& path,
                               const Corpus* corpus = nullptr);
AnnotationSet parse_annotations_csv(std::istream& in);
void write_annotations_csv(const std::vector<Annotation>& annotations, std::ostream& out);

// Count of maximal runs of non-whitespace characters.
std::size_t count_tokens(std::string_view text);
// Length in Unicode code points of valid UTF-8 text.
std::size_t count_chars(std::string_view text);

CorpusStats corpus_stats(const Corpus& corpus, MessageFilter filter = MessageFilter::all);

}  // namespace chatclf
