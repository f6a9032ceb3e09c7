#include "chatclf/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "chatclf/csv.hpp"
#include "chatclf/error.hpp"
#include "chatclf/timeparse.hpp"

namespace chatclf {

using nlohmann::json;

namespace {

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::string json_string_field(const json& obj, const char* key, std::size_t line,
                              bool required = true) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (!required) return {};
    throw ValidationError(at_line(line) + "missing field '" + key + "'");
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  throw ValidationError(at_line(line) + "field '" + key + "' must be a string");
}

std::int64_t parse_timestamp_field(const std::string& text, std::size_t line) {
  const auto ts = parse_timestamp_ms(text);
  if (!ts) throw ValidationError(at_line(line) + "unparseable timestamp '" + text + "'");
  if (*ts < 0) throw ValidationError(at_line(line) + "negative timestamp '" + text + "'");
  return *ts;
}

bool parse_bool_text(const std::string& text, std::size_t line) {
  if (text.empty() || text == "0" || text == "false" || text == "False") return false;
  if (text == "1" || text == "true" || text == "True") return true;
  throw ValidationError(at_line(line) + "bad boolean '" + text + "'");
}

void finish_message(Message& m, std::size_t line, std::vector<std::string>& warnings) {
  if (m.id.empty()) throw ValidationError(at_line(line) + "empty message id");
  if (m.text.empty()) {
    m.degenerate = true;
    warnings.push_back(at_line(line) + "message '" + m.id + "' has empty text");
  }
}

Message message_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw ValidationError(at_line(line) + "record is not a JSON object");
  Message m;
  m.id = json_string_field(obj, "id", line);
  m.room_id = json_string_field(obj, "room_id", line);
  m.user_id = json_string_field(obj, "user_id", line);
  const auto ts = obj.find("timestamp");
  if (ts == obj.end()) throw ValidationError(at_line(line) + "missing field 'timestamp'");
  if (ts->is_number_integer()) {
    m.timestamp_ms = ts->get<std::int64_t>();
    if (m.timestamp_ms < 0) throw ValidationError(at_line(line) + "negative timestamp");
  } else if (ts->is_string()) {
    m.timestamp_ms = parse_timestamp_field(ts->get<std::string>(), line);
  } else {
    throw ValidationError(at_line(line) + "unparseable timestamp");
  }
  const auto text = obj.find("text");
  if (text == obj.end() || !text->is_string()) {
    throw ValidationError(at_line(line) + "missing or non-string field 'text'");
  }
  m.text = text->get<std::string>();
  const auto mod = obj.find("is_moderator");
  if (mod != obj.end() && !mod->is_null()) {
    if (!mod->is_boolean()) throw ValidationError(at_line(line) + "is_moderator must be boolean");
    m.is_moderator = mod->get<bool>();
  }
  return m;
}

Corpus parse_jsonl(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(at_line(lineno) + "malformed record: " + e.what());
    }
    Message m = message_from_json(obj, lineno);
    finish_message(m, lineno, corpus.warnings);
    corpus.messages.push_back(std::move(m));
  }
  return corpus;
}

Corpus parse_csv(std::istream& in) {
  csv::Reader reader(in);
  Corpus corpus;
  const auto header = reader.next();
  if (!header) return corpus;
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = i;
  for (const char* key : {"id", "room_id", "user_id", "timestamp", "text"}) {
    if (!col.count(key)) {
      throw ValidationError(at_line(1) + "header lacks column '" + key + "'");
    }
  }
  const bool has_mod = col.count("is_moderator") > 0;
  while (auto rec = reader.next()) {
    const std::size_t lineno = reader.record_line();
    if (rec->size() != header->size()) {
      throw ValidationError(at_line(lineno) + "malformed record: expected " +
                            std::to_string(header->size()) + " fields, got " +
                            std::to_string(rec->size()));
    }
    Message m;
    m.id = (*rec)[col["id"]];
    m.room_id = (*rec)[col["room_id"]];
    m.user_id = (*rec)[col["user_id"]];
    m.timestamp_ms = parse_timestamp_field((*rec)[col["timestamp"]], lineno);
    m.text = (*rec)[col["text"]];
    if (has_mod) m.is_moderator = parse_bool_text((*rec)[col["is_moderator"]], lineno);
    finish_message(m, lineno, corpus.warnings);
    corpus.messages.push_back(std::move(m));
  }
  return corpus;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
  // Sorted summation keeps the result independent of message order.
  std::vector<double> s(v);
  std::sort(s.begin(), s.end());
  double sum = 0.0;
  for (double x : s) sum += x;
  return sum / static_cast<double>(s.size());
}

}  // namespace

void normalize(Corpus& corpus) {
  std::stable_sort(corpus.messages.begin(), corpus.messages.end(),
                   [](const Message& a, const Message& b) {
                     if (a.room_id != b.room_id) return a.room_id < b.room_id;
                     return a.timestamp_ms < b.timestamp_ms;
                   });
  std::unordered_set<std::string> seen;
  for (const auto& m : corpus.messages) {
    if (!seen.insert(m.id).second) {
      throw ValidationError("duplicate message id '" + m.id + "'");
    }
  }
}

Corpus parse_corpus(std::istream& in, CorpusFormat format) {
  Corpus corpus = format == CorpusFormat::jsonl ? parse_jsonl(in) : parse_csv(in);
  normalize(corpus);
  return corpus;
}

CorpusFormat corpus_format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return CorpusFormat::csv;
  return CorpusFormat::jsonl;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open corpus '" + path.string() + "'");
  Corpus corpus = parse_corpus(in, format);
  corpus.metadata["source"] = path.filename().string();
  return corpus;
}

void write_corpus_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& m : corpus.messages) {
    // ordered_json keeps the key order fixed.
    nlohmann::ordered_json obj;
    obj["id"] = m.id;
    obj["room_id"] = m.room_id;
    obj["user_id"] = m.user_id;
    obj["timestamp"] = m.timestamp_ms;
    obj["text"] = m.text;
    obj["is_moderator"] = m.is_moderator;
    out << obj.dump() << '\n';
  }
}

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  write_corpus_jsonl(corpus, out);
}

namespace {

int parse_label(const std::string& text, std::size_t line) {
  if (text == "0") return 0;
  if (text == "1") return 1;
  throw ValidationError(at_line(line) + "non-binary label '" + text + "'");
}

void check_annotations(AnnotationSet& set) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& a : set.annotations) {
    if (!seen.emplace(a.message_id, a.annotator_id).second) {
      throw ValidationError("duplicate annotation for message '" + a.message_id +
                            "' by annotator '" + a.annotator_id + "'");
    }
  }
  if (set.annotations.empty()) set.warnings.push_back("annotation file is empty");
}

void warn_unknown_messages(AnnotationSet& set, const Corpus* corpus) {
  if (corpus) {
    std::unordered_set<std::string> ids;
    for (const auto& m : corpus->messages) ids.insert(m.id);
    std::set<std::string> unknown;
    for (const auto& a : set.annotations) {
      if (!ids.count(a.message_id)) unknown.insert(a.message_id);
    }
    for (const auto& id : unknown) {
      set.warnings.push_back("annotation refers to unknown message '" + id + "'");
    }
  }
}

AnnotationSet parse_annotations_jsonl(std::istream& in) {
  AnnotationSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(at_line(lineno) + "malformed record: " + e.what());
    }
    Annotation a;
    a.message_id = json_string_field(obj, "message_id", lineno);
    a.annotator_id = json_string_field(obj, "annotator_id", lineno);
    const auto label = obj.find("label");
    if (label == obj.end()) throw ValidationError(at_line(lineno) + "missing field 'label'");
    a.label = parse_label(label->is_string() ? label->get<std::string>() : label->dump(), lineno);
    set.annotations.push_back(std::move(a));
  }
  check_annotations(set);
  return set;
}

}  // namespace

AnnotationSet parse_annotations_csv(std::istream& in) {
  csv::Reader reader(in);
  AnnotationSet set;
  const auto header = reader.next();
  if (!header) {
    check_annotations(set);
    return set;
  }
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = i;
  for (const char* key : {"message_id", "annotator_id", "label"}) {
    if (!col.count(key)) {
      throw ValidationError(at_line(1) + "header lacks column '" + key + "'");
    }
  }
  while (auto rec = reader.next()) {
    const std::size_t lineno = reader.record_line();
    if (rec->size() != header->size()) {
      throw ValidationError(at_line(lineno) + "malformed record");
    }
    Annotation a;
    a.message_id = (*rec)[col["message_id"]];
    a.annotator_id = (*rec)[col["annotator_id"]];
    a.label = parse_label((*rec)[col["label"]], lineno);
    if (a.message_id.empty() || a.annotator_id.empty()) {
      throw ValidationError(at_line(lineno) + "empty message_id or annotator_id");
    }
    set.annotations.push_back(std::move(a));
  }
  check_annotations(set);
  return set;
}

AnnotationSet load_annotations(const std::filesystem::path& path, const Corpus* corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open annotations '" + path.string() + "'");
  AnnotationSet set = path.extension() == ".jsonl" ? parse_annotations_jsonl(in)
                                                   : parse_annotations_csv(in);
  warn_unknown_messages(set, corpus);
  return set;
}

void write_annotations_csv(const std::vector<Annotation>& annotations, std::ostream& out) {
  out << "message_id,annotator_id,label\n";
  for (const auto& a : annotations) {
    out << csv::join({a.message_id, a.annotator_id, std::to_string(a.label)}) << '\n';
  }
}

std::size_t count_tokens(std::string_view text) {
  std::size_t tokens = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_token) ++tokens;
    in_token = !space;
  }
  return tokens;
}

std::size_t count_chars(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

CorpusStats corpus_stats(const Corpus& corpus, MessageFilter filter) {
  if (corpus.messages.empty()) throw ValidationError("corpus_stats: empty corpus");
  CorpusStats s;
  std::set<std::string> rooms, users;
  std::vector<double> chars, tokens;
  for (const auto& m : corpus.messages) {
    rooms.insert(m.room_id);
    if (!m.is_moderator) users.insert(m.user_id);
    ++s.message_count_with_moderator;
    if (!m.is_moderator) ++s.message_count_without_moderator;
    if (filter == MessageFilter::exclude_moderator && m.is_moderator) continue;
    chars.push_back(static_cast<double>(count_chars(m.text)));
    tokens.push_back(static_cast<double>(count_tokens(m.text)));
  }
  if (chars.empty()) throw ValidationError("corpus_stats: no messages pass the filter");
  s.room_count = static_cast<std::int64_t>(rooms.size());
  s.user_count = static_cast<std::int64_t>(users.size());
  s.mean_chars = mean_of(chars);
  s.median_chars = median_of(chars);
  s.mean_tokens = mean_of(tokens);
  s.median_tokens = median_of(tokens);
  return s;
}

}  // namespace chatclf
