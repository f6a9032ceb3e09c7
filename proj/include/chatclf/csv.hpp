#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chatclf::csv {

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
// newlines. Tracks the physical line where each record starts.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::optional<std::vector<std::string>> next();
  std::size_t record_line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

// Quotes a field only when it needs quoting.
std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

}  // namespace chatclf::csv
