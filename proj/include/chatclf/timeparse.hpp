#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace chatclf {

// Accepts integer UTC milliseconds or ISO-8601 date-times such as
// "2021-03-04T10:15:00Z", "2021-03-04 10:15:00.250+01:00". Returns nullopt
// for anything else.
std::optional<std::int64_t> parse_timestamp_ms(std::string_view text);

}  // namespace chatclf
