#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tikreg {

struct KeyValue {
    std::string key;
    std::string value;
    int line = 0;
};

/// Splits flat "key = value" text. '#' starts a comment; blank lines are
/// skipped. Missing '=', empty keys/values and duplicate keys raise ConfigError.
std::vector<KeyValue> parse_key_values(std::string_view text);

/// Strict conversions that raise ConfigError naming the entry's line.
double value_as_double(const KeyValue& kv);
int value_as_int(const KeyValue& kv);
std::uint64_t value_as_u64(const KeyValue& kv);

[[noreturn]] void reject_key(const KeyValue& kv);

}  // namespace tikreg
