#include "tikreg/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "tikreg/errors.hpp"

namespace tikreg {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(int line, const std::string& what) {
    throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

template <typename T>
T convert(const KeyValue& kv) {
    T value{};
    const char* first = kv.value.data();
    const char* last = first + kv.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        fail(kv.line, "invalid value '" + kv.value + "' for " + kv.key);
    }
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) fail(kv.line, "non-finite value for " + kv.key);
    }
    return value;
}

}  // namespace

std::vector<KeyValue> parse_key_values(std::string_view text) {
    std::vector<KeyValue> out;
    std::set<std::string, std::less<>> seen;
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) fail(line_no, "empty key or value");
        if (!seen.emplace(key).second) fail(line_no, "duplicate key '" + std::string(key) + "'");
        out.push_back(KeyValue{std::string(key), std::string(value), line_no});
    }
    return out;
}

double value_as_double(const KeyValue& kv) { return convert<double>(kv); }
int value_as_int(const KeyValue& kv) { return convert<int>(kv); }
std::uint64_t value_as_u64(const KeyValue& kv) { return convert<std::uint64_t>(kv); }

void reject_key(const KeyValue& kv) { fail(kv.line, "unknown key '" + kv.key + "'"); }

}  // namespace tikreg
