#include "tikreg/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "tikreg/errors.hpp"

namespace tikreg {

namespace {

bool is_space(std::uint8_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

class Tokenizer {
public:
    explicit Tokenizer(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const noexcept { return pos_; }

    // Skips whitespace and '#' comments running to end of line.
    void skip_separators() {
        while (pos_ < bytes_.size()) {
            if (is_space(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
            } else {
                break;
            }
        }
    }

    unsigned long read_unsigned(const char* what) {
        skip_separators();
        const std::size_t start = pos_;
        if (pos_ >= bytes_.size()) throw ParseError(std::string("truncated before ") + what, pos_);
        unsigned long value = 0;
        while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 0xFFFFFFul) throw ParseError(std::string(what) + " is too large", start);
            ++pos_;
        }
        if (pos_ == start) throw ParseError(std::string("expected ") + what, start);
        if (pos_ < bytes_.size() && !is_space(bytes_[pos_]) && bytes_[pos_] != '#') {
            throw ParseError(std::string("malformed ") + what, pos_);
        }
        return value;
    }

    std::uint8_t next_byte() { return bytes_[pos_++]; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

GridFunction read_pgm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
        throw ParseError("not a P2/P5 graymap (bad magic)", 0);
    }
    const bool binary = bytes[1] == '5';
    if (bytes.size() > 2 && !is_space(bytes[2]) && bytes[2] != '#') {
        throw ParseError("malformed magic number", 2);
    }
    Tokenizer tok(bytes.subspan(0));
    // Position the tokenizer after the two magic bytes.
    tok.next_byte();
    tok.next_byte();

    tok.skip_separators();
    const std::size_t width_at = tok.offset();
    const unsigned long width = tok.read_unsigned("width");
    const unsigned long height = tok.read_unsigned("height");
    if (width == 0 || height == 0) throw ParseError("zero image dimension", width_at);
    tok.skip_separators();
    const std::size_t maxval_at = tok.offset();
    const unsigned long maxval = tok.read_unsigned("maxval");
    if (maxval == 0 || (binary && maxval > 255) || maxval > 65535) {
        throw ParseError("unsupported maxval " + std::to_string(maxval), maxval_at);
    }

    const Shape shape{static_cast<int>(width), static_cast<int>(height), 1};
    std::vector<double> values(shape.size());
    const auto scale = static_cast<double>(maxval);

    if (binary) {
        // Exactly one whitespace byte separates the header from the raster.
        if (tok.remaining() == 0) throw ParseError("truncated header", tok.offset());
        tok.next_byte();
        if (tok.remaining() < values.size()) {
            throw ParseError("truncated payload: need " + std::to_string(values.size()) +
                                 " bytes, have " + std::to_string(tok.remaining()),
                             tok.offset());
        }
        for (auto& v : values) {
            const std::size_t at = tok.offset();
            const std::uint8_t b = tok.next_byte();
            if (b > maxval) throw ParseError("sample exceeds maxval", at);
            v = b / scale;
        }
    } else {
        for (auto& v : values) {
            tok.skip_separators();
            const std::size_t at = tok.offset();
            if (tok.remaining() == 0) throw ParseError("truncated payload", at);
            const unsigned long sample = tok.read_unsigned("sample");
            if (sample > maxval) throw ParseError("sample exceeds maxval", at);
            v = sample / scale;
        }
    }
    return GridFunction(shape, std::move(values));
}

std::vector<std::uint8_t> write_pgm(const GridFunction& f) {
    if (f.channels() != 1) {
        throw ConfigurationError("write_pgm: unsupported shape " + to_string(f.shape()) +
                                 " (single channel required)");
    }
    const std::string header =
        "P5\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(header.size() + f.size());
    for (double v : f.values()) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        out.push_back(static_cast<std::uint8_t>(std::lround(clamped * 255.0)));
    }
    return out;
}

GridFunction read_pgm_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return read_pgm(bytes);
}

void write_pgm_file(const GridFunction& f, const std::filesystem::path& path) {
    const auto bytes = write_pgm(f);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParameterError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ParameterError("write failed for " + path.string());
}

}  // namespace tikreg
