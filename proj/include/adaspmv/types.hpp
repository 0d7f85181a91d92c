#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace adaspmv {

using index_t = std::int64_t;

// Value type of matrix/vector entries. Features and model thresholds are
// always double regardless of this setting.
#ifdef ADASPMV_REAL32
using real_t = float;
#else
using real_t = double;
#endif

// Thrown by the text parsers (Matrix Market, model files, sample CSVs).
// line() is 1-based; 0 means "no specific line" (e.g. unexpected EOF).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, long line)
        : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

// Thrown by binary readers and schema/version checks.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace adaspmv
