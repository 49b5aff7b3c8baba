#pragma once

#include <stdexcept>
#include <string>

namespace tpd {

// File/format problems: bad magic, checksum mismatch, malformed JSON, ...
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failures at runtime (e.g. training divergence).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tpd
