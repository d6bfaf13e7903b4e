#pragma once

#include <stdexcept>
#include <string>

namespace pevdn {

// A real value fell outside the fixed-point codec's decodable range.
struct EncodeRangeError : std::runtime_error {
  explicit EncodeRangeError(const std::string& what) : std::runtime_error(what) {}
};

// Protocol contract violation: incomplete round, length mismatch,
// malformed wire bytes, or a message that should never have arrived.
struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical routine failed to converge to its configured tolerance.
struct NumericalFailure : std::runtime_error {
  explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

// Invalid run configuration; the message names the offending key.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pevdn
