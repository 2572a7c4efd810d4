#pragma once

#include <stdexcept>
#include <string>

namespace dcsr {

/// Invalid configuration, arguments or files. The CLI maps it to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (divergence, step limit, non-finite state).
/// The CLI maps it to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dcsr
