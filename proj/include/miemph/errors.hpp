#pragma once

#include <stdexcept>
#include <string>

namespace miemph {

// Error categories map 1:1 onto CLI exit codes (see tools/main.cpp).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration or arguments (exit 2).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or inconsistent data: bad files, label domain violations,
// leakage guards (exit 3).
struct DataError : Error {
  using Error::Error;
};

// Filesystem failures (exit 1).
struct IoError : Error {
  using Error::Error;
};

// Non-finite loss or parameters during training (exit 4).
struct TrainingError : Error {
  using Error::Error;
};

}  // namespace miemph
