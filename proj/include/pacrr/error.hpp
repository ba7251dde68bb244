#pragma once

#include <stdexcept>
#include <string>

namespace pacrr {

/// Malformed or inconsistent input data (files, judgments, runs).
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or command-line usage.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace pacrr
