#pragma once

#include <stdexcept>
#include <string>

namespace ctxtag {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: ConfigError -> 2, DataError -> 3, NumericError -> 4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatch in a kernel op.
struct DimensionError : NumericError {
  explicit DimensionError(const std::string& msg) : NumericError(msg) {}
};

// backward() on a value that was not produced by the tape.
struct GraphError : NumericError {
  explicit GraphError(const std::string& msg) : NumericError(msg) {}
};

// Bad magic / version / truncation in a model file.
struct FormatError : DataError {
  explicit FormatError(const std::string& msg) : DataError(msg) {}
};

// An external-vector file missing a token it claims to cover.
struct CoverageError : DataError {
  explicit CoverageError(const std::string& msg) : DataError(msg) {}
};

}  // namespace ctxtag
