#pragma once

#include <stdexcept>
#include <string>

namespace eager {

// Error taxonomy mirrored by CLI exit codes: config 2, data 3, numeric 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse (e.g. stepping a finished episode). Programming error, not a
// recoverable runtime condition.
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

}  // namespace eager
