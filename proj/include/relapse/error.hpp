#pragma once

#include <stdexcept>
#include <string>

namespace relapse {

// Base error for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration: unknown keys, out-of-range values, missing files named
// in a config. CLI maps this to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or inconsistent input data (CSV parse failures, schema
// mismatches, impossible preconditions). CLI maps this to exit code 3.
struct DataError : Error {
    using Error::Error;
};

}  // namespace relapse
