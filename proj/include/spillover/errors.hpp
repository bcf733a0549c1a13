#pragma once

#include <stdexcept>
#include <string>

namespace spillover {

// Exception families map one-to-one onto CLI exit codes (2, 3, 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace spillover
