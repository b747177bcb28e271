#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fcox {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments: shape mismatches, out-of-range options, unknown names.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Numerical failures: no events, divergence, degenerate metric inputs.
class NumericError : public Error {
public:
    using Error::Error;
};

// Input files that cannot be parsed or do not match their schema.
class DataError : public Error {
public:
    using Error::Error;
};

// Configuration (schema/run config) problems; maps to the usage exit code.
class ConfigError : public Error {
public:
    using Error::Error;
};

using WarningHandler = std::function<void(std::string_view)>;

// Installs a process-wide warning sink and returns the previous one.
// The default sink writes "warning: <msg>" to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(std::string_view message);

// RAII helper that collects warnings for the lifetime of the object.
class WarningCapture {
public:
    WarningCapture();
    ~WarningCapture();
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(std::string_view needle) const;

private:
    std::vector<std::string> messages_;
    WarningHandler previous_;
};

}  // namespace fcox
