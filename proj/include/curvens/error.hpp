#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace curvens {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Remote endpoint could not be reached or timed out.
class TransportError : public Error {
public:
    TransportError(std::string endpoint, std::string model, const std::string & what)
        : Error("transport error [" + endpoint + " model=" + model + "]: " + what),
          endpoint_(std::move(endpoint)),
          model_(std::move(model)) {}

    const std::string & endpoint() const noexcept { return endpoint_; }
    const std::string & model() const noexcept { return model_; }

private:
    std::string endpoint_;
    std::string model_;
};

/// Remote endpoint answered, but with something that violates the wire contract.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration or input files (maps to CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

void warn(std::string_view message);

// Silences warn() for the lifetime of the guard (used by tests).
class QuietWarnings {
public:
    QuietWarnings();
    ~QuietWarnings();
    QuietWarnings(const QuietWarnings &) = delete;
    QuietWarnings & operator=(const QuietWarnings &) = delete;

private:
    bool previous_;
};

}  // namespace curvens
