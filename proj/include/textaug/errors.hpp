#pragma once

#include <stdexcept>
#include <string>

namespace textaug {

// Process exit codes used by the CLI.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitGatewayError = 3;
inline constexpr int kExitDataError = 4;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class GatewayErrorKind {
    transport, // connection refused / reset / 5xx / 429
    timeout,
    config,    // 4xx, bad credentials, malformed request
    protocol,  // unparseable or incomplete response body
};

class GatewayError : public std::runtime_error {
public:
    GatewayError(GatewayErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    GatewayErrorKind kind() const { return kind_; }

    bool retryable() const {
        return kind_ == GatewayErrorKind::transport || kind_ == GatewayErrorKind::timeout;
    }

private:
    GatewayErrorKind kind_;
};

} // namespace textaug
