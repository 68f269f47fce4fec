#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

#include "textaug/errors.hpp"

namespace textaug {

/// Connection settings shared by the chat and embedding gateways.
struct GatewayConfig {
    std::string endpoint_url;  // base URL, e.g. "http://127.0.0.1:8080"
    std::string model_id;
    std::string api_key;       // sent as a bearer token when non-empty
    double sampling_temperature = 0.7;
    int max_output_tokens = 256;
    int transport_retry_limit = 3;
    double requests_per_second_cap = 100.0;
    int request_timeout_ms = 30000;

    void validate() const {
        if (sampling_temperature < 0.0)
            throw ConfigError("sampling_temperature must be >= 0");
        if (max_output_tokens < 1)
            throw ConfigError("max_output_tokens must be >= 1");
        if (transport_retry_limit < 0)
            throw ConfigError("transport_retry_limit must be >= 0");
        if (!(requests_per_second_cap > 0.0))
            throw ConfigError("requests_per_second_cap must be > 0");
        if (request_timeout_ms < 1)
            throw ConfigError("request_timeout_ms must be >= 1");
    }
};

/// Enforces a minimum spacing of 1/rate between grants, so any half-open
/// one-second window sees at most `rate` requests. Shared across worker
/// threads; acquire() blocks until the caller's slot arrives.
class RateLimiter {
public:
    explicit RateLimiter(double per_second) {
        if (!(per_second > 0.0))
            throw ConfigError("rate limit must be > 0 requests per second");
        interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / per_second));
        next_ = std::chrono::steady_clock::now();
    }

    void acquire() {
        std::chrono::steady_clock::time_point slot;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            slot = std::max(next_, std::chrono::steady_clock::now());
            next_ = slot + interval_;
        }
        std::this_thread::sleep_until(slot);
    }

private:
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_;
    std::chrono::steady_clock::duration interval_{};
};

inline std::optional<std::string> env_var(const char* name) {
    const char* value = std::getenv(name);
    if (value == nullptr || *value == '\0')
        return std::nullopt;
    return std::string(value);
}

} // namespace textaug
