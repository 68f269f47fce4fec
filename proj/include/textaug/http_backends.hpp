#pragma once

#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "textaug/embed_gateway.hpp"
#include "textaug/errors.hpp"
#include "textaug/llm_gateway.hpp"

namespace textaug {

namespace detail {

inline httplib::Client make_http_client(const GatewayConfig& config) {
    httplib::Client client(config.endpoint_url);
    const auto timeout = std::chrono::milliseconds(config.request_timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    return client;
}

inline httplib::Headers auth_headers(const GatewayConfig& config) {
    httplib::Headers headers;
    if (!config.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config.api_key);
    return headers;
}

inline GatewayError http_result_error(const httplib::Result& result) {
    using E = httplib::Error;
    const E error = result.error();
    if (error == E::ConnectionTimeout || error == E::Read || error == E::Write)
        return {GatewayErrorKind::timeout, "request timed out: " + httplib::to_string(error)};
    return {GatewayErrorKind::transport, "transport failure: " + httplib::to_string(error)};
}

inline GatewayError http_status_error(int status, const std::string& body) {
    const std::string snippet = body.substr(0, 200);
    if (status == 429 || status >= 500)
        return {GatewayErrorKind::transport,
                "service returned HTTP " + std::to_string(status) + ": " + snippet};
    return {GatewayErrorKind::config,
            "request rejected with HTTP " + std::to_string(status) + ": " + snippet};
}

} // namespace detail

/// OpenAI-compatible POST /v1/chat/completions.
class HttpChatBackend final : public ChatBackend {
public:
    std::string complete(const std::vector<ChatMessage>& messages,
                         const GatewayConfig& config) override {
        nlohmann::json body{{"model", config.model_id},
                            {"temperature", config.sampling_temperature},
                            {"max_tokens", config.max_output_tokens}};
        auto& message_list = body["messages"] = nlohmann::json::array();
        for (const auto& message : messages)
            message_list.push_back({{"role", message.role}, {"content", message.content}});

        auto client = detail::make_http_client(config);
        auto result = client.Post("/v1/chat/completions", detail::auth_headers(config),
                                  body.dump(), "application/json");
        if (!result)
            throw detail::http_result_error(result);
        if (result->status != 200)
            throw detail::http_status_error(result->status, result->body);

        nlohmann::json response;
        try {
            response = nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw GatewayError(GatewayErrorKind::protocol,
                               std::string("unparseable completion response: ") + e.what());
        }
        if (!response.contains("choices") || !response["choices"].is_array() ||
            response["choices"].empty())
            throw GatewayError(GatewayErrorKind::protocol, "response has no choices");
        const auto& message = response["choices"][0].value("message", nlohmann::json::object());
        if (!message.contains("content") || !message["content"].is_string())
            throw GatewayError(GatewayErrorKind::protocol, "response has no message content");
        return message["content"].get<std::string>();
    }
};

/// OpenAI-compatible POST /v1/embeddings.
class HttpEmbedBackend final : public EmbedBackend {
public:
    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts,
                                                 const GatewayConfig& config) override {
        nlohmann::json body{{"model", config.model_id}, {"input", texts}};

        auto client = detail::make_http_client(config);
        auto result = client.Post("/v1/embeddings", detail::auth_headers(config), body.dump(),
                                  "application/json");
        if (!result)
            throw detail::http_result_error(result);
        if (result->status != 200)
            throw detail::http_status_error(result->status, result->body);

        nlohmann::json response;
        try {
            response = nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw GatewayError(GatewayErrorKind::protocol,
                               std::string("unparseable embedding response: ") + e.what());
        }
        if (!response.contains("data") || !response["data"].is_array())
            throw GatewayError(GatewayErrorKind::protocol, "response has no data array");

        std::vector<std::vector<double>> vectors(response["data"].size());
        std::size_t fallback_index = 0;
        for (const auto& item : response["data"]) {
            if (!item.contains("embedding") || !item["embedding"].is_array())
                throw GatewayError(GatewayErrorKind::protocol, "data item has no embedding");
            const std::size_t index = item.value("index", fallback_index);
            if (index >= vectors.size())
                throw GatewayError(GatewayErrorKind::protocol, "embedding index out of range");
            vectors[index] = item["embedding"].get<std::vector<double>>();
            ++fallback_index;
        }
        return vectors;
    }
};

} // namespace textaug
