#pragma once

#include <atomic>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "textaug/testkit.hpp"

namespace textaug::testkit {

/// Serves the mock rewriter and embedder over the two OpenAI-compatible
/// endpoints on a loopback port, so the HTTP gateways can be exercised over
/// a real socket. Injected transport faults surface as HTTP 503.
class MockOpenAiServer {
public:
    explicit MockOpenAiServer(MockProfile chat_profile = {}, bool require_auth = false,
                              std::string expected_key = "test-key")
        : chat_(std::make_shared<MockChatBackend>(chat_profile)),
          embed_(std::make_shared<MockEmbedBackend>()), require_auth_(require_auth),
          expected_key_(std::move(expected_key)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& request,
                                                    httplib::Response& response) {
            handle_chat(request, response);
        });
        server_.Post("/v1/embeddings", [this](const httplib::Request& request,
                                              httplib::Response& response) {
            handle_embeddings(request, response);
        });
    }

    ~MockOpenAiServer() { stop(); }

    void start() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        if (port_ <= 0)
            throw std::runtime_error("mock server failed to bind a loopback port");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    int port() const { return port_; }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    MockChatBackend& chat_backend() { return *chat_; }
    MockEmbedBackend& embed_backend() { return *embed_; }

    /// HTTP requests received, including ones rejected before the backend.
    std::size_t requests() const { return requests_.load(); }

private:
    bool authorized(const httplib::Request& request) const {
        if (!require_auth_)
            return true;
        return request.get_header_value("Authorization") == "Bearer " + expected_key_;
    }

    void handle_chat(const httplib::Request& request, httplib::Response& response) {
        requests_.fetch_add(1, std::memory_order_relaxed);
        if (!authorized(request)) {
            response.status = 401;
            response.set_content(R"({"error":"invalid or missing bearer token"})",
                                 "application/json");
            return;
        }
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(request.body);
        } catch (const nlohmann::json::parse_error&) {
            response.status = 400;
            response.set_content(R"({"error":"body is not JSON"})", "application/json");
            return;
        }
        if (!body.contains("messages") || !body["messages"].is_array()) {
            response.status = 400;
            response.set_content(R"({"error":"missing messages"})", "application/json");
            return;
        }

        std::vector<ChatMessage> messages;
        for (const auto& item : body["messages"])
            messages.push_back({item.value("role", ""), item.value("content", "")});

        try {
            GatewayConfig config;
            config.model_id = body.value("model", kMockChatModelId);
            const std::string content = chat_->complete(messages, config);
            nlohmann::json reply{
                {"model", config.model_id},
                {"choices",
                 {{{"index", 0},
                   {"message", {{"role", "assistant"}, {"content", content}}},
                   {"finish_reason", "stop"}}}}};
            response.set_content(reply.dump(), "application/json");
        } catch (const GatewayError& e) {
            response.status = e.retryable() ? 503 : 400;
            response.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        }
    }

    void handle_embeddings(const httplib::Request& request, httplib::Response& response) {
        requests_.fetch_add(1, std::memory_order_relaxed);
        if (!authorized(request)) {
            response.status = 401;
            response.set_content(R"({"error":"invalid or missing bearer token"})",
                                 "application/json");
            return;
        }
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(request.body);
        } catch (const nlohmann::json::parse_error&) {
            response.status = 400;
            response.set_content(R"({"error":"body is not JSON"})", "application/json");
            return;
        }
        if (!body.contains("input")) {
            response.status = 400;
            response.set_content(R"({"error":"missing input"})", "application/json");
            return;
        }

        std::vector<std::string> texts;
        if (body["input"].is_string())
            texts.push_back(body["input"].get<std::string>());
        else
            for (const auto& item : body["input"])
                texts.push_back(item.get<std::string>());

        try {
            GatewayConfig config;
            config.model_id = body.value("model", kMockEmbedModelId);
            const auto vectors = embed_->embed_batch(texts, config);
            nlohmann::json data = nlohmann::json::array();
            for (std::size_t i = 0; i < vectors.size(); ++i)
                data.push_back({{"object", "embedding"},
                                {"index", i},
                                {"embedding", vectors[i]}});
            nlohmann::json reply{{"object", "list"}, {"model", config.model_id}, {"data", data}};
            response.set_content(reply.dump(), "application/json");
        } catch (const GatewayError& e) {
            response.status = e.retryable() ? 503 : 400;
            response.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        } catch (const std::invalid_argument& e) {
            response.status = 400;
            response.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        }
    }

    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;
    std::shared_ptr<MockChatBackend> chat_;
    std::shared_ptr<MockEmbedBackend> embed_;
    bool require_auth_;
    std::string expected_key_;
    std::atomic<std::size_t> requests_{0};
};

} // namespace textaug::testkit
