#pragma once

#include <cctype>
#include <chrono>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "textaug/corpus.hpp"
#include "textaug/errors.hpp"
#include "textaug/hashing.hpp"
#include "textaug/transport.hpp"

namespace textaug {

enum class ConcatOrder { caption_then_instruction, instruction_then_caption };

struct PromptTemplate {
    std::string instruction = "Rewrite this image caption.";
    ConcatOrder concat_order = ConcatOrder::caption_then_instruction;
    std::optional<std::string> system_preamble;
};

struct ChatMessage {
    std::string role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

/// One completion for one caption, with provenance and attempt index.
/// candidate_text is empty when sanitization rejected the completion.
struct RewriteCandidate {
    std::string text_id;
    int attempt = 1;
    std::string raw_completion;
    std::string candidate_text;
    std::string model_id;
    std::string prompt_hash;
    long latency_ms = 0;

    bool usable() const { return !candidate_text.empty(); }
};

/// Renders the rewrite request: optional system message, then exactly one
/// user message holding the caption and the instruction in template order.
/// Rendering is a pure function of (caption, template).
inline std::vector<ChatMessage> build_rewrite_request(const CaptionRecord& original,
                                                      const PromptTemplate& prompt) {
    if (prompt.instruction.empty())
        throw std::invalid_argument("prompt instruction must be non-empty");
    if (original.text.empty())
        throw std::invalid_argument("cannot rewrite an empty caption");

    std::vector<ChatMessage> messages;
    if (prompt.system_preamble && !prompt.system_preamble->empty())
        messages.push_back({"system", *prompt.system_preamble});

    std::string user;
    if (prompt.concat_order == ConcatOrder::caption_then_instruction)
        user = original.text + " " + prompt.instruction;
    else
        user = prompt.instruction + " " + original.text;
    messages.push_back({"user", std::move(user)});
    return messages;
}

inline std::string prompt_digest(const std::vector<ChatMessage>& messages) {
    std::uint64_t h = kFnvOffset;
    for (const auto& message : messages) {
        h = fnv1a64(message.role, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(message.content, h);
        h = fnv1a64("\x1e", h);
    }
    return hex_digest(h);
}

namespace detail {

inline bool is_quote_char(char c) {
    return c == '"' || c == '\'' || c == '`';
}

inline std::string strip_surrounding_quotes(std::string text) {
    while (text.size() >= 2 && is_quote_char(text.front()) && text.back() == text.front())
        text = normalize_caption(text.substr(1, text.size() - 2));
    return text;
}

// Words allowed in a leading label such as "Rewritten caption:" or
// "Sure, here is the rewritten caption:". Anything else before the colon
// means the colon is part of the caption itself.
inline bool is_label_word(const std::string& word) {
    static const std::set<std::string> kLabelWords = {
        "sure",    "ok",     "okay",  "certainly", "here",   "is",      "are",
        "the",     "a",      "an",    "rewritten", "rewrite", "caption", "captions",
        "image",   "text",   "new",   "version",   "your",    "s",       "of",
        "this",    "result",
    };
    return kLabelWords.count(word) > 0;
}

inline std::string strip_leading_label(const std::string& text) {
    const std::size_t colon = text.find(':');
    if (colon == std::string::npos || colon == 0 || colon > 48)
        return text;

    std::string word;
    std::size_t words = 0;
    for (std::size_t i = 0; i < colon; ++i) {
        const char c = text[i];
        if (std::isalpha(static_cast<unsigned char>(c))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            if (!word.empty()) {
                if (!is_label_word(word))
                    return text;
                ++words;
                word.clear();
            }
            if (c != ' ' && c != ',' && c != '\'' && c != '!')
                return text;
        }
    }
    if (!word.empty()) {
        if (!is_label_word(word))
            return text;
        ++words;
    }
    if (words == 0 || words > 8)
        return text;
    return normalize_caption(text.substr(colon + 1));
}

inline double ascii_letter_ratio(const std::string& text) {
    std::size_t letters = 0;
    std::size_t visible = 0;
    for (unsigned char c : text) {
        if (is_space_byte(static_cast<char>(c)))
            continue;
        ++visible;
        if (std::isalpha(c))
            ++letters;
    }
    if (visible == 0)
        return 0.0;
    return static_cast<double>(letters) / static_cast<double>(visible);
}

} // namespace detail

// Minimum fraction of ASCII letters among visible characters; below this the
// completion is treated as garbled output rather than a caption.
inline constexpr double kMinLetterRatio = 0.30;

/// Cleans a raw completion into a single-line caption candidate: collapses
/// whitespace, strips surrounding quotes and leading labels, and rejects
/// empty or garbled results. Idempotent: sanitize(sanitize(x)) == sanitize(x).
inline std::optional<std::string> sanitize_response(const std::string& raw_completion) {
    std::string text = normalize_caption(raw_completion);
    text = detail::strip_surrounding_quotes(text);
    text = detail::strip_leading_label(text);
    text = detail::strip_surrounding_quotes(text);
    if (text.empty())
        return std::nullopt;
    if (detail::ascii_letter_ratio(text) < kMinLetterRatio)
        return std::nullopt;
    return text;
}

/// Transport-level interface to a chat-completion service. Implementations
/// throw GatewayError; retry policy lives in ChatClient.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages,
                                 const GatewayConfig& config) = 0;
};

/// Rewrites captions through a ChatBackend with bounded transport retries
/// and rate limiting. Shareable across concurrent pipeline workers; the
/// rate limiter is the only synchronized element.
class ChatClient {
public:
    ChatClient(std::shared_ptr<ChatBackend> backend, GatewayConfig config)
        : backend_(std::move(backend)), config_(std::move(config)),
          limiter_(config_.requests_per_second_cap) {
        config_.validate();
    }

    const GatewayConfig& config() const { return config_; }

    /// Issues at most (1 + transport_retry_limit) requests and returns the
    /// first successful completion, sanitized.
    RewriteCandidate rewrite(const CaptionRecord& original, const PromptTemplate& prompt,
                             int attempt = 1) {
        const auto messages = build_rewrite_request(original, prompt);
        const auto started = std::chrono::steady_clock::now();

        std::string raw;
        for (int try_index = 0;; ++try_index) {
            limiter_.acquire();
            try {
                raw = backend_->complete(messages, config_);
                break;
            } catch (const GatewayError& e) {
                if (!e.retryable() || try_index >= config_.transport_retry_limit)
                    throw;
            }
        }

        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);

        RewriteCandidate candidate;
        candidate.text_id = original.text_id;
        candidate.attempt = attempt;
        candidate.raw_completion = raw;
        candidate.candidate_text = sanitize_response(raw).value_or("");
        candidate.model_id = config_.model_id;
        candidate.prompt_hash = prompt_digest(messages);
        candidate.latency_ms = static_cast<long>(elapsed.count());
        return candidate;
    }

private:
    std::shared_ptr<ChatBackend> backend_;
    GatewayConfig config_;
    RateLimiter limiter_;
};

} // namespace textaug
