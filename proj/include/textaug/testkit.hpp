#pragma once

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <deque>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "textaug/embed_gateway.hpp"
#include "textaug/hashing.hpp"
#include "textaug/llm_gateway.hpp"

namespace textaug::testkit {

inline constexpr std::size_t kMockEmbedDim = 256;
inline constexpr const char* kMockEmbedModelId = "mock-embed-256-v1";
inline constexpr const char* kMockChatModelId = "mock-rewriter-v1";

enum class ParaphraseQuality { faithful, noisy, garbage };

/// Mock behavior is a pure function of (seed, input text, attempt index).
struct MockProfile {
    std::uint64_t seed = 0;
    ParaphraseQuality quality = ParaphraseQuality::faithful;
    double failure_rate = 0.0; // simulated transport faults, per call
    double garbage_rate = 0.0; // garbled completions injected on top of `quality`
    int latency_ms = 0;
};

namespace detail {

inline std::uint64_t mix(std::uint64_t seed, std::string_view salt, std::string_view text,
                         int attempt) {
    std::uint64_t h = fnv1a64_u64(seed);
    h = fnv1a64(salt, h);
    h = fnv1a64(text, h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(attempt), h);
    return splitmix64(h);
}

inline double frac(std::uint64_t h) {
    return unit_open(h);
}

inline std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream stream(text);
    std::string word;
    while (stream >> word)
        words.push_back(word);
    return words;
}

inline std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& word : words) {
        if (!out.empty())
            out += ' ';
        out += word;
    }
    return out;
}

inline std::string garbage_text(std::uint64_t h) {
    static constexpr const char* kChunks[] = {"###", "@@",  "%%%", "0192", "7744", "==",
                                              "+++", "~^~", "$$",  "8080", "!!",   "&&"};
    std::string out;
    for (int i = 0; i < 6; ++i) {
        if (i)
            out += ' ';
        out += kChunks[(h >> (i * 4)) % (sizeof(kChunks) / sizeof(kChunks[0]))];
    }
    return out;
}

inline std::string swap_articles(std::vector<std::string> words) {
    for (auto& word : words) {
        if (word == "a" || word == "an")
            word = "the";
        else if (word == "A" || word == "An")
            word = "The";
        else if (word == "is")
            word = "appears";
    }
    return join_words(words);
}

inline std::string faithful_paraphrase(const std::string& caption, std::uint64_t h) {
    const auto words = split_words(caption);
    switch (h % 6) {
    case 0: return "The photo shows " + caption;
    case 1: return caption + ", seen here";
    case 2: return swap_articles(words);
    case 3: return "Pictured here, " + caption;
    case 4: return caption + " in this image";
    default: {
        // swap clauses around the first comma when present
        const std::size_t comma = caption.find(", ");
        if (comma != std::string::npos && comma + 2 < caption.size())
            return caption.substr(comma + 2) + ", " + caption.substr(0, comma);
        return "This picture shows " + caption;
    }
    }
}

inline std::string unfaithful_paraphrase(const std::string& caption, std::uint64_t h) {
    static constexpr const char* kFillers[] = {
        "an empty corridor with flickering lights",
        "several unrelated objects scattered on grass",
        "a blurry landscape at dusk with no people",
        "two bicycles leaning against a brick wall",
    };
    const auto words = split_words(caption);
    std::string kept = words.empty() ? std::string("something") : words[h % words.size()];
    return kept + " near " + kFillers[(h >> 8) % 4];
}

} // namespace detail

/// Deterministic stand-in for the rewriter. Faithful output preserves every
/// content word; garbage output fails the sanitizer's letter-ratio check.
/// Some completions carry quote/label decorations so the sanitizer is
/// exercised end to end.
inline std::string mock_rewrite(const std::string& text, int attempt, const MockProfile& profile) {
    const std::string caption = normalize_caption(text);
    const std::uint64_t h = detail::mix(profile.seed, "rewrite", caption, attempt);

    std::string body;
    const bool inject_garbage =
        profile.quality == ParaphraseQuality::garbage ||
        detail::frac(detail::mix(profile.seed, "garbage", caption, attempt)) < profile.garbage_rate;
    if (inject_garbage) {
        body = detail::garbage_text(h);
    } else if (profile.quality == ParaphraseQuality::noisy &&
               detail::frac(detail::mix(profile.seed, "noisy", caption, attempt)) < 0.5) {
        body = detail::unfaithful_paraphrase(caption, h);
    } else {
        body = detail::faithful_paraphrase(caption, h);
    }

    const std::uint64_t deco = detail::mix(profile.seed, "decor", caption, attempt);
    if (deco % 100 < 20)
        body = "Rewritten caption: " + body;
    else if (deco % 100 < 28)
        body = "Sure, here is the rewritten caption: " + body;
    if ((deco >> 32) % 100 < 25)
        body = "\"" + body + "\"";
    return body;
}

/// Whether the call_index-th request for this text should fail at the
/// transport level. Keyed by call index, not attempt, so a retried request
/// can recover deterministically.
inline bool mock_transport_fault(const std::string& text, int call_index,
                                 const MockProfile& profile) {
    if (profile.failure_rate <= 0.0)
        return false;
    return detail::frac(detail::mix(profile.seed, "fault", normalize_caption(text), call_index)) <
           profile.failure_rate;
}

namespace detail {

inline bool is_stopword(const std::string& token) {
    static const std::set<std::string> kStopwords = {
        "a",  "an",  "the",  "in",   "on",   "at",  "of", "and",
        "is", "are", "this", "that", "here", "there", "with"};
    return kStopwords.count(token) > 0;
}

} // namespace detail

/// Hashed bag-of-words embedding over a fixed 256-bucket vocabulary space,
/// L2-normalized. Stopwords are dropped so paraphrases that only shuffle
/// function words stay close in cosine; texts sharing no content words land
/// near zero. Identical texts map to identical vectors.
inline std::vector<double> mock_embed_vector(const std::string& text) {
    const std::string normalized = normalize_caption(text);
    std::vector<std::string> tokens;
    std::string token;
    auto flush = [&] {
        if (!token.empty()) {
            tokens.push_back(token);
            token.clear();
        }
    };
    for (char c : normalized) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else
            flush();
    }
    flush();
    if (tokens.empty())
        throw std::invalid_argument("mock_embed_vector requires text with at least one token");

    std::vector<std::string> content;
    for (const auto& t : tokens)
        if (!detail::is_stopword(t))
            content.push_back(t);
    if (content.empty())
        content = tokens; // all-stopword text still embeds

    std::vector<double> v(kMockEmbedDim, 0.0);
    for (const auto& t : content)
        v[fnv1a64(t) % kMockEmbedDim] += 1.0;
    l2_normalize(v);
    return v;
}

/// In-process chat backend with deterministic fault injection. Completions
/// and faults depend only on (profile.seed, caption, per-caption call index),
/// so runs are reproducible regardless of worker interleaving.
class MockChatBackend final : public ChatBackend {
public:
    explicit MockChatBackend(MockProfile profile,
                             std::string instruction = PromptTemplate{}.instruction)
        : profile_(profile), instruction_(std::move(instruction)) {}

    std::string complete(const std::vector<ChatMessage>& messages,
                         const GatewayConfig& config) override {
        (void)config;
        const std::string caption = caption_of(messages);

        int call_index = 0;
        int completion_index = 0;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            call_index = calls_per_text_[caption]++;
            completion_index = completions_per_text_[caption]; // incremented on success
        }
        total_calls_.fetch_add(1, std::memory_order_relaxed);

        if (profile_.latency_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(profile_.latency_ms));
        if (mock_transport_fault(caption, call_index, profile_))
            throw GatewayError(GatewayErrorKind::transport, "injected transport fault");

        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++completions_per_text_[caption];
        }
        completions_.fetch_add(1, std::memory_order_relaxed);
        return mock_rewrite(caption, completion_index + 1, profile_);
    }

    std::size_t total_calls() const { return total_calls_.load(); }
    std::size_t completions() const { return completions_.load(); }

    const MockProfile& profile() const { return profile_; }

private:
    std::string caption_of(const std::vector<ChatMessage>& messages) const {
        for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
            if (it->role != "user")
                continue;
            std::string content = normalize_caption(it->content);
            const std::string suffix = " " + instruction_;
            if (content.size() > suffix.size() &&
                content.compare(content.size() - suffix.size(), suffix.size(), suffix) == 0)
                return content.substr(0, content.size() - suffix.size());
            const std::string prefix = instruction_ + " ";
            if (content.rfind(prefix, 0) == 0)
                return content.substr(prefix.size());
            return content;
        }
        throw GatewayError(GatewayErrorKind::config, "request has no user message");
    }

    MockProfile profile_;
    std::string instruction_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, int> calls_per_text_;
    std::unordered_map<std::string, int> completions_per_text_;
    std::atomic<std::size_t> total_calls_{0};
    std::atomic<std::size_t> completions_{0};
};

class MockEmbedBackend final : public EmbedBackend {
public:
    MockEmbedBackend() = default;
    explicit MockEmbedBackend(MockProfile profile) : profile_(profile) {}

    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts,
                                                 const GatewayConfig& config) override {
        (void)config;
        int call_index = calls_.fetch_add(1, std::memory_order_relaxed);
        if (profile_.failure_rate > 0.0 &&
            mock_transport_fault(texts.empty() ? "" : texts.front(), call_index, profile_))
            throw GatewayError(GatewayErrorKind::transport, "injected transport fault");

        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& text : texts)
            out.push_back(mock_embed_vector(text));
        return out;
    }

    std::size_t calls() const { return static_cast<std::size_t>(calls_.load()); }

private:
    MockProfile profile_{};
    std::atomic<int> calls_{0};
};

/// Plays back an explicit sequence of responses and failures; used for
/// retry-arithmetic and error-path tests.
class ScriptedChatBackend final : public ChatBackend {
public:
    enum class StepKind { respond, fail_transport, fail_timeout, fail_config };
    struct Step {
        StepKind kind;
        std::string payload; // completion text or error message
    };

    explicit ScriptedChatBackend(std::vector<Step> steps) : steps_(steps.begin(), steps.end()) {}

    std::string complete(const std::vector<ChatMessage>&, const GatewayConfig&) override {
        Step step;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++calls_;
            if (steps_.empty())
                throw std::logic_error("scripted backend exhausted");
            step = steps_.front();
            steps_.pop_front();
        }
        switch (step.kind) {
        case StepKind::respond: return step.payload;
        case StepKind::fail_transport:
            throw GatewayError(GatewayErrorKind::transport, step.payload);
        case StepKind::fail_timeout: throw GatewayError(GatewayErrorKind::timeout, step.payload);
        case StepKind::fail_config: throw GatewayError(GatewayErrorKind::config, step.payload);
        }
        throw std::logic_error("unreachable");
    }

    std::size_t calls() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return calls_;
    }

private:
    mutable std::mutex mutex_;
    std::deque<Step> steps_;
    std::size_t calls_ = 0;
};

/// Returns preassigned vectors for known texts; used to craft exact
/// similarity values in filter tests.
class FixedEmbedBackend final : public EmbedBackend {
public:
    explicit FixedEmbedBackend(std::unordered_map<std::string, std::vector<double>> table)
        : table_(std::move(table)) {}

    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts,
                                                 const GatewayConfig&) override {
        std::vector<std::vector<double>> out;
        for (const auto& text : texts) {
            auto it = table_.find(text);
            if (it == table_.end())
                throw std::logic_error("FixedEmbedBackend has no vector for: " + text);
            out.push_back(it->second);
        }
        return out;
    }

private:
    std::unordered_map<std::string, std::vector<double>> table_;
};

// ---------------------------------------------------------------------------
// Brute-force reference implementations (N <= 20). Deliberately naive: no
// stability tricks, no shared code with the production math.
// ---------------------------------------------------------------------------

inline double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// s[i][j] = score of text i against image j, matching the production layout.
inline double oracle_loss_image_to_text(const std::vector<std::vector<double>>& s, double tau) {
    const std::size_t n = s.size();
    double loss = 0.0;
    for (std::size_t image = 0; image < n; ++image) {
        double denom = 0.0;
        for (std::size_t text = 0; text < n; ++text)
            denom += std::exp(s[text][image] / tau);
        loss += -std::log(std::exp(s[image][image] / tau) / denom);
    }
    return loss;
}

inline double oracle_loss_text_to_image(const std::vector<std::vector<double>>& s, double tau) {
    const std::size_t n = s.size();
    double loss = 0.0;
    for (std::size_t text = 0; text < n; ++text) {
        double denom = 0.0;
        for (std::size_t image = 0; image < n; ++image)
            denom += std::exp(s[text][image] / tau);
        loss += -std::log(std::exp(s[text][text] / tau) / denom);
    }
    return loss;
}

namespace detail {

inline std::vector<std::size_t> oracle_ranking(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    // selection sort by (score desc, index asc)
    for (std::size_t i = 0; i < order.size(); ++i) {
        std::size_t best = i;
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            if (scores[order[j]] > scores[order[best]] ||
                (scores[order[j]] == scores[order[best]] && order[j] < order[best]))
                best = j;
        }
        std::swap(order[i], order[best]);
    }
    return order;
}

inline bool oracle_contains(const std::vector<std::size_t>& set, std::size_t value) {
    for (std::size_t x : set)
        if (x == value)
            return true;
    return false;
}

} // namespace detail

inline double oracle_rank_k(const std::vector<std::vector<double>>& s,
                            const std::vector<std::vector<std::size_t>>& relevant, std::size_t k) {
    std::size_t hits = 0;
    for (std::size_t q = 0; q < s.size(); ++q) {
        const auto order = detail::oracle_ranking(s[q]);
        bool found = false;
        for (std::size_t rank = 0; rank < k && !found; ++rank)
            found = detail::oracle_contains(relevant[q], order[rank]);
        if (found)
            ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(s.size());
}

inline double oracle_mean_average_precision(const std::vector<std::vector<double>>& s,
                                            const std::vector<std::vector<std::size_t>>& relevant) {
    double ap_sum = 0.0;
    for (std::size_t q = 0; q < s.size(); ++q) {
        const auto order = detail::oracle_ranking(s[q]);
        std::size_t found = 0;
        double precision_sum = 0.0;
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            if (detail::oracle_contains(relevant[q], order[rank])) {
                ++found;
                precision_sum += static_cast<double>(found) / static_cast<double>(rank + 1);
            }
        }
        ap_sum += precision_sum / static_cast<double>(relevant[q].size());
    }
    return 100.0 * ap_sum / static_cast<double>(s.size());
}

} // namespace textaug::testkit
