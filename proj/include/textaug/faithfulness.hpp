#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "textaug/corpus.hpp"
#include "textaug/embed_gateway.hpp"
#include "textaug/llm_gateway.hpp"

namespace textaug {

struct FaithfulnessVerdict {
    std::string text_id;
    int attempt = 1;
    double similarity = 0.0;
    bool accepted = false;
    double alpha = 0.0;
};

/// Embeds both texts and accepts iff cosine similarity >= alpha.
/// The tie (similarity == alpha) accepts.
inline FaithfulnessVerdict judge(EmbedClient& embedder, const std::string& original_text,
                                 const std::string& candidate_text, double alpha,
                                 std::string text_id = {}, int attempt = 1) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("alpha must lie in [0, 1]");
    if (original_text.empty() || candidate_text.empty())
        throw std::invalid_argument("judge requires non-empty texts");

    const auto embeddings = embedder.embed({original_text, candidate_text}, 2);
    const double similarity = cosine_similarity(embeddings[0], embeddings[1]);

    FaithfulnessVerdict verdict;
    verdict.text_id = std::move(text_id);
    verdict.attempt = attempt;
    verdict.similarity = similarity;
    verdict.accepted = similarity >= alpha;
    verdict.alpha = alpha;
    return verdict;
}

enum class OutcomeStatus {
    accepted,
    fallback_original, // attempt budget exhausted; original text retained
    gateway_error,     // non-retryable gateway failure; distinct from fallback
};

inline const char* to_string(OutcomeStatus status) {
    switch (status) {
    case OutcomeStatus::accepted: return "accepted";
    case OutcomeStatus::fallback_original: return "fallback_original";
    case OutcomeStatus::gateway_error: return "gateway_error";
    }
    return "?";
}

/// One rewrite attempt as recorded for audit. similarity is absent when
/// sanitization rejected the completion before it was ever judged.
struct AttemptRecord {
    int attempt = 1;
    std::string raw_completion;
    std::string candidate_text; // empty if sanitization rejected
    std::string prompt_hash;
    std::optional<double> similarity;
    bool accepted = false;
    long latency_ms = 0;
};

/// Terminal state for one caption: accepted text + score, or fallback.
struct AugmentationOutcome {
    std::string text_id;
    OutcomeStatus status = OutcomeStatus::fallback_original;
    std::string final_text;
    std::optional<double> similarity;
    int attempts_used = 0;
    std::vector<AttemptRecord> attempts; // attempts made by this call only
    std::string error_message;

    std::vector<std::pair<std::string, double>> rejected_candidates() const {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& a : attempts)
            if (!a.accepted && a.similarity)
                out.emplace_back(a.candidate_text, *a.similarity);
        return out;
    }
};

struct AugmentContext {
    ChatClient& llm;
    EmbedClient& embedder;
    PromptTemplate prompt;
};

/// Runs the rewrite -> sanitize -> judge loop until a candidate is accepted
/// or the attempt budget is exhausted; on exhaustion the original text is
/// kept. attempts_already_used lets a resumed record continue its numbering.
/// Retryable gateway errors propagate (the caller aborts the run); anything
/// non-retryable yields a gateway_error outcome for this record alone.
inline AugmentationOutcome augment_with_retry(const CaptionRecord& record, double alpha,
                                              int max_attempts, AugmentContext& context,
                                              int attempts_already_used = 0) {
    if (max_attempts < 1)
        throw std::invalid_argument("max_attempts must be >= 1");
    if (attempts_already_used < 0 || attempts_already_used >= max_attempts)
        throw std::invalid_argument("attempts_already_used must lie in [0, max_attempts)");

    AugmentationOutcome outcome;
    outcome.text_id = record.text_id;

    for (int attempt = attempts_already_used + 1; attempt <= max_attempts; ++attempt) {
        AttemptRecord entry;
        entry.attempt = attempt;
        try {
            RewriteCandidate candidate = context.llm.rewrite(record, context.prompt, attempt);
            entry.raw_completion = candidate.raw_completion;
            entry.candidate_text = candidate.candidate_text;
            entry.prompt_hash = candidate.prompt_hash;
            entry.latency_ms = candidate.latency_ms;
            if (candidate.usable()) {
                FaithfulnessVerdict verdict = judge(context.embedder, record.text,
                                                    candidate.candidate_text, alpha,
                                                    record.text_id, attempt);
                entry.similarity = verdict.similarity;
                entry.accepted = verdict.accepted;
            }
        } catch (const GatewayError& e) {
            if (e.retryable())
                throw;
            outcome.status = OutcomeStatus::gateway_error;
            outcome.final_text = record.text;
            outcome.attempts_used = attempt - 1;
            outcome.error_message = e.what();
            return outcome;
        }

        outcome.attempts.push_back(entry);
        if (entry.accepted) {
            outcome.status = OutcomeStatus::accepted;
            outcome.final_text = entry.candidate_text;
            outcome.similarity = entry.similarity;
            outcome.attempts_used = attempt;
            return outcome;
        }
    }

    outcome.status = OutcomeStatus::fallback_original;
    outcome.final_text = record.text;
    outcome.attempts_used = max_attempts;
    return outcome;
}

/// Histogram of similarity scores in half-open bins [k*w, (k+1)*w). Raw
/// samples are retained so threshold queries are exact counts rather than
/// bin approximations.
class SimilarityHistogram {
public:
    explicit SimilarityHistogram(double bin_width) : width_(bin_width) {
        if (!(bin_width > 0.0) || bin_width > 1.0)
            throw std::invalid_argument("bin_width must lie in (0, 1]");
    }

    static long long bin_index(double similarity, double width) {
        return static_cast<long long>(std::floor(similarity / width + 1e-9));
    }

    void add(double similarity) {
        ++bins_[bin_index(similarity, width_)];
        samples_.push_back(similarity);
    }

    double bin_width() const { return width_; }
    std::size_t total() const { return samples_.size(); }
    const std::map<long long, std::size_t>& bins() const { return bins_; }
    const std::vector<double>& samples() const { return samples_; }
    double lower_edge(long long bin) const { return static_cast<double>(bin) * width_; }

    double fraction_at_or_above(double threshold) const {
        if (samples_.empty())
            return 0.0;
        std::size_t hits = 0;
        for (double s : samples_)
            if (s >= threshold)
                ++hits;
        return static_cast<double>(hits) / static_cast<double>(samples_.size());
    }

private:
    double width_;
    std::map<long long, std::size_t> bins_;
    std::vector<double> samples_;
};

/// Bins first-attempt similarities only, mirroring the raw (pre-retry)
/// quality distribution of the rewriter.
inline SimilarityHistogram similarity_histogram(const std::vector<FaithfulnessVerdict>& verdicts,
                                                double bin_width) {
    SimilarityHistogram histogram(bin_width);
    for (const auto& verdict : verdicts)
        if (verdict.attempt == 1)
            histogram.add(verdict.similarity);
    return histogram;
}

} // namespace textaug
