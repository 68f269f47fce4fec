#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "textaug/errors.hpp"
#include "textaug/transport.hpp"

namespace textaug {

/// A sentence embedding. Vectors handed out by EmbedClient are always
/// L2-normalized locally, regardless of what the service returned.
struct Embedding {
    std::vector<double> vector;
    std::string model_id;
    bool unit_norm = false;

    std::size_t dim() const { return vector.size(); }
};

inline double l2_norm(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v)
        sum += x * x;
    return std::sqrt(sum);
}

inline void l2_normalize(std::vector<double>& v) {
    const double norm = l2_norm(v);
    if (!(norm > 0.0))
        throw std::invalid_argument("cannot normalize a zero vector");
    for (double& x : v)
        x /= norm;
}

/// Cosine similarity, clamped to [-1, 1] against rounding overshoot.
inline double cosine_similarity(const Embedding& a, const Embedding& b) {
    if (a.dim() == 0 || b.dim() == 0)
        throw std::invalid_argument("cosine_similarity: empty vector");
    if (a.dim() != b.dim())
        throw std::invalid_argument("cosine_similarity: dimension mismatch (" +
                                    std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) +
                                    ")");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.vector.size(); ++i)
        dot += a.vector[i] * b.vector[i];
    const double na = l2_norm(a.vector);
    const double nb = l2_norm(b.vector);
    if (!(na > 0.0) || !(nb > 0.0))
        throw std::invalid_argument("cosine_similarity: zero-norm vector");
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

class EmbedBackend {
public:
    virtual ~EmbedBackend() = default;
    virtual std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts,
                                                         const GatewayConfig& config) = 0;
};

/// Batched, rate-limited access to an embedding service. Output order
/// matches input order; every returned vector is unit-norm.
class EmbedClient {
public:
    EmbedClient(std::shared_ptr<EmbedBackend> backend, GatewayConfig config)
        : backend_(std::move(backend)), config_(std::move(config)),
          limiter_(config_.requests_per_second_cap) {
        config_.validate();
    }

    const GatewayConfig& config() const { return config_; }

    std::vector<Embedding> embed(const std::vector<std::string>& texts,
                                 std::size_t batch_size = 64) {
        if (batch_size < 1)
            throw std::invalid_argument("batch_size must be >= 1");
        for (const auto& text : texts)
            if (text.empty())
                throw std::invalid_argument("cannot embed an empty text");

        std::vector<Embedding> out;
        out.reserve(texts.size());
        for (std::size_t start = 0; start < texts.size(); start += batch_size) {
            const std::size_t stop = std::min(texts.size(), start + batch_size);
            std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                           texts.begin() + static_cast<std::ptrdiff_t>(stop));
            auto vectors = call_backend(chunk);
            if (vectors.size() != chunk.size())
                throw GatewayError(GatewayErrorKind::protocol,
                                   "embedding service returned " + std::to_string(vectors.size()) +
                                       " vectors for " + std::to_string(chunk.size()) + " inputs");
            for (auto& vector : vectors) {
                if (!out.empty() && vector.size() != out.front().dim())
                    throw GatewayError(GatewayErrorKind::protocol,
                                       "embedding dimension mismatch within batch");
                Embedding embedding;
                embedding.vector = std::move(vector);
                embedding.model_id = config_.model_id;
                l2_normalize(embedding.vector);
                embedding.unit_norm = true;
                out.push_back(std::move(embedding));
            }
        }
        return out;
    }

    Embedding embed_one(const std::string& text) { return embed({text}, 1).front(); }

private:
    std::vector<std::vector<double>> call_backend(const std::vector<std::string>& chunk) {
        for (int try_index = 0;; ++try_index) {
            limiter_.acquire();
            try {
                return backend_->embed_batch(chunk, config_);
            } catch (const GatewayError& e) {
                if (!e.retryable() || try_index >= config_.transport_retry_limit)
                    throw;
            }
        }
    }

    std::shared_ptr<EmbedBackend> backend_;
    GatewayConfig config_;
    RateLimiter limiter_;
};

} // namespace textaug
