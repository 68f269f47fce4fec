#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace textaug {

struct FeatureVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
};

enum class ScoreKind { cosine, dot };

/// N x N score grid. Row i belongs to text i, column j to image j, i.e.
/// at(i, j) == s(V_j, T_i). Both loss directions and both metrics are
/// defined relative to this orientation.
class SimilarityMatrix {
public:
    explicit SimilarityMatrix(std::size_t n, double fill = 0.0) : n_(n), cells_(n * n, fill) {
        if (n == 0)
            throw std::invalid_argument("similarity matrix must be at least 1x1");
    }

    std::size_t size() const { return n_; }

    double at(std::size_t text_row, std::size_t image_col) const {
        return cells_[text_row * n_ + image_col];
    }
    double& at(std::size_t text_row, std::size_t image_col) {
        return cells_[text_row * n_ + image_col];
    }

private:
    std::size_t n_;
    std::vector<double> cells_;
};

namespace detail {

inline double pair_score(const FeatureVector& a, const FeatureVector& b, ScoreKind kind) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        dot += a.values[i] * b.values[i];
    if (kind == ScoreKind::dot)
        return dot;
    double na = 0.0, nb = 0.0;
    for (double x : a.values)
        na += x * x;
    for (double x : b.values)
        nb += x * x;
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (!(na > 0.0) || !(nb > 0.0))
        throw std::invalid_argument("cosine score undefined for zero vectors");
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

inline void check_tau(double tau) {
    if (!(tau > 0.0))
        throw std::invalid_argument("temperature tau must be > 0");
}

} // namespace detail

/// Builds the batch score grid: at(i, j) = score(text i, image j).
inline SimilarityMatrix mixed_similarity_matrix(const std::vector<FeatureVector>& image_features,
                                                const std::vector<FeatureVector>& text_features,
                                                ScoreKind kind = ScoreKind::cosine) {
    if (image_features.empty() || image_features.size() != text_features.size())
        throw std::invalid_argument("need equal, non-zero image and text feature counts");
    const std::size_t dim = image_features.front().dim();
    if (dim == 0)
        throw std::invalid_argument("feature vectors must be non-empty");
    for (const auto& f : image_features)
        if (f.dim() != dim)
            throw std::invalid_argument("image feature dimension mismatch");
    for (const auto& f : text_features)
        if (f.dim() != dim)
            throw std::invalid_argument("text feature dimension mismatch");
    for (const auto* side : {&image_features, &text_features})
        for (const auto& f : *side)
            for (double x : f.values)
                if (!std::isfinite(x))
                    throw std::invalid_argument("feature vectors must be finite");

    const std::size_t n = image_features.size();
    SimilarityMatrix s(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            s.at(i, j) = detail::pair_score(text_features[i], image_features[j], kind);
    return s;
}

/// Softmax over texts for a fixed image column, at temperature tau.
/// Computed with max subtraction; probabilities sum to 1.
inline std::vector<double> image_to_text_probabilities(const SimilarityMatrix& s,
                                                       std::size_t image_col, double tau) {
    detail::check_tau(tau);
    const std::size_t n = s.size();
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t row = 0; row < n; ++row)
        peak = std::max(peak, s.at(row, image_col) / tau);
    std::vector<double> p(n);
    double denom = 0.0;
    for (std::size_t row = 0; row < n; ++row) {
        p[row] = std::exp(s.at(row, image_col) / tau - peak);
        denom += p[row];
    }
    for (double& x : p)
        x /= denom;
    return p;
}

/// Softmax over images for a fixed text row, at temperature tau.
inline std::vector<double> text_to_image_probabilities(const SimilarityMatrix& s,
                                                       std::size_t text_row, double tau) {
    detail::check_tau(tau);
    const std::size_t n = s.size();
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t col = 0; col < n; ++col)
        peak = std::max(peak, s.at(text_row, col) / tau);
    std::vector<double> p(n);
    double denom = 0.0;
    for (std::size_t col = 0; col < n; ++col) {
        p[col] = std::exp(s.at(text_row, col) / tau - peak);
        denom += p[col];
    }
    for (double& x : p)
        x /= denom;
    return p;
}

/// Image-to-text contrastive loss: for each image i the positive is the
/// diagonal entry and the partition runs over all texts (down column i).
/// Summed over the batch, non-negative, log-sum-exp stabilized.
inline double contrastive_loss_image_to_text(const SimilarityMatrix& s, double tau) {
    detail::check_tau(tau);
    const std::size_t n = s.size();
    double loss = 0.0;
    for (std::size_t image = 0; image < n; ++image) {
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t text = 0; text < n; ++text)
            peak = std::max(peak, s.at(text, image) / tau);
        double sum = 0.0;
        for (std::size_t text = 0; text < n; ++text)
            sum += std::exp(s.at(text, image) / tau - peak);
        loss += peak + std::log(sum) - s.at(image, image) / tau;
    }
    return loss;
}

/// Text-to-image direction: softmax runs over images (across row i).
inline double contrastive_loss_text_to_image(const SimilarityMatrix& s, double tau) {
    detail::check_tau(tau);
    const std::size_t n = s.size();
    double loss = 0.0;
    for (std::size_t text = 0; text < n; ++text) {
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t image = 0; image < n; ++image)
            peak = std::max(peak, s.at(text, image) / tau);
        double sum = 0.0;
        for (std::size_t image = 0; image < n; ++image)
            sum += std::exp(s.at(text, image) / tau - peak);
        loss += peak + std::log(sum) - s.at(text, text) / tau;
    }
    return loss;
}

/// Analytic gradient of the total loss (both directions) with respect to
/// each score entry: d/dS[a][b] = (p_row(a,b) + p_col(a,b) - 2*[a==b]) / tau.
inline SimilarityMatrix contrastive_loss_gradient(const SimilarityMatrix& s, double tau) {
    detail::check_tau(tau);
    const std::size_t n = s.size();
    SimilarityMatrix grad(n, 0.0);
    for (std::size_t row = 0; row < n; ++row) {
        const auto p = text_to_image_probabilities(s, row, tau);
        for (std::size_t col = 0; col < n; ++col)
            grad.at(row, col) += p[col] / tau;
    }
    for (std::size_t col = 0; col < n; ++col) {
        const auto p = image_to_text_probabilities(s, col, tau);
        for (std::size_t row = 0; row < n; ++row)
            grad.at(row, col) += p[row] / tau;
    }
    for (std::size_t i = 0; i < n; ++i)
        grad.at(i, i) -= 2.0 / tau;
    return grad;
}

/// Identity-level relevance: for each text query (row), the set of relevant
/// image columns. Every query must have at least one relevant image.
struct GroundTruth {
    std::vector<std::vector<std::size_t>> relevant;
};

namespace detail {

inline void check_ground_truth(const SimilarityMatrix& s, const GroundTruth& gt) {
    if (gt.relevant.size() != s.size())
        throw std::invalid_argument("ground truth must cover every query row");
    for (std::size_t q = 0; q < gt.relevant.size(); ++q) {
        if (gt.relevant[q].empty())
            throw std::invalid_argument("query " + std::to_string(q) + " has no relevant items");
        for (std::size_t col : gt.relevant[q])
            if (col >= s.size())
                throw std::invalid_argument("relevant index out of range for query " +
                                            std::to_string(q));
    }
}

} // namespace detail

/// Gallery columns of one query row ordered by descending score; ties break
/// toward the lower column index.
inline std::vector<std::size_t> ranked_columns(const SimilarityMatrix& s, std::size_t text_row) {
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = s.at(text_row, a);
        const double sb = s.at(text_row, b);
        if (sa != sb)
            return sa > sb;
        return a < b;
    });
    return order;
}

/// Percentage of text queries whose top-K ranked gallery images contain at
/// least one relevant image.
inline double rank_k(const SimilarityMatrix& s, const GroundTruth& gt, std::size_t k) {
    detail::check_ground_truth(s, gt);
    if (k < 1 || k > s.size())
        throw std::invalid_argument("K must lie in [1, N]");

    std::size_t hits = 0;
    for (std::size_t q = 0; q < s.size(); ++q) {
        const auto order = ranked_columns(s, q);
        const auto& relevant = gt.relevant[q];
        for (std::size_t rank = 0; rank < k; ++rank) {
            if (std::find(relevant.begin(), relevant.end(), order[rank]) != relevant.end()) {
                ++hits;
                break;
            }
        }
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(s.size());
}

/// Mean over queries of average precision: AP averages, over a query's
/// relevant images, the precision at each one's rank. Returned as a
/// percentage. Same tie rule as rank_k.
inline double mean_average_precision(const SimilarityMatrix& s, const GroundTruth& gt) {
    detail::check_ground_truth(s, gt);

    double ap_sum = 0.0;
    for (std::size_t q = 0; q < s.size(); ++q) {
        const auto order = ranked_columns(s, q);
        const auto& relevant = gt.relevant[q];
        std::size_t found = 0;
        double precision_sum = 0.0;
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            if (std::find(relevant.begin(), relevant.end(), order[rank]) != relevant.end()) {
                ++found;
                precision_sum += static_cast<double>(found) / static_cast<double>(rank + 1);
            }
        }
        ap_sum += precision_sum / static_cast<double>(relevant.size());
    }
    return 100.0 * ap_sum / static_cast<double>(s.size());
}

} // namespace textaug
