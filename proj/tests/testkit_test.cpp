#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "textaug/embed_gateway.hpp"
#include "textaug/llm_gateway.hpp"
#include "textaug/testkit.hpp"

using namespace textaug;
using namespace textaug::testkit;

namespace {

const std::vector<std::string> kCaptions = {
    "a man in a red shirt",
    "a woman carrying a blue bag and wearing white shoes",
    "the tall man wears a black jacket, grey jeans and brown boots",
    "a young girl with a pink backpack walking on the street",
    "an old man with a cane and a long green coat",
};

std::vector<std::string> generated_captions(std::size_t n) {
    static const std::vector<std::string> kSubjects = {"a man", "a woman", "a boy", "a girl"};
    static const std::vector<std::string> kColors = {"red", "blue", "green", "black", "white"};
    static const std::vector<std::string> kItems = {"shirt", "jacket", "coat", "dress", "hat"};
    static const std::vector<std::string> kExtras = {"carrying a bag", "wearing sneakers",
                                                     "holding an umbrella", "with a backpack"};
    std::vector<std::string> captions;
    std::uint64_t h = 9001;
    for (std::size_t i = 0; i < n; ++i) {
        h = splitmix64(h + i);
        captions.push_back(kSubjects[h % kSubjects.size()] + " in a " +
                           kColors[(h >> 8) % kColors.size()] + " " +
                           kItems[(h >> 16) % kItems.size()] + " " +
                           kExtras[(h >> 24) % kExtras.size()] + " number " + std::to_string(i));
    }
    return captions;
}

Embedding wrap(std::vector<double> v) {
    Embedding e;
    e.vector = std::move(v);
    return e;
}

} // namespace

TEST_CASE("mock_rewrite is deterministic and varies across attempts") {
    MockProfile profile;
    profile.seed = 7;
    for (const auto& caption : kCaptions) {
        CHECK(mock_rewrite(caption, 1, profile) == mock_rewrite(caption, 1, profile));
        CHECK(mock_rewrite(caption, 2, profile) == mock_rewrite(caption, 2, profile));
    }
    std::set<std::string> variants;
    for (int attempt = 1; attempt <= 6; ++attempt)
        variants.insert(mock_rewrite(kCaptions[0], attempt, profile));
    CHECK(variants.size() >= 2);
}

TEST_CASE("faithful rewrites keep the content words") {
    MockProfile profile;
    profile.seed = 13;
    for (int attempt = 1; attempt <= 4; ++attempt) {
        const auto sanitized = sanitize_response(mock_rewrite("a man in a red shirt", attempt,
                                                              profile));
        REQUIRE(sanitized.has_value());
        for (const char* word : {"man", "red", "shirt"})
            CHECK(sanitized->find(word) != std::string::npos);
    }
}

TEST_CASE("garbage-profile completions are rejected by the sanitizer") {
    MockProfile profile;
    profile.seed = 17;
    profile.quality = ParaphraseQuality::garbage;
    for (const auto& caption : generated_captions(50))
        for (int attempt = 1; attempt <= 2; ++attempt)
            CHECK_FALSE(sanitize_response(mock_rewrite(caption, attempt, profile)).has_value());
}

TEST_CASE("garbage injection fires at roughly the configured rate") {
    MockProfile profile;
    profile.seed = 23;
    profile.garbage_rate = 0.10;
    const auto captions = generated_captions(2000);
    std::size_t rejected = 0;
    for (const auto& caption : captions)
        if (!sanitize_response(mock_rewrite(caption, 1, profile)).has_value())
            ++rejected;
    const double rate = static_cast<double>(rejected) / static_cast<double>(captions.size());
    CHECK(rate > 0.06);
    CHECK(rate < 0.14);
}

TEST_CASE("transport faults fire at roughly the configured rate") {
    MockProfile profile;
    profile.seed = 29;
    profile.failure_rate = 0.05;
    std::size_t faults = 0;
    const auto captions = generated_captions(2000);
    for (const auto& caption : captions)
        if (mock_transport_fault(caption, 0, profile))
            ++faults;
    const double rate = static_cast<double>(faults) / static_cast<double>(captions.size());
    CHECK(rate > 0.02);
    CHECK(rate < 0.08);
}

TEST_CASE("mock embeddings are unit-norm, deterministic, and vocabulary-sensitive") {
    const auto a1 = mock_embed_vector("a man in a red shirt");
    const auto a2 = mock_embed_vector("a man in a red shirt");
    CHECK(a1 == a2);
    CHECK(a1.size() == kMockEmbedDim);
    CHECK(std::abs(l2_norm(a1) - 1.0) <= 1e-9);

    CHECK(cosine_similarity(wrap(a1), wrap(a2)) == doctest::Approx(1.0));

    // disjoint vocabularies: near-zero cosine modulo hash collisions
    const auto b = mock_embed_vector("purple elephants dancing beneath umbrellas");
    CHECK(cosine_similarity(wrap(a1), wrap(b)) < 0.1);

    CHECK_THROWS_AS(mock_embed_vector("   "), std::invalid_argument);
}

TEST_CASE("faithful paraphrase pairs clear the 0.6 similarity bar") {
    MockProfile profile;
    profile.seed = 31;
    const auto captions = generated_captions(1000);
    std::size_t passing = 0;
    std::size_t usable = 0;
    for (const auto& caption : captions) {
        const auto sanitized = sanitize_response(mock_rewrite(caption, 1, profile));
        if (!sanitized)
            continue;
        ++usable;
        const double similarity = cosine_similarity(wrap(mock_embed_vector(caption)),
                                                    wrap(mock_embed_vector(*sanitized)));
        if (similarity >= 0.6)
            ++passing;
    }
    REQUIRE(usable == captions.size()); // faithful profile never produces garbage
    // frozen regression threshold: at least 95% of pairs at or above 0.6
    CHECK(static_cast<double>(passing) / static_cast<double>(usable) >= 0.95);
}

TEST_CASE("noisy profile produces both faithful and unfaithful rewrites") {
    MockProfile profile;
    profile.seed = 37;
    profile.quality = ParaphraseQuality::noisy;
    std::size_t low = 0, high = 0;
    for (const auto& caption : generated_captions(300)) {
        const auto sanitized = sanitize_response(mock_rewrite(caption, 1, profile));
        if (!sanitized)
            continue;
        const double similarity = cosine_similarity(wrap(mock_embed_vector(caption)),
                                                    wrap(mock_embed_vector(*sanitized)));
        (similarity < 0.6 ? low : high) += 1;
    }
    CHECK(low > 0);
    CHECK(high > 0);
}

TEST_CASE("oracle sanity checks") {
    SUBCASE("identity scores rank perfectly") {
        std::vector<std::vector<double>> s(4, std::vector<double>(4, 0.0));
        std::vector<std::vector<std::size_t>> relevant;
        for (std::size_t i = 0; i < 4; ++i) {
            s[i][i] = 1.0;
            relevant.push_back({i});
        }
        CHECK(oracle_rank_k(s, relevant, 1) == 100.0);
        CHECK(oracle_mean_average_precision(s, relevant) == 100.0);
    }
    SUBCASE("uniform scores give N*log(N) per direction") {
        const std::size_t n = 4;
        std::vector<std::vector<double>> s(n, std::vector<double>(n, 0.42));
        CHECK(oracle_loss_image_to_text(s, 1.0) ==
              doctest::Approx(4.0 * std::log(4.0)).epsilon(1e-12));
        CHECK(oracle_loss_text_to_image(s, 1.0) ==
              doctest::Approx(4.0 * std::log(4.0)).epsilon(1e-12));
    }
    SUBCASE("N=2 identity closed form") {
        std::vector<std::vector<double>> s{{1.0, 0.0}, {0.0, 1.0}};
        CHECK(oracle_loss_image_to_text(s, 1.0) ==
              doctest::Approx(2.0 * std::log1p(std::exp(-1.0))).epsilon(1e-12));
    }
}
