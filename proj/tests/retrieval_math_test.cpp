#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "textaug/retrieval_math.hpp"
#include "textaug/testkit.hpp"

using namespace textaug;

namespace {

std::vector<FeatureVector> random_unit_vectors(std::size_t n, std::size_t dim, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<FeatureVector> out(n);
    for (auto& f : out) {
        f.values.resize(dim);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& x : f.values) {
                x = gauss(rng);
                norm += x * x;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (auto& x : f.values)
            x /= norm;
    }
    return out;
}

SimilarityMatrix random_scores(std::size_t n, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    SimilarityMatrix s(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            s.at(i, j) = uniform(rng);
    return s;
}

std::vector<std::vector<double>> as_grid(const SimilarityMatrix& s) {
    std::vector<std::vector<double>> grid(s.size(), std::vector<double>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            grid[i][j] = s.at(i, j);
    return grid;
}

double total_loss(const SimilarityMatrix& s, double tau) {
    return contrastive_loss_image_to_text(s, tau) + contrastive_loss_text_to_image(s, tau);
}

GroundTruth diagonal_truth(std::size_t n) {
    GroundTruth gt;
    for (std::size_t i = 0; i < n; ++i)
        gt.relevant.push_back({i});
    return gt;
}

} // namespace

TEST_CASE("orthonormal features produce the identity score matrix") {
    std::vector<FeatureVector> basis(4);
    for (std::size_t i = 0; i < 4; ++i) {
        basis[i].values.assign(4, 0.0);
        basis[i].values[i] = 1.0;
    }
    const auto s = mixed_similarity_matrix(basis, basis);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(s.at(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("a single pair yields a 1x1 matrix of their cosine") {
    const auto images = random_unit_vectors(1, 8, 3);
    const auto texts = random_unit_vectors(1, 8, 4);
    const auto s = mixed_similarity_matrix(images, texts);
    CHECK(s.size() == 1);
    CHECK(s.at(0, 0) ==
          doctest::Approx(testkit::oracle_cosine(texts[0].values, images[0].values))
              .epsilon(1e-12));
}

TEST_CASE("matrix entries match the per-pair cosine oracle") {
    const auto images = random_unit_vectors(3, 16, 5);
    const auto texts = random_unit_vectors(3, 16, 6);
    const auto s = mixed_similarity_matrix(images, texts);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(s.at(i, j) -
                           testkit::oracle_cosine(texts[i].values, images[j].values)) <= 1e-12);
}

TEST_CASE("mixed_similarity_matrix validates inputs") {
    const auto four = random_unit_vectors(4, 8, 7);
    const auto three = random_unit_vectors(3, 8, 8);
    const auto wrong_dim = random_unit_vectors(4, 6, 9);
    CHECK_THROWS_AS(mixed_similarity_matrix(four, three), std::invalid_argument);
    CHECK_THROWS_AS(mixed_similarity_matrix(four, wrong_dim), std::invalid_argument);
    CHECK_THROWS_AS(mixed_similarity_matrix({}, {}), std::invalid_argument);
}

TEST_CASE("dot-product scoring skips normalization") {
    std::vector<FeatureVector> images{{{2.0, 0.0}}};
    std::vector<FeatureVector> texts{{{3.0, 0.0}}};
    CHECK(mixed_similarity_matrix(images, texts, ScoreKind::dot).at(0, 0) == 6.0);
    CHECK(mixed_similarity_matrix(images, texts, ScoreKind::cosine).at(0, 0) == 1.0);
}

TEST_CASE("contrastive loss closed forms") {
    SUBCASE("N=1 is exactly zero") {
        SimilarityMatrix s(1);
        s.at(0, 0) = 0.37;
        CHECK(contrastive_loss_image_to_text(s, 0.07) == 0.0);
        CHECK(contrastive_loss_text_to_image(s, 0.07) == 0.0);
    }
    SUBCASE("N=2 identity at tau=1") {
        SimilarityMatrix s(2);
        s.at(0, 0) = 1.0;
        s.at(1, 1) = 1.0;
        const double expected = 2.0 * std::log1p(std::exp(-1.0)); // 2 * -log(e/(e+1))
        CHECK(expected == doctest::Approx(0.62652338).epsilon(1e-7));
        CHECK(contrastive_loss_image_to_text(s, 1.0) == doctest::Approx(expected).epsilon(1e-9));
        CHECK(contrastive_loss_text_to_image(s, 1.0) == doctest::Approx(expected).epsilon(1e-9));
    }
    SUBCASE("uniform scores give N*log(N) per direction") {
        for (std::size_t n : {2u, 4u, 7u}) {
            for (double c : {-0.3, 0.0, 0.7}) {
                SimilarityMatrix s(n, c);
                const double expected = static_cast<double>(n) * std::log(static_cast<double>(n));
                CHECK(contrastive_loss_image_to_text(s, 0.5) ==
                      doctest::Approx(expected).epsilon(1e-9));
                CHECK(contrastive_loss_text_to_image(s, 0.5) ==
                      doctest::Approx(expected).epsilon(1e-9));
            }
        }
    }
    SUBCASE("tau must be positive") {
        SimilarityMatrix s(2);
        CHECK_THROWS_AS(contrastive_loss_image_to_text(s, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(contrastive_loss_text_to_image(s, -1.0), std::invalid_argument);
        CHECK_THROWS_AS(contrastive_loss_gradient(s, 0.0), std::invalid_argument);
    }
}

TEST_CASE("symmetric matrices make both directions equal") {
    auto s = random_scores(5, 11);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j)
            s.at(j, i) = s.at(i, j);
    CHECK(contrastive_loss_image_to_text(s, 0.3) == contrastive_loss_text_to_image(s, 0.3));
}

TEST_CASE("transposition swaps the loss directions") {
    const auto s = random_scores(6, 13);
    SimilarityMatrix t(6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            t.at(i, j) = s.at(j, i);
    CHECK(contrastive_loss_text_to_image(t, 0.2) == contrastive_loss_image_to_text(s, 0.2));
    CHECK(contrastive_loss_image_to_text(t, 0.2) == contrastive_loss_text_to_image(s, 0.2));
}

TEST_CASE("losses match the naive oracle") {
    for (std::uint32_t seed : {21u, 22u, 23u}) {
        const auto s = random_scores(5, seed);
        const auto grid = as_grid(s);
        CHECK(contrastive_loss_image_to_text(s, 0.07) ==
              doctest::Approx(testkit::oracle_loss_image_to_text(grid, 0.07)).epsilon(1e-9));
        CHECK(contrastive_loss_text_to_image(s, 0.07) ==
              doctest::Approx(testkit::oracle_loss_text_to_image(grid, 0.07)).epsilon(1e-9));
    }
}

TEST_CASE("image->text probabilities sum to one") {
    const auto s = random_scores(7, 31);
    for (std::size_t image = 0; image < 7; ++image) {
        const auto p = image_to_text_probabilities(s, image, 0.07);
        const double sum = std::accumulate(p.begin(), p.end(), 0.0);
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("gradient closed form on uniform scores") {
    const std::size_t n = 5;
    const double tau = 0.5;
    SimilarityMatrix s(n, 0.25);
    const auto grad = contrastive_loss_gradient(s, tau);
    const double diag = -2.0 * (1.0 - 1.0 / static_cast<double>(n)) / tau;
    const double off = 2.0 / (static_cast<double>(n) * tau);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            CHECK(grad.at(i, j) == doctest::Approx(i == j ? diag : off).epsilon(1e-12));
}

TEST_CASE("gradient of a 1x1 matrix is zero") {
    SimilarityMatrix s(1);
    s.at(0, 0) = 0.9;
    CHECK(contrastive_loss_gradient(s, 0.07).at(0, 0) == 0.0);
}

TEST_CASE("analytic gradient matches central finite differences") {
    const double h = 1e-5;
    for (std::uint32_t seed : {41u, 42u}) {
        auto s = random_scores(4, seed);
        const double tau = seed % 2 == 0 ? 0.5 : 1.0;
        const auto grad = contrastive_loss_gradient(s, tau);
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                const double saved = s.at(i, j);
                s.at(i, j) = saved + h;
                const double plus = total_loss(s, tau);
                s.at(i, j) = saved - h;
                const double minus = total_loss(s, tau);
                s.at(i, j) = saved;
                CHECK(std::abs(grad.at(i, j) - (plus - minus) / (2.0 * h)) <= 1e-6);
            }
        }
    }
}

TEST_CASE("rank-k on a perfect diagonal is exactly 100") {
    SimilarityMatrix s(6);
    for (std::size_t i = 0; i < 6; ++i)
        s.at(i, i) = 1.0;
    CHECK(rank_k(s, diagonal_truth(6), 1) == 100.0);
    CHECK(rank_k(s, diagonal_truth(6), 5) == 100.0);
}

TEST_CASE("a relevant item at exactly rank K counts for rank-K only") {
    SimilarityMatrix s(5);
    // query 0: scores rank column 3 exactly third
    const double scores[5] = {0.9, 0.8, 0.7, 0.6, 0.5};
    for (std::size_t j = 0; j < 5; ++j)
        s.at(0, j) = scores[j];
    for (std::size_t q = 1; q < 5; ++q)
        s.at(q, q) = 2.0; // other queries trivially perfect
    GroundTruth gt = diagonal_truth(5);
    gt.relevant[0] = {2}; // ranked 3rd for query 0

    CHECK(rank_k(s, gt, 3) == 100.0);
    CHECK(rank_k(s, gt, 2) == doctest::Approx(80.0));
}

TEST_CASE("ranking ties break toward the lower column index") {
    SimilarityMatrix s(3);
    s.at(0, 0) = 0.5;
    s.at(0, 1) = 0.5; // tie with column 0
    s.at(0, 2) = 0.1;
    for (std::size_t q = 1; q < 3; ++q)
        s.at(q, q) = 1.0;

    GroundTruth gt = diagonal_truth(3);
    gt.relevant[0] = {1};
    // column 0 wins the tie, so the relevant column 1 is ranked second
    CHECK(rank_k(s, gt, 1) == doctest::Approx(100.0 * 2.0 / 3.0));
    CHECK(rank_k(s, gt, 2) == 100.0);
    const auto order = ranked_columns(s, 0);
    CHECK(order[0] == 0);
    CHECK(order[1] == 1);
}

TEST_CASE("metric arguments are validated") {
    SimilarityMatrix s(3);
    GroundTruth gt = diagonal_truth(3);
    CHECK_THROWS_AS(rank_k(s, gt, 0), std::invalid_argument);
    CHECK_THROWS_AS(rank_k(s, gt, 4), std::invalid_argument);
    gt.relevant[1].clear();
    CHECK_THROWS_AS(rank_k(s, gt, 1), std::invalid_argument);
    CHECK_THROWS_AS(mean_average_precision(s, gt), std::invalid_argument);
}

TEST_CASE("mean average precision hand example: relevant at ranks 1 and 3") {
    SimilarityMatrix s(3);
    s.at(0, 0) = 0.9; // rank 1, relevant
    s.at(0, 1) = 0.8; // rank 2
    s.at(0, 2) = 0.7; // rank 3, relevant
    for (std::size_t q = 1; q < 3; ++q)
        s.at(q, q) = 1.0;
    GroundTruth gt = diagonal_truth(3);
    gt.relevant[0] = {0, 2};

    // query 0 AP = (1/1 + 2/3)/2 = 0.8333...; others are 1.0
    SimilarityMatrix single(1);
    single.at(0, 0) = 1.0;
    const double map3 = mean_average_precision(s, gt);
    CHECK(map3 == doctest::Approx((5.0 / 6.0 + 2.0) / 3.0 * 100.0).epsilon(1e-12));

    // the single-query version shows the 83.33 figure directly
    SimilarityMatrix wide(3);
    wide.at(0, 0) = 0.9;
    wide.at(0, 1) = 0.8;
    wide.at(0, 2) = 0.7;
    wide.at(1, 1) = 0.9;
    wide.at(1, 0) = 0.95; // query 1: relevant item ranked 2nd -> AP 0.5
    wide.at(2, 2) = 1.0;
    GroundTruth gt2 = diagonal_truth(3);
    gt2.relevant[0] = {0, 2};
    const double ap0 = (1.0 / 1.0 + 2.0 / 3.0) / 2.0;
    CHECK(ap0 * 100.0 == doctest::Approx(83.33).epsilon(1e-4));
}

TEST_CASE("perfect rankings give exactly 100.0 mAP") {
    SimilarityMatrix s(4);
    for (std::size_t i = 0; i < 4; ++i)
        s.at(i, i) = 1.0;
    CHECK(mean_average_precision(s, diagonal_truth(4)) == 100.0);
}

TEST_CASE("metrics match the brute-force oracle on random instances") {
    std::mt19937 rng(77);
    std::uniform_int_distribution<std::size_t> size(2, 20);
    std::uniform_int_distribution<int> extra(0, 2);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = size(rng);
        const auto s = random_scores(n, static_cast<std::uint32_t>(1000 + trial));
        GroundTruth gt;
        std::vector<std::vector<std::size_t>> relevant;
        std::uniform_int_distribution<std::size_t> column(0, n - 1);
        for (std::size_t q = 0; q < n; ++q) {
            std::vector<std::size_t> set{column(rng)};
            for (int e = extra(rng); e > 0; --e) {
                const std::size_t c = column(rng);
                bool exists = false;
                for (std::size_t x : set)
                    exists = exists || x == c;
                if (!exists)
                    set.push_back(c);
            }
            relevant.push_back(set);
        }
        gt.relevant = relevant;

        const auto grid = as_grid(s);
        std::uniform_int_distribution<std::size_t> cutoff(1, n);
        const std::size_t k = cutoff(rng);
        CHECK(rank_k(s, gt, k) == doctest::Approx(testkit::oracle_rank_k(grid, relevant, k))
                                      .epsilon(1e-12));
        CHECK(mean_average_precision(s, gt) ==
              doctest::Approx(testkit::oracle_mean_average_precision(grid, relevant))
                  .epsilon(1e-12));
    }
}

TEST_CASE("losses and metrics are permutation equivariant") {
    const std::size_t n = 8;
    const auto s = random_scores(n, 501);
    GroundTruth gt;
    for (std::size_t q = 0; q < n; ++q)
        gt.relevant.push_back({q, (q + 3) % n});

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937 rng(502);
    std::shuffle(perm.begin(), perm.end(), rng);

    SimilarityMatrix permuted(n);
    GroundTruth permuted_gt;
    permuted_gt.relevant.resize(n);
    std::vector<std::size_t> inverse(n);
    for (std::size_t i = 0; i < n; ++i)
        inverse[perm[i]] = i;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            permuted.at(i, j) = s.at(perm[i], perm[j]);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t col : gt.relevant[perm[i]])
            permuted_gt.relevant[i].push_back(inverse[col]);
    }

    CHECK(contrastive_loss_image_to_text(permuted, 0.07) ==
          doctest::Approx(contrastive_loss_image_to_text(s, 0.07)).epsilon(1e-12));
    CHECK(contrastive_loss_text_to_image(permuted, 0.07) ==
          doctest::Approx(contrastive_loss_text_to_image(s, 0.07)).epsilon(1e-12));
    CHECK(rank_k(permuted, permuted_gt, 3) == doctest::Approx(rank_k(s, gt, 3)).epsilon(1e-12));
    CHECK(mean_average_precision(permuted, permuted_gt) ==
          doctest::Approx(mean_average_precision(s, gt)).epsilon(1e-12));
}

TEST_CASE("total loss is non-negative and shrinks with diagonal dominance") {
    auto s = random_scores(6, 601);
    CHECK(total_loss(s, 0.5) >= 0.0);

    SimilarityMatrix strong(6, -1.0);
    for (std::size_t i = 0; i < 6; ++i)
        strong.at(i, i) = 1.0;
    CHECK(total_loss(strong, 0.05) < total_loss(s, 0.05));
    CHECK(total_loss(strong, 0.05) >= 0.0);
}
