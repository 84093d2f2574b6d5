#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mtal/rng.hpp"
#include "mtal/scores.hpp"

using namespace mtal;

namespace {

TokenProbMatrix make_matrix(std::size_t m, std::size_t s, std::vector<double> probs) {
    TokenProbMatrix mat;
    mat.tokens = m;
    mat.labels = s;
    mat.probs = std::move(probs);
    return mat;
}

} // namespace

TEST_CASE("token entropy confidence hits exact endpoints") {
    // uniform rows: entropy is maximal, confidence 0
    auto uniform = make_matrix(3, 4, std::vector<double>(12, 0.25));
    REQUIRE(std::abs(token_entropy_confidence(uniform)) < 1e-12);

    // one-hot rows: entropy 0, confidence 1
    auto onehot = make_matrix(2, 3, {1, 0, 0, 0, 0, 1});
    REQUIRE(std::abs(token_entropy_confidence(onehot) - 1.0) < 1e-12);
}

TEST_CASE("token entropy confidence averages per-token entropies") {
    // row 1 at full entropy, row 2 at zero entropy: confidence 0.5
    auto mat = make_matrix(2, 2, {0.5, 0.5, 1.0, 0.0});
    REQUIRE(token_entropy_confidence(mat) == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("sentence entropy confidence matches reference value") {
    SentenceProbVector v{{0.75, 0.25}};
    REQUIRE(sentence_entropy_confidence(v) == Catch::Approx(0.18872187554086717).margin(1e-12));
}

TEST_CASE("probability rows outside tolerance are rejected") {
    auto bad_sum = make_matrix(1, 2, {0.6, 0.4 + 1e-6});
    REQUIRE_THROWS_AS(token_entropy_confidence(bad_sum), validation_error);

    auto near_sum = make_matrix(1, 2, {0.6, 0.4 + 5e-10});
    REQUIRE_NOTHROW(token_entropy_confidence(near_sum));

    auto negative = make_matrix(1, 2, {1.1, -0.1});
    REQUIRE_THROWS_AS(token_entropy_confidence(negative), validation_error);

    auto single_label = make_matrix(1, 1, {1.0});
    REQUIRE_THROWS_AS(token_entropy_confidence(single_label), validation_error);

    SentenceProbVector bad{{0.7, 0.2}};
    REQUIRE_THROWS_AS(sentence_entropy_confidence(bad), validation_error);
}

TEST_CASE("confidence stays within [0,1] on random distributions") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 1 + rng.next_below(4);
        const std::size_t s = 2 + rng.next_below(5);
        std::vector<double> probs(m * s);
        for (std::size_t i = 0; i < m; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < s; ++j) {
                probs[i * s + j] = -std::log(1.0 - rng.next_unit());
                sum += probs[i * s + j];
            }
            for (std::size_t j = 0; j < s; ++j) probs[i * s + j] /= sum;
        }
        const double c = token_entropy_confidence(make_matrix(m, s, probs));
        REQUIRE(c >= -1e-9);
        REQUIRE(c <= 1.0 + 1e-9);
    }
}

TEST_CASE("dropout agreement counts matching positions over pass pairs") {
    PredictionEnsemble identical{{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}};
    REQUIRE(dropout_agreement(identical) == Catch::Approx(1.0).margin(1e-12));

    PredictionEnsemble disjoint{{{0}, {1}}};
    REQUIRE(dropout_agreement(disjoint) == Catch::Approx(0.0).margin(1e-12));

    // pairs (a,b) agree at one position, (a,c) at one, (b,c) at none: 4/12 ordered
    PredictionEnsemble mixed{{{0, 1}, {0, 2}, {1, 1}}};
    REQUIRE(dropout_agreement(mixed) == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("dropout agreement validates ensemble shape") {
    PredictionEnsemble one_pass{{{1, 2}}};
    REQUIRE_THROWS_AS(dropout_agreement(one_pass), validation_error);

    PredictionEnsemble ragged{{{1, 2}, {1}}};
    REQUIRE_THROWS_AS(dropout_agreement(ragged), validation_error);
}

TEST_CASE("label smoothing spreads alpha uniformly") {
    auto two = label_smoothing_targets(0, 2, 0.2);
    REQUIRE(two[0] == Catch::Approx(0.9).margin(1e-12));
    REQUIRE(two[1] == Catch::Approx(0.1).margin(1e-12));

    auto four = label_smoothing_targets(2, 4, 0.2);
    REQUIRE(four[0] == Catch::Approx(0.05).margin(1e-12));
    REQUIRE(four[1] == Catch::Approx(0.05).margin(1e-12));
    REQUIRE(four[2] == Catch::Approx(0.85).margin(1e-12));
    REQUIRE(four[3] == Catch::Approx(0.05).margin(1e-12));

    auto hard = label_smoothing_targets(1, 3, 0.0);
    REQUIRE(hard[1] == Catch::Approx(1.0).margin(1e-12));

    REQUIRE_THROWS_AS(label_smoothing_targets(0, 2, 1.0), validation_error);
    REQUIRE_THROWS_AS(label_smoothing_targets(2, 2, 0.2), validation_error);
}

TEST_CASE("temperature grid is log spaced over the documented range") {
    auto grid = default_temperature_grid();
    REQUIRE(grid.size() == 200);
    REQUIRE(grid.front() == Catch::Approx(0.05).margin(1e-12));
    REQUIRE(grid.back() == Catch::Approx(20.0).margin(1e-12));
    for (std::size_t i = 1; i < grid.size(); ++i) REQUIRE(grid[i] > grid[i - 1]);
    // log spacing: constant ratio between neighbours
    const double r0 = grid[1] / grid[0];
    const double r1 = grid[101] / grid[100];
    REQUIRE(r0 == Catch::Approx(r1).margin(1e-9));
}

TEST_CASE("temperature division produces the expected flattening") {
    // logits (2 ln 4, 0) at T=2 give exactly [0.8, 0.2]
    const std::vector<double> logits{2.0 * std::log(4.0), 0.0};
    auto p = softmax_with_temperature(logits, 2.0);
    REQUIRE(p[0] == Catch::Approx(0.8).margin(1e-12));
    REQUIRE(p[1] == Catch::Approx(0.2).margin(1e-12));
}

TEST_CASE("temperature fit sharpens when gold matches the argmax") {
    std::vector<std::vector<double>> rows{{2.0, 0.0}, {1.5, 0.0}, {3.0, 0.0}};
    std::vector<std::size_t> gold{0, 0, 0};
    auto fit = fit_and_apply_temperature(rows, gold);
    REQUIRE(fit.temperature == Catch::Approx(0.05).margin(1e-12));
}

TEST_CASE("temperature fit flattens when gold never matches the argmax") {
    std::vector<std::vector<double>> rows{{2.0, 0.0}, {1.5, 0.0}};
    std::vector<std::size_t> gold{1, 1};
    auto fit = fit_and_apply_temperature(rows, gold);
    REQUIRE(fit.temperature == Catch::Approx(20.0).margin(1e-12));
}

TEST_CASE("temperature ties resolve toward one, then downward") {
    // flat logits make every temperature equivalent
    std::vector<std::vector<double>> rows{{0.0, 0.0}};
    std::vector<std::size_t> gold{0};

    auto toward_one = fit_and_apply_temperature(rows, gold, {0.5, 1.0, 2.0});
    REQUIRE(toward_one.temperature == Catch::Approx(1.0).margin(1e-12));

    auto equidistant = fit_and_apply_temperature(rows, gold, {0.5, 2.0});
    REQUIRE(equidistant.temperature == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("temperature scaling preserves the argmax") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t s = 2 + rng.next_below(5);
        std::vector<double> logits(s);
        for (double& z : logits) z = rng.next_uniform(-4.0, 4.0);
        const auto argmax = static_cast<std::size_t>(
            std::max_element(logits.begin(), logits.end()) - logits.begin());
        std::vector<std::size_t> gold{rng.next_below(s)};
        auto fit = fit_and_apply_temperature({logits}, gold);
        const auto& p = fit.probs[0];
        const auto pmax = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        REQUIRE(pmax == argmax);
    }
}

TEST_CASE("overconfidence error penalizes only the overconfident side") {
    std::vector<CalibrationSample> one{{1.0, 0.5}};
    REQUIRE(overconfidence_error(one) == Catch::Approx(0.5).margin(1e-12));

    std::vector<CalibrationSample> two{{0.8, 0.6}, {0.4, 0.9}};
    REQUIRE(overconfidence_error(two) == Catch::Approx(0.08).margin(1e-12));

    std::vector<CalibrationSample> under{{0.3, 0.9}, {0.1, 0.5}};
    REQUIRE(overconfidence_error(under) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("sentence accuracy is the fraction of matching positions") {
    REQUIRE(sentence_accuracy({1, 2, 3}, {1, 0, 3}) == Catch::Approx(2.0 / 3.0).margin(1e-12));
    REQUIRE(sentence_accuracy({5}, {5}) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE_THROWS_AS(sentence_accuracy({1}, {1, 2}), validation_error);
}
