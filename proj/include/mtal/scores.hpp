#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mtal/common.hpp"

namespace mtal {

constexpr double kProbSumTolerance = 1e-9;

// Per-token label distributions for one sentence: m token positions, s labels.
// Rows must already be normalized; out-of-tolerance rows are rejected rather
// than renormalized so upstream bugs surface here.
struct TokenProbMatrix {
    std::size_t tokens = 0;  // m
    std::size_t labels = 0;  // s
    std::vector<double> probs;  // row-major, tokens x labels

    double at(std::size_t token, std::size_t label) const { return probs[token * labels + label]; }

    void validate() const {
        require(tokens >= 1, "TokenProbMatrix: need at least one token");
        require(labels >= 2, "TokenProbMatrix: need at least two labels");
        require(probs.size() == tokens * labels, "TokenProbMatrix: size mismatch");
        for (std::size_t i = 0; i < tokens; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < labels; ++j) {
                const double p = at(i, j);
                require(p >= 0.0 && p <= 1.0, "TokenProbMatrix: probability outside [0,1]");
                sum += p;
            }
            require(std::abs(sum - 1.0) <= kProbSumTolerance,
                    "TokenProbMatrix: row " + std::to_string(i) + " does not sum to 1");
        }
    }
};

// Class distribution for one sentence-level prediction.
struct SentenceProbVector {
    std::vector<double> probs;

    void validate() const {
        require(probs.size() >= 2, "SentenceProbVector: need at least two labels");
        double sum = 0.0;
        for (double p : probs) {
            require(p >= 0.0 && p <= 1.0, "SentenceProbVector: probability outside [0,1]");
            sum += p;
        }
        require(std::abs(sum - 1.0) <= kProbSumTolerance, "SentenceProbVector: does not sum to 1");
    }
};

// Predicted label ids from k stochastic forward passes over the same m
// positions. Sentence-level tasks use m=1.
struct PredictionEnsemble {
    std::vector<std::vector<int>> passes;  // k rows, each of length m

    std::size_t members() const { return passes.size(); }

    void validate() const {
        require(passes.size() >= 2, "PredictionEnsemble: need k >= 2 passes");
        const std::size_t m = passes.front().size();
        require(m >= 1, "PredictionEnsemble: need at least one position");
        for (const auto& row : passes)
            require(row.size() == m, "PredictionEnsemble: pass length mismatch");
    }
};

struct CalibrationSample {
    double conf = 0.0;
    double acc = 0.0;
};

namespace detail {

inline double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }  // 0 log 0 := 0

} // namespace detail

// 1 - E(x) with E(x) the length- and label-normalized sentence entropy:
// E(x) = -(1 / (m log s)) sum_i sum_j p(y_j|x_i) log p(y_j|x_i).
inline double token_entropy_confidence(const TokenProbMatrix& probs) {
    probs.validate();
    double acc = 0.0;
    for (double p : probs.probs) acc += detail::plogp(p);
    const double entropy = -acc / (static_cast<double>(probs.tokens) * std::log(static_cast<double>(probs.labels)));
    return 1.0 - entropy;
}

// 1 - H(p) / log s for a single sentence-level distribution.
inline double sentence_entropy_confidence(const SentenceProbVector& probs) {
    probs.validate();
    double acc = 0.0;
    for (double p : probs.probs) acc += detail::plogp(p);
    return 1.0 - (-acc) / std::log(static_cast<double>(probs.probs.size()));
}

// Average token-level agreement over ordered pass pairs:
// (1 / (m k (k-1))) sum_{j != j'} sum_i 1{y_i^j == y_i^j'}.
inline double dropout_agreement(const PredictionEnsemble& ens) {
    ens.validate();
    const std::size_t k = ens.passes.size();
    const std::size_t m = ens.passes.front().size();
    std::size_t agree = 0;
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t j2 = j + 1; j2 < k; ++j2)
            for (std::size_t i = 0; i < m; ++i)
                if (ens.passes[j][i] == ens.passes[j2][i]) ++agree;
    // Unordered pairs counted once above; the definition sums ordered pairs.
    return 2.0 * static_cast<double>(agree) /
           (static_cast<double>(m) * static_cast<double>(k) * static_cast<double>(k - 1));
}

// Label-smoothed target distribution: gold gets (1-alpha) + alpha/s, every
// label gets alpha/s.
inline std::vector<double> label_smoothing_targets(std::size_t gold, std::size_t labels, double alpha) {
    require(labels >= 2, "label_smoothing_targets: need at least two labels");
    require(gold < labels, "label_smoothing_targets: gold index out of range");
    require(alpha >= 0.0 && alpha < 1.0, "label_smoothing_targets: alpha outside [0,1)");
    std::vector<double> target(labels, alpha / static_cast<double>(labels));
    target[gold] += 1.0 - alpha;
    return target;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
    const double zmax = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out[j] = std::exp(logits[j] - zmax);
        sum += out[j];
    }
    for (double& v : out) v /= sum;
    return out;
}

inline std::vector<double> softmax_with_temperature(const std::vector<double>& logits, double temperature) {
    require(temperature > 0.0, "softmax_with_temperature: T must be positive");
    std::vector<double> scaled(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) scaled[j] = logits[j] / temperature;
    return softmax(scaled);
}

// Log-spaced candidate temperatures, default [0.05, 20] with 200 points.
inline std::vector<double> default_temperature_grid(double lo = 0.05, double hi = 20.0, std::size_t points = 200) {
    require(lo > 0.0 && hi > lo && points >= 2, "default_temperature_grid: bad range");
    std::vector<double> grid(points);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (std::size_t i = 0; i < points; ++i)
        grid[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) / static_cast<double>(points - 1));
    return grid;
}

struct TemperatureFit {
    double temperature = 1.0;
    std::vector<std::vector<double>> probs;  // softmax(logits / T) per row
};

// Grid search for the temperature minimizing mean NLL of the gold labels.
// Ties go to the candidate closest to T=1, then to the smaller T.
inline TemperatureFit fit_and_apply_temperature(const std::vector<std::vector<double>>& logit_rows,
                                                const std::vector<std::size_t>& gold_labels,
                                                const std::vector<double>& grid = default_temperature_grid()) {
    require(!logit_rows.empty(), "fit_and_apply_temperature: empty input");
    require(logit_rows.size() == gold_labels.size(), "fit_and_apply_temperature: rows/labels mismatch");
    require(!grid.empty(), "fit_and_apply_temperature: empty grid");
    for (std::size_t r = 0; r < logit_rows.size(); ++r) {
        require(logit_rows[r].size() >= 2, "fit_and_apply_temperature: row needs >= 2 logits");
        require(gold_labels[r] < logit_rows[r].size(), "fit_and_apply_temperature: gold out of range");
    }
    for (double t : grid) require(t > 0.0, "fit_and_apply_temperature: grid T must be positive");

    double best_t = grid.front();
    double best_nll = std::numeric_limits<double>::infinity();
    for (double t : grid) {
        double nll = 0.0;
        for (std::size_t r = 0; r < logit_rows.size(); ++r) {
            const auto p = softmax_with_temperature(logit_rows[r], t);
            nll -= std::log(std::max(p[gold_labels[r]], 1e-300));
        }
        nll /= static_cast<double>(logit_rows.size());
        if (nll < best_nll) {
            best_nll = nll;
            best_t = t;
        } else if (nll == best_nll) {
            const double cur = std::abs(std::log(t)), best = std::abs(std::log(best_t));
            if (cur < best || (cur == best && t < best_t)) best_t = t;
        }
    }

    TemperatureFit fit;
    fit.temperature = best_t;
    fit.probs.reserve(logit_rows.size());
    for (const auto& row : logit_rows) fit.probs.push_back(softmax_with_temperature(row, best_t));
    return fit;
}

// OE = (1/N) sum conf(x) * max(conf(x) - acc(x), 0).
inline double overconfidence_error(const std::vector<CalibrationSample>& samples) {
    require(!samples.empty(), "overconfidence_error: empty sample list");
    double acc = 0.0;
    for (const auto& s : samples) {
        require(s.conf >= 0.0 && s.conf <= 1.0, "overconfidence_error: conf outside [0,1]");
        require(s.acc >= 0.0 && s.acc <= 1.0, "overconfidence_error: acc outside [0,1]");
        acc += s.conf * std::max(s.conf - s.acc, 0.0);
    }
    return acc / static_cast<double>(samples.size());
}

// Fraction of positions where the prediction matches gold.
inline double sentence_accuracy(const std::vector<int>& pred, const std::vector<int>& gold) {
    require(pred.size() == gold.size(), "sentence_accuracy: length mismatch");
    require(!pred.empty(), "sentence_accuracy: empty sequences");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == gold[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

} // namespace mtal
