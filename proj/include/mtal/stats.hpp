#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mtal/common.hpp"

namespace mtal {

// Micro-averaged F1 over non-null (nonzero) labels. A position predicted and
// gold-labeled with different non-null classes counts as both FP and FN.
// Degenerate all-null case (no TP/FP/FN at all) scores 1.
inline double micro_f1_nonnull(const std::vector<int>& pred, const std::vector<int>& gold) {
    require(pred.size() == gold.size(), "micro_f1_nonnull: length mismatch");
    require(!pred.empty(), "micro_f1_nonnull: empty input");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] != 0 && pred[i] == gold[i]) ++tp;
        if (pred[i] != 0 && pred[i] != gold[i]) ++fp;
        if (gold[i] != 0 && pred[i] != gold[i]) ++fn;
    }
    if (tp + fp + fn == 0) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

inline double geometric_mean(const std::vector<double>& values) {
    require(!values.empty(), "geometric_mean: empty input");
    double prod = 1.0;
    for (double v : values) {
        require(v >= 0.0, "geometric_mean: negative value");
        prod *= v;
    }
    return std::pow(prod, 1.0 / static_cast<double>(values.size()));
}

namespace detail {

// Regularized incomplete beta by Lentz's continued fraction.
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const bool swap = x > (a + 1.0) / (a + b + 2.0);
    if (swap) return 1.0 - incomplete_beta(b, a, 1.0 - x);

    const double tiny = 1e-300;
    double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double f = d;
    for (int m = 1; m <= 300; ++m) {
        const double dm = static_cast<double>(m);
        double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        f *= c * d;

        num = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-12) break;
    }
    return std::exp(ln_front) * f / a;
}

} // namespace detail

// Two-sided p-value for Student's t with nu degrees of freedom.
inline double student_t_two_sided_p(double t, double nu) {
    require(nu >= 1.0, "student_t_two_sided_p: need nu >= 1");
    const double x = nu / (nu + t * t);
    return detail::incomplete_beta(nu / 2.0, 0.5, x);
}

struct PairedTResult {
    double t = 0.0;
    double p = 1.0;
};

// Paired two-sided t-test on per-seed score pairs. Zero-variance differences
// degenerate to p = 0 for a nonzero mean shift and p = 1 otherwise.
inline PairedTResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size(), "paired_t_test: unequal sample sizes");
    require(a.size() >= 2, "paired_t_test: need at least two pairs");
    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i] - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    PairedTResult res;
    if (var == 0.0) {
        res.t = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        res.p = mean == 0.0 ? 1.0 : 0.0;
        return res;
    }
    res.t = mean / std::sqrt(var / static_cast<double>(n));
    res.p = student_t_two_sided_p(res.t, static_cast<double>(n - 1));
    return res;
}

} // namespace mtal
