#include "pgad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pgad/error.hpp"

namespace pgad {

Confusion confusion(std::span<const int> labels, std::span<const int> predictions) {
    require(labels.size() == predictions.size(), ErrorKind::Shape,
            "confusion: " + std::to_string(labels.size()) + " labels vs " + std::to_string(predictions.size()) +
                " predictions");
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require((labels[i] == 0 || labels[i] == 1) && (predictions[i] == 0 || predictions[i] == 1), ErrorKind::Label,
                "confusion expects binary labels and predictions");
        if (labels[i] == 1)
            (predictions[i] == 1 ? c.tp : c.fn)++;
        else
            (predictions[i] == 1 ? c.fp : c.tn)++;
    }
    return c;
}

double mcc(const Confusion& c) {
    require(c.tp >= 0 && c.fp >= 0 && c.tn >= 0 && c.fn >= 0, ErrorKind::Range, "negative confusion count");
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
    const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom == 0.0) return 0.0;
    return std::clamp((tp * tn - fp * fn) / std::sqrt(denom), -1.0, 1.0);
}

double auc(std::span<const int> labels, std::span<const double> scores) {
    require(labels.size() == scores.size(), ErrorKind::Shape, "auc: labels and scores differ in length");
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] < scores[y]; });
    // Midranks (1-based) over tie groups.
    double rank_sum_pos = 0.0;
    long n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            const int y = labels[order[k]];
            require(y == 0 || y == 1, ErrorKind::Label, "auc expects binary labels");
            if (y == 1) {
                rank_sum_pos += midrank;
                ++n_pos;
            } else {
                ++n_neg;
            }
        }
        i = j + 1;
    }
    require(n_pos > 0 && n_neg > 0, ErrorKind::Metric, "auc undefined: both classes must be present");
    const double np = static_cast<double>(n_pos);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

std::pair<double, double> sen_spe(const Confusion& c) {
    require(c.tp + c.fn > 0, ErrorKind::Metric, "sensitivity undefined: no positive samples");
    require(c.tn + c.fp > 0, ErrorKind::Metric, "specificity undefined: no negative samples");
    return {static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn),
            static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp)};
}

MetricsRecord evaluate_binary(std::span<const int> labels, std::span<const double> scores, int fold) {
    std::vector<int> pred(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > 0.5 ? 1 : 0;
    const auto c = confusion(labels, pred);
    const auto [sen, spe] = sen_spe(c);
    return MetricsRecord{fold, mcc(c), auc(labels, scores), sen, spe};
}

namespace {

// Continued fraction for I_x(a,b), modified Lentz.
double beta_cf(double x, double a, double b) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    fail(ErrorKind::Numeric, "incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
    require(a > 0.0 && b > 0.0, ErrorKind::Range, "incomplete beta needs a, b > 0");
    require(x >= 0.0 && x <= 1.0, ErrorKind::Range, "incomplete beta needs x in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    // Use the symmetry relation where the continued fraction converges fastest.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(x, a, b) / a;
    return 1.0 - front * beta_cf(1.0 - x, b, a) / b;
}

double student_t_cdf(double t, double df) {
    require(df > 0.0, ErrorKind::Range, "t distribution needs df > 0");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double x = df / (df + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(x, 0.5 * df, 0.5);
    return t > 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorKind::Shape, "paired t-test needs equal-length samples");
    require(a.size() >= 2, ErrorKind::Range, "paired t-test needs at least two pairs");
    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    TTestResult r;
    r.df = static_cast<int>(n - 1);
    if (std::all_of(d.begin(), d.end(), [&](double v) { return v == d.front(); })) {
        if (d.front() == 0.0) {
            r.degeneracy = TTestDegeneracy::NoEffect;
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.degeneracy = TTestDegeneracy::PerfectSeparation;
            r.t = d.front() > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            r.p = 0.0;
        }
        return r;
    }
    const auto [mean, sd] = mean_std(d);
    r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    // Two-sided tail, 2 * P(T > |t|) = I_{df/(df+t^2)}(df/2, 1/2).
    const double df = static_cast<double>(r.df);
    r.p = std::clamp(regularized_incomplete_beta(df / (df + r.t * r.t), 0.5 * df, 0.5), 0.0, 1.0);
    return r;
}

double bonferroni(double alpha, int comparisons) {
    require(comparisons >= 1, ErrorKind::Range, "bonferroni needs at least one comparison");
    require(alpha > 0.0 && alpha < 1.0, ErrorKind::Range, "alpha must lie in (0,1)");
    return alpha / static_cast<double>(comparisons);
}

std::pair<double, double> mean_std(std::span<const double> values) {
    require(!values.empty(), ErrorKind::Range, "mean of an empty sample");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

}  // namespace pgad
