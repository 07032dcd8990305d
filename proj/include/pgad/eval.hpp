#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pgad {

struct Confusion {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Binary labels and predictions in {0,1}; class 1 is positive.
Confusion confusion(std::span<const int> labels, std::span<const int> predictions);

/// Matthews correlation; 0 when any marginal is empty.
double mcc(const Confusion& c);

/// P(score of a random positive > score of a random negative), ties count 1/2.
double auc(std::span<const int> labels, std::span<const double> scores);

/// (sensitivity, specificity); throws Error(Metric) when a class is absent.
std::pair<double, double> sen_spe(const Confusion& c);

struct MetricsRecord {
    int fold = 0;
    double mcc = 0.0;
    double auc = 0.0;
    double sen = 0.0;
    double spe = 0.0;
};

/// Scores are P(class 1); prediction is 1 when the score exceeds 0.5.
MetricsRecord evaluate_binary(std::span<const int> labels, std::span<const double> scores, int fold = 0);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double x, double a, double b);

/// CDF of Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

enum class TTestDegeneracy { None, NoEffect, PerfectSeparation };

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    int df = 0;
    TTestDegeneracy degeneracy = TTestDegeneracy::None;
};

/// Two-sided paired t-test on a - b with n - 1 degrees of freedom. Identical
/// differences are degenerate: all zero gives p = 1, otherwise the result is
/// flagged as perfect separation with p = 0 and t = +-inf.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

double bonferroni(double alpha, int comparisons);

struct ComparisonResult {
    std::string method_a;
    std::string method_b;
    std::string metric;
    double t_statistic = 0.0;
    double p_value = 1.0;
    bool significant = false;
    double alpha_corrected = 0.0;
    TTestDegeneracy degeneracy = TTestDegeneracy::None;
};

/// Mean and sample standard deviation (n - 1 denominator).
std::pair<double, double> mean_std(std::span<const double> values);

}  // namespace pgad
