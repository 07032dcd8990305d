#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgad/matrix.hpp"

namespace pgad {

struct PrototypeSet;

/// A scalar loss and its gradient with respect to the loss input.
struct LossValue {
    double value = 0.0;
    Matrix grad;
};

struct LossWeights {
    double tea = 1.0;
    double stu = 1.0;
    double kl = 0.5;
    double pair = 0.5;
    double proto = 0.5;

    void validate() const;
    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossTerms {
    double tea = 0.0;
    double stu = 0.0;
    double kl = 0.0;
    double pair = 0.0;
    double proto = 0.0;
};

struct LossReport {
    double l_tea = 0.0;
    double l_stu = 0.0;
    double l_kl = 0.0;
    double l_pair = 0.0;
    double l_proto = 0.0;
    double total = 0.0;
};

/// Mean softmax cross-entropy over rows; grad = (softmax - onehot) / N.
LossValue ce_loss(const Matrix& logits, std::span<const int> labels);

/// T^2 * mean_i KL(softmax(t_i / T) || softmax(s_i / T)). Teacher is constant;
/// the gradient is with respect to the student logits only.
LossValue kd_loss(const Matrix& student_logits, const Matrix& teacher_logits, double temperature);

/// Contrastive loss over a similarity matrix (anchors x candidates). Every
/// anchor row must appear in `positives` exactly once.
LossValue pair_loss(const Matrix& sim, std::span<const std::pair<std::size_t, std::size_t>> positives);

/// cos(h_a, h_b) / tau.
double similarity(std::span<const double> h_a, std::span<const double> h_b, double tau);

enum class ProtoAssignment { Nearest, TrueClass };

struct ProtoLossValue {
    double value = 0.0;
    Matrix grad;
    bool empty = false;          // no unpaired features: value 0, no gradient
    std::vector<int> assigned;   // prototype class used per row
};

/// (1/|U|) sum_i ||h_i - z*_i||^2 with z* the nearest non-stale prototype, or
/// the true-class prototype when requested (labels then required). The
/// assignment is held fixed in the gradient.
ProtoLossValue proto_loss(const Matrix& unpaired_feats, const PrototypeSet& prototypes,
                          ProtoAssignment assignment = ProtoAssignment::Nearest,
                          std::span<const int> labels = {});

/// Weighted sum; throws Error(Numeric) naming a non-finite term.
LossReport total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace pgad
