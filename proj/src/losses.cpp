#include "pgad/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pgad/error.hpp"
#include "pgad/prototypes.hpp"

namespace pgad {

namespace {

// log-softmax of one row, max-shifted.
void log_softmax(std::span<const double> z, double scale, std::span<double> out) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : z) m = std::max(m, v * scale);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v * scale - m);
    const double lse = m + std::log(sum);
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * scale - lse;
}

}  // namespace

void LossWeights::validate() const {
    const std::pair<const char*, double> all[] = {
        {"tea", tea}, {"stu", stu}, {"kl", kl}, {"pair", pair}, {"proto", proto}};
    for (const auto& [name, w] : all)
        require(std::isfinite(w) && w >= 0.0, ErrorKind::Config,
                std::string("loss weight ") + name + " must be a nonnegative real");
}

LossValue ce_loss(const Matrix& logits, std::span<const int> labels) {
    require(logits.rows() > 0, ErrorKind::EmptyBatch, "cross-entropy on an empty batch");
    require(labels.size() == logits.rows(), ErrorKind::Shape,
            "cross-entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(logits.rows()) +
                " rows");
    const std::size_t n = logits.rows(), c = logits.cols();
    LossValue out{0.0, Matrix(n, c)};
    std::vector<double> lp(c);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        require(y >= 0 && static_cast<std::size_t>(y) < c, ErrorKind::Label,
                "label " + std::to_string(y) + " outside [0," + std::to_string(c) + ")");
        log_softmax(logits.row(i), 1.0, lp);
        out.value -= lp[static_cast<std::size_t>(y)];
        for (std::size_t k = 0; k < c; ++k)
            out.grad(i, k) = (std::exp(lp[k]) - (k == static_cast<std::size_t>(y) ? 1.0 : 0.0)) * inv_n;
    }
    out.value *= inv_n;
    return out;
}

LossValue kd_loss(const Matrix& student_logits, const Matrix& teacher_logits, double temperature) {
    require(student_logits.rows() == teacher_logits.rows() && student_logits.cols() == teacher_logits.cols(),
            ErrorKind::Shape,
            "distillation shapes differ: student " + std::to_string(student_logits.rows()) + "x" +
                std::to_string(student_logits.cols()) + ", teacher " + std::to_string(teacher_logits.rows()) + "x" +
                std::to_string(teacher_logits.cols()));
    require(temperature > 0.0, ErrorKind::Range, "distillation temperature must be positive");
    const std::size_t n = student_logits.rows(), c = student_logits.cols();
    LossValue out{0.0, Matrix(n, c)};
    if (n == 0) return out;
    const double inv_t = 1.0 / temperature;
    const double scale = temperature * temperature / static_cast<double>(n);
    std::vector<double> ls(c), lt(c);
    for (std::size_t i = 0; i < n; ++i) {
        log_softmax(student_logits.row(i), inv_t, ls);
        log_softmax(teacher_logits.row(i), inv_t, lt);
        double kl = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            const double pt = std::exp(lt[k]);
            if (pt > 0.0) kl += pt * (lt[k] - ls[k]);
            // d/ds_k of T^2 * KL = T * (p_s - p_t)
            out.grad(i, k) = scale * inv_t * (std::exp(ls[k]) - pt);
        }
        out.value += std::max(kl, 0.0);
    }
    out.value *= scale;
    return out;
}

LossValue pair_loss(const Matrix& sim, std::span<const std::pair<std::size_t, std::size_t>> positives) {
    const std::size_t rows = sim.rows(), cols = sim.cols();
    std::vector<std::size_t> positive_of(rows, cols);
    for (const auto& [i, j] : positives) {
        require(i < rows && j < cols, ErrorKind::Range,
                "positive (" + std::to_string(i) + "," + std::to_string(j) + ") outside similarity matrix");
        require(positive_of[i] == cols, ErrorKind::Protocol, "anchor row " + std::to_string(i) + " has two positives");
        positive_of[i] = j;
    }
    for (std::size_t i = 0; i < rows; ++i)
        require(positive_of[i] != cols, ErrorKind::Protocol, "anchor row " + std::to_string(i) + " has no positive");
    LossValue out{0.0, Matrix(rows, cols)};
    if (rows == 0) return out;
    const double inv_p = 1.0 / static_cast<double>(rows);
    std::vector<double> lp(cols);
    for (std::size_t i = 0; i < rows; ++i) {
        log_softmax(sim.row(i), 1.0, lp);
        out.value -= lp[positive_of[i]];
        for (std::size_t k = 0; k < cols; ++k)
            out.grad(i, k) = (std::exp(lp[k]) - (k == positive_of[i] ? 1.0 : 0.0)) * inv_p;
    }
    out.value = std::max(out.value * inv_p, 0.0);
    return out;
}

double similarity(std::span<const double> h_a, std::span<const double> h_b, double tau) {
    require(h_a.size() == h_b.size(), ErrorKind::Shape,
            "similarity dims differ: " + std::to_string(h_a.size()) + " vs " + std::to_string(h_b.size()));
    require(tau > 0.0, ErrorKind::Range, "similarity temperature must be positive");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < h_a.size(); ++k) {
        dot += h_a[k] * h_b[k];
        na += h_a[k] * h_a[k];
        nb += h_b[k] * h_b[k];
    }
    require(na > 0.0 && nb > 0.0, ErrorKind::Numeric, "degenerate input: zero vector in cosine similarity");
    return dot / (std::sqrt(na) * std::sqrt(nb)) / tau;
}

ProtoLossValue proto_loss(const Matrix& unpaired_feats, const PrototypeSet& prototypes, ProtoAssignment assignment,
                          std::span<const int> labels) {
    require(!prototypes.classes.empty(), ErrorKind::Protocol, "prototype loss with an empty prototype set");
    ProtoLossValue out;
    if (unpaired_feats.rows() == 0) {
        out.empty = true;
        return out;
    }
    require(unpaired_feats.cols() == static_cast<std::size_t>(prototypes.dim), ErrorKind::Shape,
            "feature dim " + std::to_string(unpaired_feats.cols()) + " != prototype dim " +
                std::to_string(prototypes.dim));
    if (assignment == ProtoAssignment::TrueClass)
        require(labels.size() == unpaired_feats.rows(), ErrorKind::Shape, "true-class assignment needs one label per row");
    const std::size_t n = unpaired_feats.rows(), h = unpaired_feats.cols();
    out.grad = Matrix(n, h);
    out.assigned.resize(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        int c = 0;
        if (assignment == ProtoAssignment::Nearest) {
            c = nearest_prototype(unpaired_feats.row(i), prototypes).first;
        } else {
            c = labels[i];
            require(c >= 0 && static_cast<std::size_t>(c) < prototypes.classes.size() &&
                        !prototypes.classes[static_cast<std::size_t>(c)].stale,
                    ErrorKind::Protocol, "no usable prototype for class " + std::to_string(c));
        }
        out.assigned[i] = c;
        const auto& z = prototypes.classes[static_cast<std::size_t>(c)].z;
        double d2 = 0.0;
        for (std::size_t k = 0; k < h; ++k) {
            const double diff = unpaired_feats(i, k) - z[k];
            d2 += diff * diff;
            out.grad(i, k) = 2.0 * diff * inv_n;
        }
        out.value += d2;
    }
    out.value *= inv_n;
    return out;
}

LossReport total_loss(const LossTerms& t, const LossWeights& w) {
    const std::pair<const char*, double> terms[] = {
        {"l_tea", t.tea}, {"l_stu", t.stu}, {"l_kl", t.kl}, {"l_pair", t.pair}, {"l_proto", t.proto}};
    for (const auto& [name, v] : terms)
        require(std::isfinite(v), ErrorKind::Numeric, std::string("non-finite loss term ") + name);
    LossReport r;
    r.l_tea = t.tea;
    r.l_stu = t.stu;
    r.l_kl = t.kl;
    r.l_pair = t.pair;
    r.l_proto = t.proto;
    r.total = w.tea * t.tea + w.stu * t.stu + w.kl * t.kl + w.pair * t.pair + w.proto * t.proto;
    return r;
}

}  // namespace pgad
