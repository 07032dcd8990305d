#include "pgad/prototypes.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "pgad/csv.hpp"
#include "pgad/error.hpp"

namespace pgad {

PrototypeSet PrototypeSet::empty(int num_classes, int dim) {
    PrototypeSet s;
    s.dim = dim;
    s.classes.assign(static_cast<std::size_t>(num_classes),
                     ClassPrototype{std::vector<double>(static_cast<std::size_t>(dim), 0.0), 0, true});
    return s;
}

std::size_t PrototypeSet::fresh_count() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.stale ? 0 : 1;
    return n;
}

PrototypeSet compute_batch_prototypes(const Matrix& fused_feats, std::span<const int> labels, int num_classes) {
    require(labels.size() == fused_feats.rows(), ErrorKind::Shape, "one label per fused feature row required");
    require(num_classes >= 1, ErrorKind::Range, "num_classes must be positive");
    auto out = PrototypeSet::empty(num_classes, static_cast<int>(fused_feats.cols()));
    for (std::size_t i = 0; i < fused_feats.rows(); ++i) {
        const int y = labels[i];
        require(y >= 0 && y < num_classes, ErrorKind::Label, "label " + std::to_string(y) + " out of range");
        auto& c = out.classes[static_cast<std::size_t>(y)];
        auto row = fused_feats.row(i);
        for (std::size_t k = 0; k < row.size(); ++k) c.z[k] += row[k];
        ++c.count;
    }
    for (auto& c : out.classes) {
        if (c.count == 0) continue;
        const double inv = 1.0 / static_cast<double>(c.count);
        for (auto& v : c.z) v *= inv;
        c.stale = false;
    }
    return out;
}

PrototypeSet update_running_prototypes(const PrototypeSet& running, const PrototypeSet& batch, double momentum) {
    require(running.dim == batch.dim && running.classes.size() == batch.classes.size(), ErrorKind::Shape,
            "prototype sets differ in shape");
    require(momentum >= 0.0 && momentum < 1.0, ErrorKind::Range, "prototype momentum must lie in [0,1)");
    PrototypeSet out = running;
    for (std::size_t c = 0; c < batch.classes.size(); ++c) {
        const auto& b = batch.classes[c];
        if (b.stale) continue;
        auto& r = out.classes[c];
        if (r.stale) {
            r.z = b.z;
        } else {
            for (std::size_t k = 0; k < r.z.size(); ++k) r.z[k] = momentum * r.z[k] + (1.0 - momentum) * b.z[k];
        }
        r.count += b.count;
        r.stale = false;
    }
    return out;
}

PrototypeSet merge_fallback(const PrototypeSet& batch, const PrototypeSet& fallback) {
    require(batch.dim == fallback.dim && batch.classes.size() == fallback.classes.size(), ErrorKind::Shape,
            "prototype sets differ in shape");
    PrototypeSet out = batch;
    for (std::size_t c = 0; c < out.classes.size(); ++c)
        if (out.classes[c].stale && !fallback.classes[c].stale) {
            out.classes[c].z = fallback.classes[c].z;
            out.classes[c].stale = false;
            // count stays 0: nothing from this batch stands behind it
        }
    return out;
}

std::pair<int, double> nearest_prototype(std::span<const double> feat, const PrototypeSet& protos) {
    require(feat.size() == static_cast<std::size_t>(protos.dim), ErrorKind::Shape,
            "feature dim " + std::to_string(feat.size()) + " != prototype dim " + std::to_string(protos.dim));
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < protos.classes.size(); ++c) {
        const auto& p = protos.classes[c];
        if (p.stale) continue;
        double d = 0.0;
        for (std::size_t k = 0; k < feat.size(); ++k) {
            const double diff = feat[k] - p.z[k];
            d += diff * diff;
        }
        if (d < best_d || best < 0) {
            best = static_cast<int>(c);
            best_d = d;
        }
    }
    require(best >= 0, ErrorKind::Protocol, "every prototype is stale");
    return {best, best_d};
}

void write_prototypes_header(std::ostream& os, int dim, bool with_epoch) {
    if (with_epoch) os << "epoch,";
    os << "class,count,stale";
    for (int k = 0; k < dim; ++k) os << ",z_" << k;
    os << '\n';
}

namespace {
void write_rows(std::ostream& os, const PrototypeSet& protos, const int* epoch) {
    for (std::size_t c = 0; c < protos.classes.size(); ++c) {
        const auto& p = protos.classes[c];
        if (epoch) os << *epoch << ',';
        os << c << ',' << p.count << ',' << (p.stale ? 1 : 0);
        if (p.stale) {
            for (int k = 0; k < protos.dim; ++k) os << ',';
        } else {
            for (double v : p.z) os << ',' << csv::format_double(v);
        }
        os << '\n';
    }
}
}  // namespace

void write_prototypes_csv(std::ostream& os, const PrototypeSet& protos) {
    write_prototypes_header(os, protos.dim, false);
    write_rows(os, protos, nullptr);
}

void append_prototypes_rows(std::ostream& os, const PrototypeSet& protos, int epoch) { write_rows(os, protos, &epoch); }

}  // namespace pgad
