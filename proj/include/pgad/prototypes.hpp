#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "pgad/matrix.hpp"

namespace pgad {

struct ClassPrototype {
    std::vector<double> z;
    long count = 0;     // samples behind z
    bool stale = true;  // no usable value for this class
};

/// Per-class mean teacher fused features. Immutable by convention: updates
/// build a new set.
struct PrototypeSet {
    int dim = 0;
    std::vector<ClassPrototype> classes;

    static PrototypeSet empty(int num_classes, int dim);
    std::size_t fresh_count() const;
};

/// Mean fused feature per class over the rows given; classes with no row are
/// stale with count 0.
PrototypeSet compute_batch_prototypes(const Matrix& fused_feats, std::span<const int> labels, int num_classes);

/// z <- m * z_running + (1 - m) * z_batch for classes present in the batch. A
/// class the running set has never seen takes the batch value as is. Classes
/// absent from the batch keep their running value.
PrototypeSet update_running_prototypes(const PrototypeSet& running, const PrototypeSet& batch, double momentum);

/// Batch prototypes with stale classes filled from `fallback` where it has them.
PrototypeSet merge_fallback(const PrototypeSet& batch, const PrototypeSet& fallback);

/// (class, squared distance) of the closest non-stale prototype; ties go to the
/// lowest class index.
std::pair<int, double> nearest_prototype(std::span<const double> feat, const PrototypeSet& protos);

// CSV: class,count,stale,z_0..z_{H-1}. The epoch variant prefixes an epoch
// column so a whole run's snapshots share one file.
void write_prototypes_csv(std::ostream& os, const PrototypeSet& protos);
void write_prototypes_header(std::ostream& os, int dim, bool with_epoch);
void append_prototypes_rows(std::ostream& os, const PrototypeSet& protos, int epoch);

}  // namespace pgad
