#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace pgad {

enum class AmsMode { None, Fixed, Dynamic };

std::string_view to_string(AmsMode m);
AmsMode ams_mode_from_string(std::string_view name);

/// Learnable scalar behind the genuine-pair share of each batch.
struct AmsState {
    double theta = 0.0;
    AmsMode mode = AmsMode::Dynamic;
    double fixed_ratio = 0.5;
};

double sigmoid(double x);

/// Dynamic: sigmoid(theta). Fixed: fixed_ratio. None: 1 (the teacher only ever
/// sees genuine pairs).
double sampling_ratio(const AmsState& state);

struct PoolEntry {
    std::int64_t id = 0;
    int label = 0;
};

struct PseudoPair {
    std::int64_t mri_id = 0;
    std::int64_t donor_id = 0;
    int label = 0;
};

struct BatchPlan {
    std::vector<std::int64_t> genuine;
    std::vector<PseudoPair> pseudo;
    /// Unpaired modality-A samples in this batch; the student routes them to
    /// prototype matching.
    std::vector<std::int64_t> unpaired_student_only;
    std::size_t requested = 0;
    /// Slots the pools could not fill. Never padded.
    std::size_t shortfall = 0;

    std::size_t size() const { return genuine.size() + unpaired_student_only.size(); }
};

/// ceil(r*B) genuine pairs (capped by the pool), the rest pseudo-pairs made of
/// an unpaired modality-A sample and a same-class modality-B donor from the
/// paired pool. Donors are drawn without replacement inside a batch and only
/// recycled when a class runs out.
BatchPlan build_batch(std::span<const PoolEntry> paired_pool, std::span<const PoolEntry> unpaired_pool,
                      std::size_t batch_size, double ratio, std::uint64_t seed);

/// No-sampling-strategy batch: B samples drawn uniformly from both pools
/// together. Paired ones are genuine; unpaired ones go to the student only.
BatchPlan build_uniform_batch(std::span<const PoolEntry> paired_pool, std::span<const PoolEntry> unpaired_pool,
                              std::size_t batch_size, std::uint64_t seed);

/// d/dtheta of r*loss_paired + (1-r)*loss_pseudo with r = sigmoid(theta).
double theta_gradient(const AmsState& state, double loss_paired, double loss_pseudo);

// CSV: epoch,theta,ratio
void write_ams_trace_header(std::ostream& os);
void append_ams_trace_row(std::ostream& os, int epoch, const AmsState& state);

}  // namespace pgad
