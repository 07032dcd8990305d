#include "pgad/ams.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <unordered_set>

#include "pgad/csv.hpp"
#include "pgad/error.hpp"
#include "pgad/rng.hpp"

namespace pgad {

namespace {

void check_disjoint(std::span<const PoolEntry> paired, std::span<const PoolEntry> unpaired) {
    std::unordered_set<std::int64_t> ids;
    for (const auto& e : paired) ids.insert(e.id);
    for (const auto& e : unpaired)
        require(!ids.contains(e.id), ErrorKind::Protocol,
                "sample " + std::to_string(e.id) + " is in both the paired and unpaired pools");
}

}  // namespace

std::string_view to_string(AmsMode m) {
    switch (m) {
        case AmsMode::None: return "none";
        case AmsMode::Fixed: return "fixed";
        case AmsMode::Dynamic: return "dynamic";
    }
    return "none";
}

AmsMode ams_mode_from_string(std::string_view name) {
    if (name == "none") return AmsMode::None;
    if (name == "fixed") return AmsMode::Fixed;
    if (name == "dynamic") return AmsMode::Dynamic;
    fail(ErrorKind::Config, "ams mode must be none, fixed or dynamic, got '" + std::string(name) + "'");
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double sampling_ratio(const AmsState& state) {
    switch (state.mode) {
        case AmsMode::Dynamic: return sigmoid(state.theta);
        case AmsMode::Fixed: return state.fixed_ratio;
        case AmsMode::None: return 1.0;
    }
    return 1.0;
}

BatchPlan build_batch(std::span<const PoolEntry> paired_pool, std::span<const PoolEntry> unpaired_pool,
                      std::size_t batch_size, double ratio, std::uint64_t seed) {
    require(batch_size >= 2, ErrorKind::Range, "batch size must be >= 2");
    require(ratio >= 0.0 && ratio <= 1.0, ErrorKind::Range, "sampling ratio must lie in [0,1]");
    require(!paired_pool.empty(), ErrorKind::Protocol, "empty paired pool: at least one genuine pair is required");
    check_disjoint(paired_pool, unpaired_pool);

    std::map<int, std::vector<PoolEntry>> donors;
    for (const auto& e : paired_pool) donors[e.label].push_back(e);
    for (const auto& e : unpaired_pool)
        require(donors.contains(e.label), ErrorKind::Protocol,
                "donor exhaustion: class " + std::to_string(e.label) + " has unpaired samples but no paired donor");

    Rng rng(derive_seed(seed, {0xBA7CULL}));
    BatchPlan plan;
    plan.requested = batch_size;

    const auto want_genuine = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(batch_size) - 1e-9));
    const std::size_t n_genuine = std::min(want_genuine, paired_pool.size());
    const std::size_t n_pseudo = std::min(batch_size - n_genuine, unpaired_pool.size());
    plan.shortfall = batch_size - n_genuine - n_pseudo;

    std::vector<PoolEntry> paired(paired_pool.begin(), paired_pool.end());
    rng.shuffle(std::span<PoolEntry>(paired));
    for (std::size_t i = 0; i < n_genuine; ++i) plan.genuine.push_back(paired[i].id);

    std::vector<PoolEntry> unpaired(unpaired_pool.begin(), unpaired_pool.end());
    rng.shuffle(std::span<PoolEntry>(unpaired));

    std::map<int, std::size_t> cursor;
    for (auto& [label, list] : donors) {
        rng.shuffle(std::span<PoolEntry>(list));
        cursor[label] = 0;
    }
    for (std::size_t i = 0; i < n_pseudo; ++i) {
        const auto& rec = unpaired[i];
        auto& list = donors[rec.label];
        auto& at = cursor[rec.label];
        if (at == list.size()) {
            rng.shuffle(std::span<PoolEntry>(list));
            at = 0;
        }
        plan.pseudo.push_back(PseudoPair{rec.id, list[at++].id, rec.label});
        plan.unpaired_student_only.push_back(rec.id);
    }
    return plan;
}

BatchPlan build_uniform_batch(std::span<const PoolEntry> paired_pool, std::span<const PoolEntry> unpaired_pool,
                              std::size_t batch_size, std::uint64_t seed) {
    require(batch_size >= 2, ErrorKind::Range, "batch size must be >= 2");
    require(!paired_pool.empty(), ErrorKind::Protocol, "empty paired pool: at least one genuine pair is required");
    check_disjoint(paired_pool, unpaired_pool);
    struct Tagged {
        std::int64_t id;
        bool paired;
    };
    std::vector<Tagged> all;
    all.reserve(paired_pool.size() + unpaired_pool.size());
    for (const auto& e : paired_pool) all.push_back({e.id, true});
    for (const auto& e : unpaired_pool) all.push_back({e.id, false});
    Rng rng(derive_seed(seed, {0x0411ULL}));
    rng.shuffle(std::span<Tagged>(all));
    BatchPlan plan;
    plan.requested = batch_size;
    const std::size_t take = std::min(batch_size, all.size());
    plan.shortfall = batch_size - take;
    for (std::size_t i = 0; i < take; ++i)
        (all[i].paired ? plan.genuine : plan.unpaired_student_only).push_back(all[i].id);
    return plan;
}

double theta_gradient(const AmsState& state, double loss_paired, double loss_pseudo) {
    require(state.mode == AmsMode::Dynamic, ErrorKind::Usage, "theta gradient requested outside dynamic mode");
    require(std::isfinite(loss_paired) && std::isfinite(loss_pseudo), ErrorKind::Numeric,
            "non-finite subset loss in theta gradient");
    const double r = sigmoid(state.theta);
    return (loss_paired - loss_pseudo) * r * (1.0 - r);
}

void write_ams_trace_header(std::ostream& os) { os << "epoch,theta,ratio\n"; }

void append_ams_trace_row(std::ostream& os, int epoch, const AmsState& state) {
    os << epoch << ',' << csv::format_double(state.theta) << ',' << csv::format_double(sampling_ratio(state)) << '\n';
}

}  // namespace pgad
