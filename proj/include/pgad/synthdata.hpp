#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgad/matrix.hpp"

namespace pgad {

/// One subject: modality A always, modality B only when paired.
struct Sample {
    std::int64_t id = 0;
    int label = 0;
    std::vector<double> feat_a;
    std::optional<std::vector<double>> feat_b;

    bool paired() const noexcept { return feat_b.has_value(); }

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct DatasetConfig {
    int num_classes = 2;
    int samples_per_class = 200;
    int dim_a = 16;
    int dim_b = 16;
    /// Distance between neighbouring class centres in latent space.
    double class_separation = 2.0;
    double noise_scale = 1.0;
    double missing_rate = 0.0;
    std::uint64_t seed = 0;
    /// Dimension of the per-subject latent shared by both modalities.
    int latent_dim = 8;
    /// Gaussian clusters per class in latent space; above 1 the classes are
    /// no longer linearly separable.
    int clusters_per_class = 1;
    /// Share of recorded labels per class that name a different class than
    /// the one the features were drawn from. Per-class counts are preserved
    /// exactly for two classes.
    double label_noise = 0.0;
    /// Gain of the subject-specific nuisance projected into each modality.
    double nuisance_scale = 1.0;
    /// Modality-B overrides; unset means the same value as for A.
    std::optional<double> noise_scale_b;
    std::optional<double> nuisance_scale_b;

    double b_noise() const { return noise_scale_b.value_or(noise_scale); }
    double b_nuisance() const { return nuisance_scale_b.value_or(nuisance_scale); }

    /// Throws Error(Config) naming the first offending field.
    void validate() const;
};

struct FoldSplit {
    int fold_index = 0;
    std::vector<std::int64_t> train_ids;
    std::vector<std::int64_t> test_ids;
};

/// round(x) with ties going up; tolerant to representation error in rate*n.
std::size_t round_half_up_count(double rate, std::size_t n);

std::vector<Sample> generate_dataset(const DatasetConfig& cfg);

std::vector<FoldSplit> stratified_kfold(std::span<const Sample> samples, int k, std::uint64_t seed);

/// Returns a copy where exactly round(rate * n_c) samples of every class lose
/// modality B. Input must be fully paired.
std::vector<Sample> apply_missingness(std::span<const Sample> samples, double rate, std::uint64_t seed);

/// Samples whose id is listed, in the order of `ids`.
std::vector<Sample> select_by_id(std::span<const Sample> samples, std::span<const std::int64_t> ids);

Matrix stack_feat_a(std::span<const Sample> samples);

// CSV: id,label,paired,a_0..a_{Da-1},b_0..b_{Db-1}; b_* empty when unpaired.
void write_dataset_csv(std::ostream& os, std::span<const Sample> samples);
std::vector<Sample> read_dataset_csv(std::istream& is);

// CSV: fold,id,split with split in {train,test}.
void write_folds_csv(std::ostream& os, std::span<const FoldSplit> folds);
std::vector<FoldSplit> read_folds_csv(std::istream& is);

}  // namespace pgad
