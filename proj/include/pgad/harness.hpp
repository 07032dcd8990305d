#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgad/eval.hpp"
#include "pgad/nets.hpp"
#include "pgad/synthdata.hpp"
#include "pgad/trainer.hpp"

namespace pgad {

/// One ablation arm. Fields left unset inherit from the scenario's TrainConfig.
struct ArmConfig {
    std::string name;
    bool pcm = true;
    AmsMode ams = AmsMode::Dynamic;
    std::optional<double> fixed_ratio;
    PrototypeStrategy prototype_strategy = PrototypeStrategy::Paired;
    std::optional<LossWeights> loss_weights;
    /// Overrides the scenario's missing_rates for this arm only.
    std::optional<std::vector<double>> missing_rates;

    /// Strategy "none" forces PCM off; anything else inconsistent is an error.
    void validate() const;
    TrainConfig apply(TrainConfig base) const;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::uint64_t seed = 0;
    DatasetConfig dataset;
    ArchConfig arch;
    TrainConfig train;
    std::vector<double> missing_rates{0.2, 0.5, 0.7};
    std::vector<ArmConfig> arms;
    int k_folds = 5;
    std::string output_dir = "pgad-out";
    /// Arm the others are compared against after the run (optional).
    std::optional<std::string> baseline_arm;
    double alpha = 0.05;
    /// Per-run traces, prototype snapshots and checkpoints.
    bool write_run_artifacts = true;

    void validate() const;
    std::vector<double> rates_for(const ArmConfig& arm) const;
};

/// Parse the JSON-shaped config. Field names mirror the structs above; unknown
/// keys are rejected.
ScenarioConfig parse_scenario_config(std::istream& is);
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

/// Stable scenario label for a missing rate, e.g. "mr0.5".
std::string scenario_label(double missing_rate);

struct RunRecord {
    std::string arm;
    double missing_rate = 0.0;
    MetricsRecord metrics;
    std::vector<EpochTrace> epochs;
};

struct SummaryCell {
    std::string arm;
    double missing_rate = 0.0;
    int folds = 0;
    double mean[4] = {};  // mcc, auc, sen, spe
    double std[4] = {};
};

struct RunSummary {
    std::vector<RunRecord> runs;   // arm-major, then rate, then fold
    std::vector<SummaryCell> cells;

    const SummaryCell& cell(std::string_view arm, double missing_rate) const;
};

inline constexpr const char* kMetricNames[4] = {"mcc", "auc", "sen", "spe"};
double metric_value(const MetricsRecord& r, int metric);

/// Seeds derived from the scenario root. Training seeds depend on (rate, fold)
/// only, so every arm starts from the same initialization and batches draw
/// from the same stream; adding an arm never changes another arm.
struct ScenarioSeeds {
    std::uint64_t root;
    std::uint64_t data;
    std::uint64_t folds;

    explicit ScenarioSeeds(std::uint64_t root_seed);
    std::uint64_t missingness(double rate, int fold) const;
    std::uint64_t training(double rate, int fold) const;
};

/// Train and evaluate every (arm, rate, fold), write CSVs and the markdown
/// report under cfg.output_dir. `jobs` > 1 runs folds concurrently.
RunSummary run_scenario(const ScenarioConfig& cfg, int jobs = 1);

RunSummary summarize(std::vector<RunRecord> runs);

/// P(class 1) from the student on modality A only.
std::vector<double> student_scores(const StudentNet& student, std::span<const Sample> samples);

/// CSV rows id,label,paired,h_0..h_{H-1} of student features.
void export_embeddings(const StudentNet& student, std::span<const Sample> samples, std::ostream& os);

/// Paired t-test per metric between two arms at one missing rate, with a
/// Bonferroni threshold alpha / comparisons. Fold sets must coincide.
std::vector<ComparisonResult> compare_arms(std::span<const RunRecord> runs, const std::string& baseline,
                                           const std::string& other, double missing_rate, double alpha,
                                           int comparisons);

// CSV: method,scenario,fold,mcc,auc,sen,spe
void write_metrics_csv(std::ostream& os, std::span<const RunRecord> runs);
std::vector<RunRecord> read_metrics_csv(std::istream& is);
// CSV: method_a,method_b,metric,t,p,significant,alpha_corrected
void write_comparisons_csv(std::ostream& os, std::span<const ComparisonResult> results);
void write_summary_csv(std::ostream& os, const RunSummary& summary);
void write_report_markdown(std::ostream& os, const ScenarioConfig& cfg, const RunSummary& summary);

/// Compare every arm in `runs` against `baseline` at each shared rate. When
/// `comparisons` is 0 it defaults to (arms - 1) * 4.
std::vector<ComparisonResult> compare_all(std::span<const RunRecord> runs, const std::string& baseline, double alpha,
                                          int comparisons = 0);

}  // namespace pgad
