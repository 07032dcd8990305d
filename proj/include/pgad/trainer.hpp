#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "pgad/ams.hpp"
#include "pgad/losses.hpp"
#include "pgad/nets.hpp"
#include "pgad/prototypes.hpp"
#include "pgad/synthdata.hpp"

namespace pgad {

enum class PrototypeStrategy { None, All, Paired };

std::string_view to_string(PrototypeStrategy s);
PrototypeStrategy prototype_strategy_from_string(std::string_view name);
std::string_view to_string(ProtoAssignment a);
ProtoAssignment proto_assignment_from_string(std::string_view name);

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 1e-4;
    double weight_decay = 5e-5;
    double kd_temperature = 2.0;
    double sim_temperature = 0.1;
    LossWeights loss_weights{};
    AmsMode ams_mode = AmsMode::Dynamic;
    double fixed_ratio = 0.5;
    double theta_init = 0.0;
    bool pcm_enabled = true;
    PrototypeStrategy prototype_strategy = PrototypeStrategy::Paired;
    ProtoAssignment proto_assignment = ProtoAssignment::Nearest;
    double proto_momentum = 0.9;
    /// Unpaired samples used as pseudo-pair recipients also receive the
    /// prototype loss in the same step.
    bool pcm_on_pseudo = true;
    /// Epochs at the start that train the teacher alone (two-stage variant).
    int teacher_pretrain_epochs = 0;
    double grad_clip = 5.0;
    std::uint64_t seed = 0;

    /// Prototype strategy None forces PCM off.
    bool pcm_active() const { return pcm_enabled && prototype_strategy != PrototypeStrategy::None; }
    void validate() const;
};

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam step with decoupled weight decay:
///   p <- p - lr * wd * p - lr * mhat / (sqrt(vhat) + eps)
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
                 double weight_decay, const AdamHyper& hyper = {});

/// lr0 * (1 + cos(pi * step / total_steps)) / 2 for 0 <= step <= total_steps.
double cosine_lr(long step, long total_steps, double lr0);

/// Id -> sample lookup over a training set.
class SampleTable {
public:
    explicit SampleTable(std::span<const Sample> samples);
    const Sample& at(std::int64_t id) const;
    std::span<const Sample> samples() const { return samples_; }

private:
    std::span<const Sample> samples_;
    std::unordered_map<std::int64_t, std::size_t> index_;
};

struct TrainState {
    TeacherNet teacher;
    StudentNet student;
    AdamState adam_teacher, adam_student, adam_theta;
    AmsState ams;
    PrototypeSet running;                     // momentum-smoothed fallback
    std::optional<PrototypeSet> epoch_protos;  // "all" strategy
    long step = 0;

    TrainState(TeacherNet t, StudentNet s, const TrainConfig& cfg);
};

struct StepTrace {
    long step = 0;
    LossReport report;
    double ratio = 0.0;  // sampling ratio used to build this batch
    double theta = 0.0;  // after the update
    double lr = 0.0;
    std::size_t stale_classes = 0;  // classes with no batch prototype
    bool proto_skipped = false;     // no usable prototype at all
    double grad_norm = 0.0;         // before clipping
};

/// Effective loss weights for a step (teacher-only during pretraining).
LossWeights effective_weights(const TrainConfig& cfg, bool teacher_only);

/// One joint update: forward both nets, refresh prototypes from this batch's
/// genuine pairs, evaluate the five terms, clip, Adam on teacher, student and
/// theta. Throws Error(Numeric) naming the step and the offending term.
StepTrace train_step(TrainState& state, const BatchPlan& plan, const SampleTable& data, const TrainConfig& cfg,
                     double lr, bool teacher_only = false);

/// Recompute "all" prototypes from every paired sample with the current teacher.
PrototypeSet all_paired_prototypes(const TeacherNet& teacher, std::span<const Sample> samples);

struct EpochTrace {
    int epoch = 0;
    LossReport mean;  // step average
    double theta = 0.0;
    double ratio = 0.0;
    double lr = 0.0;  // at the epoch's first step
};

struct FitHooks {
    std::function<void(const StepTrace&, const BatchPlan&)> on_step;
    std::function<void(const EpochTrace&, const TrainState&)> on_epoch;
};

struct FitResult {
    TeacherNet teacher;
    StudentNet student;
    AmsState ams;
    std::vector<EpochTrace> epochs;
};

/// Seed of the batch drawn at global step `step`.
std::uint64_t batch_seed(const TrainConfig& cfg, long step);
long steps_per_epoch(std::size_t num_samples, int batch_size);

FitResult fit(TeacherNet teacher, StudentNet student, std::span<const Sample> train, const TrainConfig& cfg,
              const FitHooks& hooks = {});

// CSV: epoch,l_tea,l_stu,l_kl,l_pair,l_proto,total,theta,ratio,lr
void write_epoch_trace_header(std::ostream& os);
void append_epoch_trace_row(std::ostream& os, const EpochTrace& e);

}  // namespace pgad
