#include "pgad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <unordered_set>

#include "pgad/csv.hpp"
#include "pgad/error.hpp"
#include "pgad/kernels.hpp"
#include "pgad/rng.hpp"

namespace pgad {

std::string_view to_string(PrototypeStrategy s) {
    switch (s) {
        case PrototypeStrategy::None: return "none";
        case PrototypeStrategy::All: return "all";
        case PrototypeStrategy::Paired: return "paired";
    }
    return "none";
}

PrototypeStrategy prototype_strategy_from_string(std::string_view name) {
    if (name == "none") return PrototypeStrategy::None;
    if (name == "all") return PrototypeStrategy::All;
    if (name == "paired") return PrototypeStrategy::Paired;
    fail(ErrorKind::Config, "prototype strategy must be none, all or paired, got '" + std::string(name) + "'");
}

std::string_view to_string(ProtoAssignment a) { return a == ProtoAssignment::Nearest ? "nearest" : "true-class"; }

ProtoAssignment proto_assignment_from_string(std::string_view name) {
    if (name == "nearest") return ProtoAssignment::Nearest;
    if (name == "true-class") return ProtoAssignment::TrueClass;
    fail(ErrorKind::Config, "prototype assignment must be nearest or true-class, got '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    require(epochs >= 1, ErrorKind::Config, "epochs must be >= 1");
    require(batch_size >= 2, ErrorKind::Config, "batch_size must be >= 2");
    require(learning_rate > 0.0, ErrorKind::Config, "learning_rate must be positive");
    require(weight_decay >= 0.0, ErrorKind::Config, "weight_decay must be nonnegative");
    require(kd_temperature > 0.0, ErrorKind::Config, "kd_temperature must be positive");
    require(sim_temperature > 0.0, ErrorKind::Config, "sim_temperature must be positive");
    require(fixed_ratio >= 0.0 && fixed_ratio <= 1.0, ErrorKind::Config, "fixed_ratio must lie in [0,1]");
    require(proto_momentum >= 0.0 && proto_momentum < 1.0, ErrorKind::Config, "proto_momentum must lie in [0,1)");
    require(teacher_pretrain_epochs >= 0 && teacher_pretrain_epochs < epochs, ErrorKind::Config,
            "teacher_pretrain_epochs must lie in [0, epochs)");
    require(grad_clip > 0.0, ErrorKind::Config, "grad_clip must be positive");
    loss_weights.validate();
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
                 double weight_decay, const AdamHyper& hyper) {
    require(params.size() == grads.size(), ErrorKind::Shape,
            "adam: " + std::to_string(grads.size()) + " gradients for " + std::to_string(params.size()) + " parameters");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    require(state.m.size() == params.size(), ErrorKind::Shape, "adam state does not match parameter count");
    ++state.step;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] = params[i] - lr * weight_decay * params[i] - lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
}

double cosine_lr(long step, long total_steps, double lr0) {
    require(total_steps >= 1 && step >= 0 && step <= total_steps, ErrorKind::Range,
            "cosine schedule step " + std::to_string(step) + " outside [0," + std::to_string(total_steps) + "]");
    if (step == total_steps) return 0.0;
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

SampleTable::SampleTable(std::span<const Sample> samples) : samples_(samples) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const bool inserted = index_.emplace(samples[i].id, i).second;
        require(inserted, ErrorKind::Protocol, "duplicate sample id " + std::to_string(samples[i].id));
    }
}

const Sample& SampleTable::at(std::int64_t id) const {
    auto it = index_.find(id);
    require(it != index_.end(), ErrorKind::Protocol, "unknown sample id " + std::to_string(id));
    return samples_[it->second];
}

TrainState::TrainState(TeacherNet t, StudentNet s, const TrainConfig& cfg)
    : teacher(std::move(t)), student(std::move(s)) {
    check_compatible(teacher, student);
    ams.mode = cfg.ams_mode;
    ams.fixed_ratio = cfg.fixed_ratio;
    ams.theta = cfg.theta_init;
    running = PrototypeSet::empty(teacher.num_classes(), teacher.feature_dim());
}

LossWeights effective_weights(const TrainConfig& cfg, bool teacher_only) {
    LossWeights w = cfg.loss_weights;
    if (!cfg.pcm_active()) w.proto = 0.0;
    if (teacher_only) w.stu = w.kl = w.proto = 0.0;
    return w;
}

namespace {

Matrix gather_a(const SampleTable& data, std::span<const std::int64_t> ids) {
    if (ids.empty()) return {};
    const auto da = data.at(ids.front()).feat_a.size();
    Matrix m(ids.size(), da);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& s = data.at(ids[i]);
        require(s.feat_a.size() == da, ErrorKind::Shape, "inconsistent modality-A dimension");
        std::copy(s.feat_a.begin(), s.feat_a.end(), m.row(i).begin());
    }
    return m;
}

Matrix gather_b(const SampleTable& data, std::span<const std::int64_t> ids) {
    if (ids.empty()) return {};
    const auto& first = data.at(ids.front());
    require(first.paired(), ErrorKind::Protocol, "sample " + std::to_string(first.id) + " has no modality B");
    Matrix m(ids.size(), first.feat_b->size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& s = data.at(ids[i]);
        require(s.paired(), ErrorKind::Protocol, "sample " + std::to_string(s.id) + " has no modality B");
        std::copy(s.feat_b->begin(), s.feat_b->end(), m.row(i).begin());
    }
    return m;
}

Matrix rows_range(const Matrix& m, std::size_t begin, std::size_t end) {
    Matrix out(end - begin, m.cols());
    for (std::size_t r = begin; r < end; ++r) std::copy(m.row(r).begin(), m.row(r).end(), out.row(r - begin).begin());
    return out;
}

void scale_into(Matrix& dst, std::size_t row_offset, const Matrix& src, double scale) {
    for (std::size_t r = 0; r < src.rows(); ++r) {
        auto d = dst.row(row_offset + r);
        auto s = src.row(r);
        for (std::size_t k = 0; k < s.size(); ++k) d[k] += scale * s[k];
    }
}

double sum_squares(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

StepTrace train_step(TrainState& state, const BatchPlan& plan, const SampleTable& data, const TrainConfig& cfg,
                     double lr, bool teacher_only) {
    const long step_index = state.step;
    auto numeric_guard = [&](auto&& body) {
        try {
            return body();
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Numeric)
                fail(ErrorKind::Numeric, "step " + std::to_string(step_index) + ": " + e.message());
            throw;
        }
    };

    const LossWeights w = effective_weights(cfg, teacher_only);
    const int num_classes = state.teacher.num_classes();

    // Batch layout.
    //   teacher rows: genuine pairs, then pseudo-pairs (recipient A, donor B)
    //   student rows: genuine pairs, then unpaired samples
    const std::size_t n_gen = plan.genuine.size();
    const std::size_t n_pseudo = plan.pseudo.size();
    const std::size_t n_unp = plan.unpaired_student_only.size();
    {
        std::unordered_set<std::int64_t> gen(plan.genuine.begin(), plan.genuine.end());
        for (auto id : plan.unpaired_student_only)
            require(!gen.contains(id), ErrorKind::Protocol,
                    "sample " + std::to_string(id) + " routed to both distillation and prototype matching");
    }
    std::vector<std::int64_t> teacher_a_ids(plan.genuine), teacher_b_ids(plan.genuine);
    std::vector<int> teacher_labels;
    for (auto id : plan.genuine) teacher_labels.push_back(data.at(id).label);
    for (const auto& p : plan.pseudo) {
        teacher_a_ids.push_back(p.mri_id);
        teacher_b_ids.push_back(p.donor_id);
        teacher_labels.push_back(p.label);
        require(data.at(p.donor_id).label == p.label && data.at(p.mri_id).label == p.label, ErrorKind::Protocol,
                "pseudo-pair mixes classes");
    }
    std::vector<std::int64_t> student_ids(plan.genuine);
    student_ids.insert(student_ids.end(), plan.unpaired_student_only.begin(), plan.unpaired_student_only.end());
    std::vector<int> student_labels;
    for (auto id : student_ids) student_labels.push_back(data.at(id).label);
    require(!student_ids.empty(), ErrorKind::EmptyBatch, "step " + std::to_string(step_index) + ": empty batch");

    const double ratio = sampling_ratio(state.ams);
    LossTerms terms;
    StepTrace trace;
    trace.step = step_index;
    trace.ratio = ratio;
    trace.lr = lr;

    // Forward.
    const std::size_t n_teacher = teacher_a_ids.size();
    TeacherPass tpass;
    if (n_teacher > 0) tpass = state.teacher.forward(gather_a(data, teacher_a_ids), gather_b(data, teacher_b_ids));
    StudentPass spass = state.student.forward(gather_a(data, student_ids));

    TeacherUpstream tup;
    StudentUpstream sup;
    sup.d_logits = Matrix(student_ids.size(), static_cast<std::size_t>(num_classes));
    double theta_grad = 0.0;

    // L_tea. With a sampling strategy the genuine and pseudo subsets are mixed
    // as r * CE(genuine) + (1 - r) * CE(pseudo), which is what theta learns from.
    if (n_teacher > 0) {
        tup.d_logits = Matrix(n_teacher, static_cast<std::size_t>(num_classes));
        const bool split = cfg.ams_mode != AmsMode::None && n_gen > 0 && n_pseudo > 0;
        if (split) {
            auto ce_gen = ce_loss(rows_range(tpass.logits, 0, n_gen), std::span(teacher_labels).first(n_gen));
            auto ce_pse = ce_loss(rows_range(tpass.logits, n_gen, n_teacher), std::span(teacher_labels).subspan(n_gen));
            terms.tea = ratio * ce_gen.value + (1.0 - ratio) * ce_pse.value;
            scale_into(tup.d_logits, 0, ce_gen.grad, w.tea * ratio);
            scale_into(tup.d_logits, n_gen, ce_pse.grad, w.tea * (1.0 - ratio));
            if (cfg.ams_mode == AmsMode::Dynamic)
                theta_grad = w.tea * theta_gradient(state.ams, ce_gen.value, ce_pse.value);
        } else {
            auto ce = ce_loss(tpass.logits, teacher_labels);
            terms.tea = ce.value;
            scale_into(tup.d_logits, 0, ce.grad, w.tea);
        }
    }

    // L_stu over every student row.
    {
        auto ce = ce_loss(spass.logits, student_labels);
        terms.stu = ce.value;
        scale_into(sup.d_logits, 0, ce.grad, w.stu);
    }

    // L_kl on genuine pairs only; the teacher side is a constant target.
    if (n_gen > 0) {
        auto kd = kd_loss(rows_range(spass.logits, 0, n_gen), rows_range(tpass.logits, 0, n_gen), cfg.kd_temperature);
        terms.kl = kd.value;
        scale_into(sup.d_logits, 0, kd.grad, w.kl);
    }

    // L_pair: genuine modality-A features against every modality-B feature in
    // the batch (genuine and donor). Positives sit on the diagonal.
    if (n_gen > 0) {
        const Matrix anchors = rows_range(tpass.feat_a, 0, n_gen);
        numeric_guard([&] {
            const Matrix sim = kernels::cosine_similarity(anchors, tpass.feat_b, cfg.sim_temperature);
            std::vector<std::pair<std::size_t, std::size_t>> positives;
            for (std::size_t i = 0; i < n_gen; ++i) positives.emplace_back(i, i);
            auto pl = pair_loss(sim, positives);
            terms.pair = pl.value;
            if (w.pair != 0.0) {
                auto g = kernels::cosine_similarity_backward(anchors, tpass.feat_b, cfg.sim_temperature, pl.grad);
                tup.d_feat_a = Matrix(n_teacher, tpass.feat_a.cols());
                scale_into(tup.d_feat_a, 0, g.d_left, w.pair);
                tup.d_feat_b = Matrix(n_teacher, tpass.feat_b.cols());
                scale_into(tup.d_feat_b, 0, g.d_right, w.pair);
            }
            return 0;
        });
    }

    // Prototypes and L_proto.
    if (cfg.pcm_active()) {
        PrototypeSet effective;
        if (cfg.prototype_strategy == PrototypeStrategy::Paired) {
            const Matrix fused_gen = n_gen > 0 ? rows_range(tpass.fused, 0, n_gen)
                                               : Matrix(0, static_cast<std::size_t>(state.teacher.feature_dim()));
            auto batch = compute_batch_prototypes(fused_gen, std::span(teacher_labels).first(n_gen), num_classes);
            trace.stale_classes = batch.classes.size() - batch.fresh_count();
            effective = merge_fallback(batch, state.running);
            state.running = update_running_prototypes(state.running, batch, cfg.proto_momentum);
        } else {
            require(state.epoch_protos.has_value(), ErrorKind::Usage, "\"all\" prototype strategy without epoch prototypes");
            effective = *state.epoch_protos;
            trace.stale_classes = effective.classes.size() - effective.fresh_count();
        }

        std::vector<std::size_t> rows;  // student rows that receive PCM
        std::unordered_set<std::int64_t> recipients;
        if (!cfg.pcm_on_pseudo)
            for (const auto& p : plan.pseudo) recipients.insert(p.mri_id);
        for (std::size_t i = 0; i < n_unp; ++i)
            if (!recipients.contains(plan.unpaired_student_only[i])) rows.push_back(n_gen + i);

        if (effective.fresh_count() == 0) {
            trace.proto_skipped = true;
        } else if (!rows.empty()) {
            const Matrix feats = spass.feat.gather_rows(rows);
            std::vector<int> labels;
            for (auto r : rows) labels.push_back(student_labels[r]);
            auto pl = proto_loss(feats, effective, cfg.proto_assignment, labels);
            terms.proto = pl.value;
            if (w.proto != 0.0) {
                sup.d_feat = Matrix(student_ids.size(), spass.feat.cols());
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    auto dst = sup.d_feat.row(rows[i]);
                    auto src = pl.grad.row(i);
                    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = w.proto * src[k];
                }
            }
        }
    }

    trace.report = numeric_guard([&] { return total_loss(terms, w); });

    // Gradients, clipping, update.
    ParamVector g_teacher = n_teacher > 0 ? state.teacher.backward(tpass, tup)
                                          : ParamVector(state.teacher.num_params(), 0.0);
    ParamVector g_student = teacher_only ? ParamVector(state.student.num_params(), 0.0)
                                         : state.student.backward(spass, sup);
    const double norm = std::sqrt(sum_squares(g_teacher) + sum_squares(g_student) + theta_grad * theta_grad);
    require(std::isfinite(norm), ErrorKind::Numeric, "step " + std::to_string(step_index) + ": non-finite gradient");
    trace.grad_norm = norm;
    if (norm > cfg.grad_clip) {
        const double s = cfg.grad_clip / norm;
        for (auto& g : g_teacher) g *= s;
        for (auto& g : g_student) g *= s;
        theta_grad *= s;
    }

    adam_update(state.teacher.params(), g_teacher, state.adam_teacher, lr, cfg.weight_decay);
    if (!teacher_only) adam_update(state.student.params(), g_student, state.adam_student, lr, cfg.weight_decay);
    if (cfg.ams_mode == AmsMode::Dynamic) {
        const double g[] = {theta_grad};
        double* theta = &state.ams.theta;
        adam_update(std::span<double>(theta, 1), g, state.adam_theta, lr, 0.0);
    }
    trace.theta = state.ams.theta;
    ++state.step;
    return trace;
}

PrototypeSet all_paired_prototypes(const TeacherNet& teacher, std::span<const Sample> samples) {
    std::vector<std::int64_t> ids;
    std::vector<int> labels;
    for (const auto& s : samples)
        if (s.paired()) {
            ids.push_back(s.id);
            labels.push_back(s.label);
        }
    if (ids.empty()) return PrototypeSet::empty(teacher.num_classes(), teacher.feature_dim());
    SampleTable table(samples);
    auto pass = teacher.forward(gather_a(table, ids), gather_b(table, ids));
    return compute_batch_prototypes(pass.fused, labels, teacher.num_classes());
}

std::uint64_t batch_seed(const TrainConfig& cfg, long step) {
    return derive_seed(cfg.seed, {0xBA7C4ULL, static_cast<std::uint64_t>(step)});
}

long steps_per_epoch(std::size_t num_samples, int batch_size) {
    return static_cast<long>((num_samples + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size));
}

FitResult fit(TeacherNet teacher, StudentNet student, std::span<const Sample> train, const TrainConfig& cfg,
              const FitHooks& hooks) {
    cfg.validate();
    require(!train.empty(), ErrorKind::Protocol, "empty training set");
    SampleTable table(train);
    std::vector<PoolEntry> paired, unpaired;
    for (const auto& s : train) (s.paired() ? paired : unpaired).push_back({s.id, s.label});
    require(!paired.empty(), ErrorKind::Protocol, "training set has no genuine pair");

    TrainState state(std::move(teacher), std::move(student), cfg);
    const long spe = steps_per_epoch(train.size(), cfg.batch_size);
    const long total = spe * cfg.epochs;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    FitResult result{state.teacher, state.student, state.ams, {}};
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const bool teacher_only = epoch < cfg.teacher_pretrain_epochs;
        if (cfg.pcm_active() && cfg.prototype_strategy == PrototypeStrategy::All)
            state.epoch_protos = all_paired_prototypes(state.teacher, train);

        EpochTrace et;
        et.epoch = epoch;
        for (long k = 0; k < spe; ++k) {
            const long step = state.step;
            const double lr = cosine_lr(step, total, cfg.learning_rate);
            if (k == 0) et.lr = lr;
            const auto seed = batch_seed(cfg, step);
            const BatchPlan plan = cfg.ams_mode == AmsMode::None
                                       ? build_uniform_batch(paired, unpaired, batch, seed)
                                       : build_batch(paired, unpaired, batch, sampling_ratio(state.ams), seed);
            const StepTrace st = train_step(state, plan, table, cfg, lr, teacher_only);
            if (hooks.on_step) hooks.on_step(st, plan);
            et.mean.l_tea += st.report.l_tea;
            et.mean.l_stu += st.report.l_stu;
            et.mean.l_kl += st.report.l_kl;
            et.mean.l_pair += st.report.l_pair;
            et.mean.l_proto += st.report.l_proto;
            et.mean.total += st.report.total;
        }
        const double inv = 1.0 / static_cast<double>(spe);
        et.mean.l_tea *= inv;
        et.mean.l_stu *= inv;
        et.mean.l_kl *= inv;
        et.mean.l_pair *= inv;
        et.mean.l_proto *= inv;
        et.mean.total *= inv;
        et.theta = state.ams.theta;
        et.ratio = sampling_ratio(state.ams);
        if (hooks.on_epoch) hooks.on_epoch(et, state);
        result.epochs.push_back(et);
    }
    result.teacher = std::move(state.teacher);
    result.student = std::move(state.student);
    result.ams = state.ams;
    return result;
}

void write_epoch_trace_header(std::ostream& os) { os << "epoch,l_tea,l_stu,l_kl,l_pair,l_proto,total,theta,ratio,lr\n"; }

void append_epoch_trace_row(std::ostream& os, const EpochTrace& e) {
    const double vals[] = {e.mean.l_tea, e.mean.l_stu, e.mean.l_kl, e.mean.l_pair, e.mean.l_proto,
                           e.mean.total, e.theta,      e.ratio,     e.lr};
    os << e.epoch;
    for (double v : vals) os << ',' << csv::format_double(v);
    os << '\n';
}

}  // namespace pgad
