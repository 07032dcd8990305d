// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pgad/error.hpp"
#include "pgad/eval.hpp"
#include "pgad/harness.hpp"
#include "pgad/kernels.hpp"
#include "pgad/losses.hpp"
#include "pgad/nets.hpp"
#include "pgad/prototypes.hpp"
#include "pgad/rng.hpp"
#include "pgad/trainer.hpp"
#include "reference_trainer.hpp"

using namespace pgad;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m(r, c);
    for (auto& v : m.data()) v = scale * rng.normal();
    return m;
}

int uniform_int(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); }

// ---------------------------------------------------------------------------
// 1. gradient suite

constexpr double kFdStep = 1e-5;
constexpr double kRelFloor = 1e-6;

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kRelFloor}); }

// Worst relative error between `analytic` and central differences of f over `params`.
double fd_check(std::span<double> params, std::span<const double> analytic, const std::function<double()>& f) {
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + kFdStep;
        const double up = f();
        params[i] = keep - kFdStep;
        const double down = f();
        params[i] = keep;
        worst = std::max(worst, rel(analytic[i], (up - down) / (2 * kFdStep)));
    }
    return worst;
}

struct GradInstance {
    TeacherNet teacher;
    StudentNet student;
    Matrix a_gen, b_gen;    // genuine pairs
    Matrix a_pse, b_donor;  // pseudo-pairs
    Matrix a_unp;           // unpaired, student only
    std::vector<int> y_gen, y_pse, y_unp;
    double kd_t, sim_t;
    LossWeights w;
};

GradInstance make_instance(Rng& rng) {
    ArchConfig arch;
    arch.dim_a = uniform_int(rng, 1, 8);
    arch.dim_b = uniform_int(rng, 1, 8);
    arch.feature_dim = uniform_int(rng, 2, 8);
    arch.num_classes = uniform_int(rng, 2, 4);
    arch.encoder_hidden = {uniform_int(rng, 2, 8)};
    arch.fusion_hidden = {uniform_int(rng, 2, 8)};
    arch.activation = Activation::Tanh;
    auto nets = make_networks(arch, rng.next_u64());
    const int n_gen = uniform_int(rng, 2, 5), n_pse = uniform_int(rng, 0, 3), n_unp = uniform_int(rng, 1, 4);
    auto labels = [&](int n) {
        std::vector<int> y(static_cast<std::size_t>(n));
        for (auto& v : y) v = uniform_int(rng, 0, arch.num_classes - 1);
        return y;
    };
    GradInstance g{std::move(nets.first),
                   std::move(nets.second),
                   random_matrix(rng, n_gen, arch.dim_a),
                   random_matrix(rng, n_gen, arch.dim_b),
                   random_matrix(rng, n_pse, arch.dim_a),
                   random_matrix(rng, n_pse, arch.dim_b),
                   random_matrix(rng, n_unp, arch.dim_a),
                   labels(n_gen),
                   labels(n_pse),
                   labels(n_unp),
                   rng.uniform(0.5, 4.0),
                   rng.uniform(0.2, 1.0),
                   {rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2),
                    rng.uniform(0.1, 2)}};
    return g;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
    if (bottom.rows() == 0) return top;
    Matrix m(top.rows() + bottom.rows(), top.cols());
    std::copy(top.data().begin(), top.data().end(), m.data().begin());
    std::copy(bottom.data().begin(), bottom.data().end(), m.data().begin() + static_cast<long>(top.data().size()));
    return m;
}

Matrix first_rows(const Matrix& m, std::size_t n) {
    Matrix out(n, m.cols());
    std::copy(m.data().begin(), m.data().begin() + static_cast<long>(n * m.cols()), out.data().begin());
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> diagonal(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> p;
    for (std::size_t i = 0; i < n; ++i) p.emplace_back(i, i);
    return p;
}

// Everything the total objective needs, with the stop-gradient inputs (teacher
// logits for KD, prototypes and their assignment) frozen at construction.
struct TotalObjective {
    GradInstance& g;
    Matrix teacher_logits_const;
    PrototypeSet protos;
    std::vector<int> assigned;
    Matrix a_teacher, b_teacher, a_student;
    std::vector<int> y_teacher, y_student;

    explicit TotalObjective(GradInstance& inst) : g(inst) {
        a_teacher = vstack(g.a_gen, g.a_pse);
        b_teacher = vstack(g.b_gen, g.b_donor);
        a_student = vstack(g.a_gen, g.a_unp);
        y_teacher = g.y_gen;
        y_teacher.insert(y_teacher.end(), g.y_pse.begin(), g.y_pse.end());
        y_student = g.y_gen;
        y_student.insert(y_student.end(), g.y_unp.begin(), g.y_unp.end());
        const auto tp = g.teacher.forward(a_teacher, b_teacher);
        teacher_logits_const = first_rows(tp.logits, g.y_gen.size());
        protos = compute_batch_prototypes(first_rows(tp.fused, g.y_gen.size()), g.y_gen, g.teacher.num_classes());
        const auto sp = g.student.forward(g.a_unp);
        assigned = proto_loss(sp.feat, protos).assigned;
    }

    double value() const {
        const std::size_t n_gen = g.y_gen.size();
        const auto tp = g.teacher.forward(a_teacher, b_teacher);
        const auto sp = g.student.forward(a_student);
        LossTerms t;
        t.tea = ce_loss(tp.logits, y_teacher).value;
        t.stu = ce_loss(sp.logits, y_student).value;
        t.kl = kd_loss(first_rows(sp.logits, n_gen), teacher_logits_const, g.kd_t).value;
        t.pair = pair_loss(kernels::cosine_similarity(first_rows(tp.feat_a, n_gen), tp.feat_b, g.sim_t), diagonal(n_gen)).value;
        Matrix unp_feat(g.y_unp.size(), sp.feat.cols());
        std::copy(sp.feat.data().begin() + static_cast<long>(n_gen * sp.feat.cols()), sp.feat.data().end(),
                  unp_feat.data().begin());
        t.proto = proto_loss(unp_feat, protos, ProtoAssignment::TrueClass, assigned).value;
        return total_loss(t, g.w).total;
    }

    std::pair<ParamVector, ParamVector> gradient() const {
        const std::size_t n_gen = g.y_gen.size(), n_teacher = y_teacher.size();
        const auto tp = g.teacher.forward(a_teacher, b_teacher);
        const auto sp = g.student.forward(a_student);
        TeacherUpstream tu;
        StudentUpstream su;
        auto ce_t = ce_loss(tp.logits, y_teacher);
        tu.d_logits = ce_t.grad;
        for (auto& v : tu.d_logits.data()) v *= g.w.tea;
        auto ce_s = ce_loss(sp.logits, y_student);
        su.d_logits = ce_s.grad;
        for (auto& v : su.d_logits.data()) v *= g.w.stu;
        auto kd = kd_loss(first_rows(sp.logits, n_gen), teacher_logits_const, g.kd_t);
        for (std::size_t i = 0; i < kd.grad.data().size(); ++i) su.d_logits.data()[i] += g.w.kl * kd.grad.data()[i];

        const Matrix anchors = first_rows(tp.feat_a, n_gen);
        const Matrix sim = kernels::cosine_similarity(anchors, tp.feat_b, g.sim_t);
        auto pl = pair_loss(sim, diagonal(n_gen));
        auto cg = kernels::cosine_similarity_backward(anchors, tp.feat_b, g.sim_t, pl.grad);
        tu.d_feat_a = Matrix(n_teacher, tp.feat_a.cols());
        for (std::size_t i = 0; i < cg.d_left.data().size(); ++i) tu.d_feat_a.data()[i] = g.w.pair * cg.d_left.data()[i];
        tu.d_feat_b = cg.d_right;
        for (auto& v : tu.d_feat_b.data()) v *= g.w.pair;

        Matrix unp_feat(g.y_unp.size(), sp.feat.cols());
        std::copy(sp.feat.data().begin() + static_cast<long>(n_gen * sp.feat.cols()), sp.feat.data().end(),
                  unp_feat.data().begin());
        auto pr = proto_loss(unp_feat, protos, ProtoAssignment::TrueClass, assigned);
        su.d_feat = Matrix(y_student.size(), sp.feat.cols());
        for (std::size_t i = 0; i < pr.grad.data().size(); ++i)
            su.d_feat.data()[n_gen * sp.feat.cols() + i] = g.w.proto * pr.grad.data()[i];
        return {g.teacher.backward(tp, tu), g.student.backward(sp, su)};
    }
};

Outcome criterion_gradients(int instances) {
    const auto t0 = Clock::now();
    Rng rng(derive_seed(2024, {1}));
    const char* names[] = {"ce", "kd", "pair", "proto", "total"};
    double worst[5] = {};
    for (int k = 0; k < instances; ++k) {
        GradInstance g = make_instance(rng);
        const std::size_t n_gen = g.y_gen.size();

        // ce through the teacher on genuine pairs
        {
            auto f = [&] { return ce_loss(g.teacher.forward(g.a_gen, g.b_gen).logits, g.y_gen).value; };
            const auto pass = g.teacher.forward(g.a_gen, g.b_gen);
            TeacherUpstream up;
            up.d_logits = ce_loss(pass.logits, g.y_gen).grad;
            worst[0] = std::max(worst[0], fd_check(g.teacher.params(), g.teacher.backward(pass, up), f));
        }
        // kd through the student against fixed teacher logits
        {
            const Matrix target = random_matrix(rng, n_gen, static_cast<std::size_t>(g.student.num_classes()), 2.0);
            auto f = [&] { return kd_loss(g.student.forward(g.a_gen).logits, target, g.kd_t).value; };
            const auto pass = g.student.forward(g.a_gen);
            StudentUpstream up;
            up.d_logits = kd_loss(pass.logits, target, g.kd_t).grad;
            worst[1] = std::max(worst[1], fd_check(g.student.params(), g.student.backward(pass, up), f));
        }
        // pair through both teacher encoders, donors as extra candidates
        {
            const Matrix a = vstack(g.a_gen, g.a_pse), b = vstack(g.b_gen, g.b_donor);
            auto f = [&] {
                const auto p = g.teacher.forward(a, b);
                return pair_loss(kernels::cosine_similarity(first_rows(p.feat_a, n_gen), p.feat_b, g.sim_t),
                                 diagonal(n_gen))
                    .value;
            };
            const auto pass = g.teacher.forward(a, b);
            const Matrix anchors = first_rows(pass.feat_a, n_gen);
            auto pl = pair_loss(kernels::cosine_similarity(anchors, pass.feat_b, g.sim_t), diagonal(n_gen));
            auto cg = kernels::cosine_similarity_backward(anchors, pass.feat_b, g.sim_t, pl.grad);
            TeacherUpstream up;
            up.d_feat_a = Matrix(a.rows(), pass.feat_a.cols());
            std::copy(cg.d_left.data().begin(), cg.d_left.data().end(), up.d_feat_a.data().begin());
            up.d_feat_b = cg.d_right;
            worst[2] = std::max(worst[2], fd_check(g.teacher.params(), g.teacher.backward(pass, up), f));
        }
        // proto through the student; assignment fixed at the base point
        {
            PrototypeSet protos;
            protos.dim = g.student.feature_dim();
            for (int c = 0; c < g.student.num_classes(); ++c) {
                ClassPrototype z;
                for (int d = 0; d < protos.dim; ++d) z.z.push_back(rng.normal());
                z.count = 1;
                z.stale = false;
                protos.classes.push_back(std::move(z));
            }
            const auto pass = g.student.forward(g.a_unp);
            const auto base = proto_loss(pass.feat, protos);
            auto f = [&] {
                return proto_loss(g.student.forward(g.a_unp).feat, protos, ProtoAssignment::TrueClass, base.assigned).value;
            };
            StudentUpstream up;
            up.d_feat = base.grad;
            worst[3] = std::max(worst[3], fd_check(g.student.params(), g.student.backward(pass, up), f));
        }
        // total over teacher and student parameters
        {
            const TotalObjective obj(g);
            auto [gt, gs] = obj.gradient();
            auto f = [&] { return obj.value(); };
            worst[4] = std::max({worst[4], fd_check(g.teacher.params(), gt, f), fd_check(g.student.params(), gs, f)});
        }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = secs < 120.0;
    std::ostringstream d;
    d << instances << " instances, max rel err";
    for (int i = 0; i < 5; ++i) {
        d << ' ' << names[i] << '=' << fmt("%.2e", worst[i]);
        o.pass = o.pass && worst[i] < 1e-4;
    }
    d << ", " << fmt("%.1f", secs) << " s";
    o.detail = d.str();
    return o;
}

// ---------------------------------------------------------------------------
// 2. oracle equivalence

double brute_mcc(long tp, long fp, long tn, long fn) {
    const double den = static_cast<double>(tp + fp) * static_cast<double>(tp + fn) * static_cast<double>(tn + fp) *
                       static_cast<double>(tn + fn);
    if (den == 0) return 0.0;
    return (static_cast<double>(tp) * static_cast<double>(tn) - static_cast<double>(fp) * static_cast<double>(fn)) /
           std::sqrt(den);
}

double brute_auc(const std::vector<int>& y, const std::vector<double>& s) {
    double wins = 0;
    long pairs = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                ++pairs;
                wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return wins / static_cast<double>(pairs);
}

// Student t density integrated with composite Simpson from 0 to |t|.
double brute_t_cdf(double t, double df) {
    const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
    auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
    const double x = std::abs(t);
    const int n = 200000;
    const double h = x / n;
    double s = pdf(0) + pdf(x);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
    const double half = s * h / 3;
    return t >= 0 ? 0.5 + half : 0.5 - half;
}

Outcome criterion_oracles(int instances) {
    Rng rng(derive_seed(2024, {2}));
    long mismatched_counts = 0;
    double worst_real = 0.0, worst_t = 0.0;
    for (int k = 0; k < instances; ++k) {
        // metrics
        const int n = uniform_int(rng, 4, 40);
        std::vector<int> y(static_cast<std::size_t>(n)), pred(y.size());
        std::vector<double> s(y.size());
        for (int i = 0; i < n; ++i) {
            y[i] = i < 2 ? i : uniform_int(rng, 0, 1);
            // coarse scores so ties occur
            s[i] = std::round(rng.uniform() * 8 + 2 * y[i] * rng.uniform()) / 10;
            pred[i] = s[i] > 0.5 ? 1 : 0;
        }
        long tp = 0, fp = 0, tn = 0, fn = 0;
        for (int i = 0; i < n; ++i) {
            tp += y[i] == 1 && pred[i] == 1;
            fp += y[i] == 0 && pred[i] == 1;
            tn += y[i] == 0 && pred[i] == 0;
            fn += y[i] == 1 && pred[i] == 0;
        }
        const Confusion c = confusion(y, pred);
        mismatched_counts += !(c.tp == tp && c.fp == fp && c.tn == tn && c.fn == fn);
        const auto [sen, spe] = sen_spe(c);
        worst_real = std::max({worst_real, std::abs(mcc(c) - brute_mcc(tp, fp, tn, fn)),
                               std::abs(auc(y, s) - brute_auc(y, s)),
                               std::abs(sen - static_cast<double>(tp) / static_cast<double>(tp + fn)),
                               std::abs(spe - static_cast<double>(tn) / static_cast<double>(tn + fp))});

        // prototype means
        const int classes = uniform_int(rng, 2, 4), dim = uniform_int(rng, 1, 6), rows = uniform_int(rng, 1, 12);
        const Matrix feats = random_matrix(rng, rows, dim);
        std::vector<int> labels(static_cast<std::size_t>(rows));
        for (auto& l : labels) l = uniform_int(rng, 0, classes - 1);
        const auto protos = compute_batch_prototypes(feats, labels, classes);
        for (int cl = 0; cl < classes; ++cl) {
            long count = 0;
            std::vector<double> sum(static_cast<std::size_t>(dim), 0.0);
            for (int r = 0; r < rows; ++r)
                if (labels[r] == cl) {
                    ++count;
                    for (int d = 0; d < dim; ++d) sum[d] += feats(r, d);
                }
            const auto& p = protos.classes[static_cast<std::size_t>(cl)];
            mismatched_counts += p.count != count || p.stale != (count == 0);
            if (count > 0)
                for (int d = 0; d < dim; ++d)
                    worst_real = std::max(worst_real, std::abs(p.z[d] - sum[d] / static_cast<double>(count)));
        }

        // paired t-test
        const int m = uniform_int(rng, 3, 10);
        std::vector<double> a(static_cast<std::size_t>(m)), b(a.size());
        const double shift = rng.uniform(-0.1, 0.1);
        for (int i = 0; i < m; ++i) {
            a[i] = rng.uniform(0.5, 0.9);
            b[i] = a[i] + shift + 0.05 * rng.normal();
        }
        double mean = 0;
        for (int i = 0; i < m; ++i) mean += (a[i] - b[i]) / m;
        double ss = 0;
        for (int i = 0; i < m; ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
        const double t = mean / std::sqrt(ss / (m - 1) / m);
        const double p = 2 * (1 - brute_t_cdf(std::abs(t), m - 1));
        const auto res = paired_ttest(a, b);
        mismatched_counts += res.df != m - 1;
        worst_real = std::max({worst_real, std::abs(res.t - t) / std::max(1.0, std::abs(t)), std::abs(res.p - p)});
    }

    // Upper-tail critical values at df = 4 (one-sided levels 0.1 .. 0.0005).
    const std::pair<double, double> table[] = {{1.5332062740589432, 0.9},  {2.131846786326649, 0.95},
                                               {2.7764451051977987, 0.975}, {3.7469473879811366, 0.99},
                                               {4.604094871415897, 0.995},  {8.610301581379899, 0.9995}};
    for (auto [tv, q] : table) worst_t = std::max(worst_t, std::abs(student_t_cdf(tv, 4) - q));

    Outcome o;
    o.pass = mismatched_counts == 0 && worst_real <= 1e-9 && worst_t <= 1e-6;
    o.detail = std::to_string(instances) + " fuzzed instances, count mismatches " + std::to_string(mismatched_counts) +
               ", max real diff " + fmt("%.2e", worst_real) + ", t-CDF table diff " + fmt("%.2e", worst_t);
    return o;
}

// ---------------------------------------------------------------------------
// 3. Bonferroni

Outcome criterion_bonferroni() {
    const double a = bonferroni(0.05, 24);
    const std::string printed = fmt("%.5f", a);
    Outcome o;
    o.pass = std::abs(a - 0.05 / 24) < 1e-15 && printed == "0.00208";
    o.detail = "alpha/24 = " + fmt("%.10f", a) + " -> " + printed;
    return o;
}

// ---------------------------------------------------------------------------
// 4-7. ablation structure

struct AblationMeans {
    std::map<std::pair<std::string, double>, double> mcc;  // mean over seeds of fold means
    double max_ratio_departure = 0.0;
    double seconds = 0.0;

    double at(const std::string& arm, double rate) const { return mcc.at({arm, rate}); }
};

AblationMeans run_ablation(const fs::path& config, const fs::path& work, const std::vector<std::uint64_t>& seeds,
                           int jobs) {
    const auto t0 = Clock::now();
    AblationMeans out;
    for (auto seed : seeds) {
        auto cfg = load_scenario_config(config);
        cfg.seed = seed;
        cfg.output_dir = (work / ("ablation_seed" + std::to_string(seed))).string();
        const auto summary = run_scenario(cfg, jobs);
        for (const auto& c : summary.cells)
            out.mcc[{c.arm, c.missing_rate}] += c.mean[0] / static_cast<double>(seeds.size());
        for (const auto& r : summary.runs)
            if (r.arm == "pcm_ams")
                for (const auto& e : r.epochs)
                    out.max_ratio_departure = std::max(out.max_ratio_departure, std::abs(e.ratio - 0.5));
    }
    out.seconds = seconds_since(t0);
    return out;
}

std::string chain(std::initializer_list<std::pair<const char*, double>> xs) {
    std::string s;
    for (auto [name, v] : xs) s += (s.empty() ? "" : " <= ") + std::string(name) + " " + fmt("%.4f", v);
    return s;
}

// ---------------------------------------------------------------------------
// 8. determinism

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

Outcome criterion_determinism(const fs::path& config, const fs::path& work) {
    std::vector<fs::path> dirs = {work / "determinism_a", work / "determinism_b"};
    for (const auto& d : dirs) {
        fs::remove_all(d);
        auto cfg = load_scenario_config(config);
        cfg.output_dir = d.string();
        cfg.write_run_artifacts = true;
        run_scenario(cfg);
    }
    long compared = 0, differing = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
        const auto name = entry.path().filename().string();
        if (name != "metrics.csv" && name != "trace.csv" && name != "ams_trace.csv" && name != "summary.csv") continue;
        const auto other = dirs[1] / fs::relative(entry.path(), dirs[0]);
        ++compared;
        differing += !fs::exists(other) || slurp(entry.path()) != slurp(other);
    }
    Outcome o;
    o.pass = compared > 1 && differing == 0;
    o.detail = std::to_string(compared) + " metrics/trace CSVs compared, " + std::to_string(differing) + " differ";
    return o;
}

// ---------------------------------------------------------------------------
// 9. degeneration to plain CE + KD

std::vector<reference::Mlp> to_reference(const Network& net) {
    std::vector<reference::Mlp> parts;
    const auto params = net.params();
    for (const auto& p : net.parts()) {
        std::size_t used = 0;
        parts.push_back(reference::make_mlp(p.mlp.spec().layer_widths, p.mlp.spec().activation == Activation::Tanh,
                                            params.data() + p.mlp.offset(), &used));
    }
    return parts;
}

Outcome criterion_degeneration(int min_steps) {
    DatasetConfig d;
    d.samples_per_class = 20;
    d.dim_a = 6;
    d.dim_b = 5;
    d.latent_dim = 4;
    d.class_separation = 2.0;
    d.seed = 77;
    const auto train = apply_missingness(generate_dataset(d), 0.5, 78);

    ArchConfig arch;
    arch.dim_a = 6;
    arch.dim_b = 5;
    arch.feature_dim = 8;
    auto [teacher, student] = make_networks(arch, 79);

    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = (min_steps + 4) / 5;  // 40 samples -> 5 steps per epoch
    cfg.learning_rate = 5e-3;
    cfg.weight_decay = 1e-3;
    cfg.pcm_enabled = false;
    cfg.ams_mode = AmsMode::None;
    cfg.loss_weights = {1.0, 1.0, 0.7, 0.0, 0.0};
    cfg.kd_temperature = 2.5;
    cfg.seed = 80;

    reference::Config rc;
    rc.w_tea = 1.0;
    rc.w_stu = 1.0;
    rc.w_kl = 0.7;
    rc.temperature = 2.5;
    rc.weight_decay = 1e-3;
    rc.clip = cfg.grad_clip;
    reference::Trainer ref(to_reference(teacher), to_reference(student), rc);

    std::map<std::int64_t, reference::Example> data;
    for (const auto& s : train) data[s.id] = {s.label, s.feat_a, s.feat_b.value_or(std::vector<double>{})};

    const long total = steps_per_epoch(train.size(), cfg.batch_size) * cfg.epochs;
    long steps = 0;
    double worst = 0.0;
    FitHooks hooks;
    hooks.on_step = [&](const StepTrace& st, const BatchPlan& plan) {
        const auto r = ref.step(data, plan.genuine, plan.unpaired_student_only,
                                reference::cosine(st.step, total, cfg.learning_rate));
        worst = std::max({worst, std::abs(st.report.l_tea - r.tea), std::abs(st.report.l_stu - r.stu),
                          std::abs(st.report.l_kl - r.kl), std::abs(st.report.l_proto), std::abs(st.report.total - r.total)});
        ++steps;
    };
    const auto res = fit(std::move(teacher), std::move(student), train, cfg, hooks);

    const auto ref_student = reference::flatten(ref.student());
    double param_diff = 0.0;
    for (std::size_t i = 0; i < ref_student.size(); ++i)
        param_diff = std::max(param_diff, std::abs(ref_student[i] - res.student.params()[i]));

    Outcome o;
    o.pass = steps >= min_steps && worst <= 1e-10;
    o.detail = std::to_string(steps) + " steps, max term diff " + fmt("%.2e", worst) + ", final student param diff " +
               fmt("%.2e", param_diff);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::string work = "acceptance_work";
    std::string ablation = PGAD_SOURCE_DIR "/configs/ablation.json";
    std::string smoke = PGAD_SOURCE_DIR "/configs/smoke.json";
    int jobs = 0;
    std::vector<int> only;
    app.add_option("--work", work, "Scratch directory");
    app.add_option("--ablation", ablation, "Ablation scenario config");
    app.add_option("--smoke", smoke, "Small scenario config for the determinism check");
    app.add_option("--jobs", jobs, "Concurrent runs (0: one per hardware thread)");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);
    if (jobs <= 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    fs::create_directories(work);

    auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };
    int failures = 0;
    auto report = [&](int id, const char* title, const Outcome& o) {
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << title << "): " << o.detail << std::endl;
        failures += !o.pass;
    };
    auto guarded = [&](int id, const char* title, const std::function<Outcome()>& f) {
        if (!wanted(id)) return;
        try {
            report(id, title, f());
        } catch (const std::exception& e) {
            report(id, title, Outcome{false, std::string("error: ") + e.what()});
        }
    };

    guarded(1, "gradient suite", [] { return criterion_gradients(100); });
    guarded(2, "oracle equivalence", [] { return criterion_oracles(1000); });
    guarded(3, "Bonferroni threshold", [] { return criterion_bonferroni(); });

    if (wanted(4) || wanted(5) || wanted(6) || wanted(7)) {
        try {
            const auto m = run_ablation(ablation, work, {1, 2, 3}, jobs);
            const double base = m.at("baseline", 0.5), pcm = m.at("pcm", 0.5), full = m.at("pcm_ams", 0.5);
            const double all = m.at("proto_all", 0.5), fixed = m.at("ams_fixed", 0.5);
            const double f2 = m.at("pcm_ams", 0.2), f7 = m.at("pcm_ams", 0.7);
            const std::string timing = ", 3 seeds in " + fmt("%.0f", m.seconds) + " s";
            guarded(4, "directional ablation", [&] {
                const bool in_band = base >= 0.6 && base <= 0.8;
                return Outcome{base <= pcm && pcm <= full && full - base >= 0.02 && m.seconds < 900.0,
                               chain({{"baseline", base}, {"+PCM", pcm}, {"+PCM+AMS", full}}) + ", gain " +
                                   fmt("%+.4f", full - base) + ", baseline " + (in_band ? "inside" : "outside") +
                                   " 0.6-0.8" + timing};
            });
            guarded(5, "missing-rate degradation", [&] {
                return Outcome{f2 >= full && full >= f7,
                               "full model mr0.2 " + fmt("%.4f", f2) + " >= mr0.5 " + fmt("%.4f", full) + " >= mr0.7 " +
                                   fmt("%.4f", f7)};
            });
            guarded(6, "prototype strategy ordering", [&] {
                return Outcome{base <= all && all <= full,
                               chain({{"no prototype", base}, {"all", all}, {"paired", full}})};
            });
            guarded(7, "AMS ordering", [&] {
                return Outcome{pcm <= fixed && fixed <= full && m.max_ratio_departure >= 0.02,
                               chain({{"no AMS", pcm}, {"fixed", fixed}, {"dynamic", full}}) +
                                   ", max |r - 0.5| " + fmt("%.4f", m.max_ratio_departure)};
            });
        } catch (const std::exception& e) {
            for (int c = 4; c <= 7; ++c)
                if (wanted(c)) report(c, "ablation", Outcome{false, std::string("error: ") + e.what()});
        }
    }

    guarded(8, "determinism", [&] { return criterion_determinism(smoke, work); });
    guarded(9, "degeneration to CE + KD", [] { return criterion_degeneration(50); });

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
