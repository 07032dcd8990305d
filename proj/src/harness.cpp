#include "pgad/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pgad/csv.hpp"
#include "pgad/error.hpp"
#include "pgad/rng.hpp"

namespace pgad {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// config

void ArmConfig::validate() const {
    require(!name.empty(), ErrorKind::Config, "arm name must not be empty");
    require(name.find(',') == std::string::npos && name.find('/') == std::string::npos, ErrorKind::Config,
            "arm name '" + name + "' must not contain ',' or '/'");
    if (fixed_ratio)
        require(*fixed_ratio >= 0.0 && *fixed_ratio <= 1.0, ErrorKind::Config,
                "arm " + name + ": fixed_ratio must lie in [0,1]");
    if (loss_weights) loss_weights->validate();
    if (missing_rates)
        for (double r : *missing_rates)
            require(r >= 0.0 && r < 1.0, ErrorKind::Config, "arm " + name + ": missing rates must lie in [0,1)");
}

TrainConfig ArmConfig::apply(TrainConfig base) const {
    base.pcm_enabled = pcm && prototype_strategy != PrototypeStrategy::None;
    base.prototype_strategy = prototype_strategy;
    base.ams_mode = ams;
    if (fixed_ratio) base.fixed_ratio = *fixed_ratio;
    if (loss_weights) base.loss_weights = *loss_weights;
    return base;
}

void ScenarioConfig::validate() const {
    auto ds = dataset;
    ds.validate();
    train.validate();
    require(k_folds >= 2, ErrorKind::Config, "k_folds must be >= 2");
    require(!arms.empty(), ErrorKind::Config, "arms must list at least one arm");
    require(alpha > 0.0 && alpha < 1.0, ErrorKind::Config, "alpha must lie in (0,1)");
    for (double r : missing_rates)
        require(r >= 0.0 && r < 1.0, ErrorKind::Config, "missing_rates must lie in [0,1)");
    std::set<std::string> names;
    for (const auto& a : arms) {
        a.validate();
        require(names.insert(a.name).second, ErrorKind::Config, "duplicate arm name '" + a.name + "'");
        require(!rates_for(a).empty(), ErrorKind::Config, "arm " + a.name + " has no missing rate to run");
    }
    if (baseline_arm)
        require(names.contains(*baseline_arm), ErrorKind::Config, "baseline_arm '" + *baseline_arm + "' is not an arm");
    require(dataset.num_classes == 2, ErrorKind::Config, "dataset.num_classes: evaluation metrics are binary");
}

std::vector<double> ScenarioConfig::rates_for(const ArmConfig& arm) const {
    return arm.missing_rates ? *arm.missing_rates : missing_rates;
}

namespace {

class JsonReader {
public:
    JsonReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        require(j_.is_object(), ErrorKind::Config, path_ + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            fail(ErrorKind::Config, path_ + "." + key + " has the wrong type");
        }
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }
    const json& at(const char* key) const { return j_.at(key); }
    std::string child(const char* key) const { return path_ + "." + key; }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            require(seen_.contains(k), ErrorKind::Config, "unknown field " + path_ + "." + k);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

LossWeights parse_weights(const json& j, const std::string& path) {
    LossWeights w;
    JsonReader r(j, path);
    r.get("tea", w.tea);
    r.get("stu", w.stu);
    r.get("kl", w.kl);
    r.get("pair", w.pair);
    r.get("proto", w.proto);
    r.finish();
    return w;
}

void parse_dataset(const json& j, DatasetConfig& d) {
    JsonReader r(j, "dataset");
    r.get("num_classes", d.num_classes);
    r.get("samples_per_class", d.samples_per_class);
    r.get("dim_a", d.dim_a);
    r.get("dim_b", d.dim_b);
    r.get("class_separation", d.class_separation);
    r.get("noise_scale", d.noise_scale);
    r.get("latent_dim", d.latent_dim);
    r.get("clusters_per_class", d.clusters_per_class);
    r.get("label_noise", d.label_noise);
    r.get("nuisance_scale", d.nuisance_scale);
    if (r.has("noise_scale_b")) {
        double v = 0.0;
        r.get("noise_scale_b", v);
        d.noise_scale_b = v;
    }
    if (r.has("nuisance_scale_b")) {
        double v = 0.0;
        r.get("nuisance_scale_b", v);
        d.nuisance_scale_b = v;
    }
    // missing_rate and seed are driven by the scenario; accepted for symmetry.
    r.get("missing_rate", d.missing_rate);
    r.get("seed", d.seed);
    r.finish();
}

void parse_arch(const json& j, ArchConfig& a) {
    JsonReader r(j, "arch");
    r.get("feature_dim", a.feature_dim);
    r.get("encoder_hidden", a.encoder_hidden);
    r.get("fusion_hidden", a.fusion_hidden);
    std::string act(to_string(a.activation));
    r.get("activation", act);
    a.activation = activation_from_string(act);
    r.finish();
}

void parse_train(const json& j, TrainConfig& t) {
    JsonReader r(j, "train");
    r.get("epochs", t.epochs);
    r.get("batch_size", t.batch_size);
    r.get("learning_rate", t.learning_rate);
    r.get("weight_decay", t.weight_decay);
    std::string schedule = "cosine";
    r.get("lr_schedule", schedule);
    require(schedule == "cosine", ErrorKind::Config, "train.lr_schedule: only cosine is supported");
    r.get("kd_temperature", t.kd_temperature);
    r.get("sim_temperature", t.sim_temperature);
    if (r.has("loss_weights")) t.loss_weights = parse_weights(r.at("loss_weights"), r.child("loss_weights"));
    std::string ams(to_string(t.ams_mode));
    r.get("ams_mode", ams);
    t.ams_mode = ams_mode_from_string(ams);
    r.get("fixed_ratio", t.fixed_ratio);
    r.get("theta_init", t.theta_init);
    r.get("pcm_enabled", t.pcm_enabled);
    std::string strategy(to_string(t.prototype_strategy));
    r.get("prototype_strategy", strategy);
    t.prototype_strategy = prototype_strategy_from_string(strategy);
    std::string assign(to_string(t.proto_assignment));
    r.get("proto_assignment", assign);
    t.proto_assignment = proto_assignment_from_string(assign);
    r.get("proto_momentum", t.proto_momentum);
    r.get("pcm_on_pseudo", t.pcm_on_pseudo);
    r.get("teacher_pretrain_epochs", t.teacher_pretrain_epochs);
    r.get("grad_clip", t.grad_clip);
    r.get("seed", t.seed);
    r.finish();
}

ArmConfig parse_arm(const json& j, std::size_t index) {
    ArmConfig a;
    JsonReader r(j, "arms[" + std::to_string(index) + "]");
    r.get("name", a.name);
    r.get("pcm", a.pcm);
    std::string ams(to_string(a.ams));
    r.get("ams", ams);
    a.ams = ams_mode_from_string(ams);
    if (r.has("fixed_ratio")) {
        double v = 0.0;
        r.get("fixed_ratio", v);
        a.fixed_ratio = v;
    }
    std::string strategy(to_string(a.prototype_strategy));
    r.get("prototype_strategy", strategy);
    a.prototype_strategy = prototype_strategy_from_string(strategy);
    if (r.has("loss_weights")) a.loss_weights = parse_weights(r.at("loss_weights"), r.child("loss_weights"));
    if (r.has("missing_rates")) {
        std::vector<double> rates;
        r.get("missing_rates", rates);
        a.missing_rates = rates;
    }
    r.finish();
    return a;
}

}  // namespace

ScenarioConfig parse_scenario_config(std::istream& is) {
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
    }
    ScenarioConfig cfg;
    JsonReader r(j, "config");
    r.get("name", cfg.name);
    r.get("seed", cfg.seed);
    if (r.has("dataset")) parse_dataset(r.at("dataset"), cfg.dataset);
    if (r.has("arch")) parse_arch(r.at("arch"), cfg.arch);
    if (r.has("train")) parse_train(r.at("train"), cfg.train);
    r.get("missing_rates", cfg.missing_rates);
    if (r.has("arms")) {
        const auto& arms = r.at("arms");
        require(arms.is_array(), ErrorKind::Config, "config.arms must be an array");
        for (std::size_t i = 0; i < arms.size(); ++i) cfg.arms.push_back(parse_arm(arms[i], i));
    }
    r.get("k_folds", cfg.k_folds);
    r.get("output_dir", cfg.output_dir);
    if (r.has("baseline_arm")) {
        std::string b;
        r.get("baseline_arm", b);
        cfg.baseline_arm = b;
    }
    r.get("alpha", cfg.alpha);
    r.get("write_run_artifacts", cfg.write_run_artifacts);
    r.finish();
    cfg.arch.dim_a = cfg.dataset.dim_a;
    cfg.arch.dim_b = cfg.dataset.dim_b;
    cfg.arch.num_classes = cfg.dataset.num_classes;
    cfg.validate();
    return cfg;
}

ScenarioConfig load_scenario_config(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open config " + path.string());
    return parse_scenario_config(in);
}

std::string scenario_label(double missing_rate) { return "mr" + csv::format_double(missing_rate); }

// ---------------------------------------------------------------------------
// seeds

namespace {
std::uint64_t rate_key(double rate) { return static_cast<std::uint64_t>(std::llround(rate * 1e6)); }
}  // namespace

ScenarioSeeds::ScenarioSeeds(std::uint64_t root_seed)
    : root(root_seed), data(derive_seed(root_seed, {1})), folds(derive_seed(root_seed, {2})) {}

std::uint64_t ScenarioSeeds::missingness(double rate, int fold) const {
    return derive_seed(root, {3, rate_key(rate), static_cast<std::uint64_t>(fold)});
}

std::uint64_t ScenarioSeeds::training(double rate, int fold) const {
    return derive_seed(root, {4, rate_key(rate), static_cast<std::uint64_t>(fold)});
}

// ---------------------------------------------------------------------------
// evaluation helpers

std::vector<double> student_scores(const StudentNet& student, std::span<const Sample> samples) {
    require(student.num_classes() == 2, ErrorKind::Metric, "scores need a binary student");
    if (samples.empty()) return {};
    const auto pass = student.forward(stack_feat_a(samples));
    std::vector<double> scores(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        // softmax over two logits
        scores[i] = 1.0 / (1.0 + std::exp(pass.logits(i, 0) - pass.logits(i, 1)));
    }
    return scores;
}

void export_embeddings(const StudentNet& student, std::span<const Sample> samples, std::ostream& os) {
    const auto h = static_cast<std::size_t>(student.feature_dim());
    os << "id,label,paired";
    for (std::size_t k = 0; k < h; ++k) os << ",h_" << k;
    os << '\n';
    if (samples.empty()) return;
    const auto pass = student.forward(stack_feat_a(samples));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        os << samples[i].id << ',' << samples[i].label << ',' << (samples[i].paired() ? 1 : 0);
        for (double v : pass.feat.row(i)) os << ',' << csv::format_double(v);
        os << '\n';
    }
}

double metric_value(const MetricsRecord& r, int metric) {
    switch (metric) {
        case 0: return r.mcc;
        case 1: return r.auc;
        case 2: return r.sen;
        case 3: return r.spe;
    }
    fail(ErrorKind::Range, "metric index out of range");
}

const SummaryCell& RunSummary::cell(std::string_view arm, double missing_rate) const {
    for (const auto& c : cells)
        if (c.arm == arm && c.missing_rate == missing_rate) return c;
    fail(ErrorKind::Protocol, "no summary cell for arm " + std::string(arm) + " at " + scenario_label(missing_rate));
}

RunSummary summarize(std::vector<RunRecord> runs) {
    RunSummary s;
    s.runs = std::move(runs);
    // Preserve first-appearance order of (arm, rate).
    std::vector<std::pair<std::string, double>> keys;
    for (const auto& r : s.runs) {
        const std::pair<std::string, double> key{r.arm, r.missing_rate};
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    for (const auto& [arm, rate] : keys) {
        SummaryCell cell;
        cell.arm = arm;
        cell.missing_rate = rate;
        for (int m = 0; m < 4; ++m) {
            std::vector<double> vals;
            for (const auto& r : s.runs)
                if (r.arm == arm && r.missing_rate == rate) vals.push_back(metric_value(r.metrics, m));
            cell.folds = static_cast<int>(vals.size());
            std::tie(cell.mean[m], cell.std[m]) = mean_std(vals);
        }
        s.cells.push_back(cell);
    }
    return s;
}

// ---------------------------------------------------------------------------
// comparisons

std::vector<ComparisonResult> compare_arms(std::span<const RunRecord> runs, const std::string& baseline,
                                           const std::string& other, double missing_rate, double alpha,
                                           int comparisons) {
    auto collect = [&](const std::string& arm) {
        std::map<int, MetricsRecord> by_fold;
        for (const auto& r : runs)
            if (r.arm == arm && r.missing_rate == missing_rate) by_fold[r.metrics.fold] = r.metrics;
        return by_fold;
    };
    const auto a = collect(other);
    const auto b = collect(baseline);
    require(!a.empty() && !b.empty(), ErrorKind::Protocol,
            "no runs for " + other + " or " + baseline + " at " + scenario_label(missing_rate));
    require(a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(),
                                               [](const auto& x, const auto& y) { return x.first == y.first; }),
            ErrorKind::Protocol, "fold mismatch between " + other + " and " + baseline);
    const double threshold = bonferroni(alpha, comparisons);
    std::vector<ComparisonResult> out;
    for (int m = 0; m < 4; ++m) {
        std::vector<double> va, vb;
        for (const auto& [fold, rec] : a) va.push_back(metric_value(rec, m));
        for (const auto& [fold, rec] : b) vb.push_back(metric_value(rec, m));
        const auto tt = paired_ttest(va, vb);
        ComparisonResult c;
        c.method_a = other;
        c.method_b = baseline;
        c.metric = kMetricNames[m];
        c.t_statistic = tt.t;
        c.p_value = tt.p;
        c.alpha_corrected = threshold;
        c.significant = tt.p < threshold;
        c.degeneracy = tt.degeneracy;
        out.push_back(c);
    }
    return out;
}

std::vector<ComparisonResult> compare_all(std::span<const RunRecord> runs, const std::string& baseline, double alpha,
                                          int comparisons) {
    std::vector<std::string> arms;
    std::vector<double> rates;
    for (const auto& r : runs) {
        if (std::find(arms.begin(), arms.end(), r.arm) == arms.end()) arms.push_back(r.arm);
        if (std::find(rates.begin(), rates.end(), r.missing_rate) == rates.end()) rates.push_back(r.missing_rate);
    }
    require(std::find(arms.begin(), arms.end(), baseline) != arms.end(), ErrorKind::Protocol,
            "baseline arm '" + baseline + "' has no runs");
    if (comparisons <= 0) comparisons = std::max<int>(1, static_cast<int>(arms.size() - 1) * 4);
    auto has = [&](const std::string& arm, double rate) {
        return std::any_of(runs.begin(), runs.end(),
                           [&](const RunRecord& r) { return r.arm == arm && r.missing_rate == rate; });
    };
    std::vector<ComparisonResult> out;
    for (double rate : rates) {
        if (!has(baseline, rate)) continue;
        for (const auto& arm : arms) {
            if (arm == baseline || !has(arm, rate)) continue;
            auto res = compare_arms(runs, baseline, arm, rate, alpha, comparisons);
            for (auto& c : res) c.metric = scenario_label(rate) + ":" + c.metric;
            out.insert(out.end(), res.begin(), res.end());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV and report

void write_metrics_csv(std::ostream& os, std::span<const RunRecord> runs) {
    os << "method,scenario,fold,mcc,auc,sen,spe\n";
    for (const auto& r : runs) {
        os << r.arm << ',' << scenario_label(r.missing_rate) << ',' << r.metrics.fold;
        for (int m = 0; m < 4; ++m) os << ',' << csv::format_double(metric_value(r.metrics, m));
        os << '\n';
    }
}

std::vector<RunRecord> read_metrics_csv(std::istream& is) {
    std::string line;
    require(std::getline(is, line) && line.starts_with("method,scenario,fold,mcc,auc,sen,spe"), ErrorKind::Io,
            "metrics CSV header must be method,scenario,fold,mcc,auc,sen,spe");
    std::vector<RunRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = csv::split(line);
        require(f.size() == 7, ErrorKind::Io, "metrics CSV: wrong field count");
        RunRecord r;
        r.arm = std::string(f[0]);
        require(f[1].starts_with("mr"), ErrorKind::Io, "metrics CSV: scenario must look like mr<rate>");
        r.missing_rate = csv::parse_double(f[1].substr(2), "metrics CSV scenario");
        r.metrics.fold = static_cast<int>(csv::parse_int(f[2], "metrics CSV fold"));
        r.metrics.mcc = csv::parse_double(f[3], "metrics CSV");
        r.metrics.auc = csv::parse_double(f[4], "metrics CSV");
        r.metrics.sen = csv::parse_double(f[5], "metrics CSV");
        r.metrics.spe = csv::parse_double(f[6], "metrics CSV");
        out.push_back(std::move(r));
    }
    return out;
}

void write_comparisons_csv(std::ostream& os, std::span<const ComparisonResult> results) {
    os << "method_a,method_b,metric,t,p,significant,alpha_corrected\n";
    for (const auto& c : results)
        os << c.method_a << ',' << c.method_b << ',' << c.metric << ',' << csv::format_double(c.t_statistic) << ','
           << csv::format_double(c.p_value) << ',' << (c.significant ? 1 : 0) << ','
           << csv::format_double(c.alpha_corrected) << '\n';
}

void write_summary_csv(std::ostream& os, const RunSummary& summary) {
    os << "method,scenario,metric,mean,std,folds\n";
    for (const auto& c : summary.cells)
        for (int m = 0; m < 4; ++m)
            os << c.arm << ',' << scenario_label(c.missing_rate) << ',' << kMetricNames[m] << ','
               << csv::format_double(c.mean[m]) << ',' << csv::format_double(c.std[m]) << ',' << c.folds << '\n';
}

namespace {
std::string pct(double mean, double sd) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << 100.0 * mean << " ± " << 100.0 * sd;
    return os.str();
}
}  // namespace

void write_report_markdown(std::ostream& os, const ScenarioConfig& cfg, const RunSummary& summary) {
    os << "# " << cfg.name << "\n\n";
    os << "Stratified " << cfg.k_folds << "-fold cross-validation, seed " << cfg.seed
       << ". Mean ± sample std over folds, all metrics x100.\n\n";
    std::vector<double> rates;
    for (const auto& c : summary.cells)
        if (std::find(rates.begin(), rates.end(), c.missing_rate) == rates.end()) rates.push_back(c.missing_rate);
    std::sort(rates.begin(), rates.end());
    os << "| Missing rate | Arm | PCM | AMS | Prototypes | MCC | SEN | SPE | AUC |\n";
    os << "|---|---|---|---|---|---|---|---|---|\n";
    for (double rate : rates) {
        for (const auto& arm : cfg.arms) {
            const auto it = std::find_if(summary.cells.begin(), summary.cells.end(), [&](const SummaryCell& c) {
                return c.arm == arm.name && c.missing_rate == rate;
            });
            if (it == summary.cells.end()) continue;
            const bool pcm = arm.pcm && arm.prototype_strategy != PrototypeStrategy::None;
            os << "| " << csv::format_double(rate) << " | " << arm.name << " | " << (pcm ? "yes" : "no") << " | "
               << to_string(arm.ams) << " | " << (pcm ? to_string(arm.prototype_strategy) : "none") << " | "
               << pct(it->mean[0], it->std[0]) << " | " << pct(it->mean[2], it->std[2]) << " | "
               << pct(it->mean[3], it->std[3]) << " | " << pct(it->mean[1], it->std[1]) << " |\n";
        }
    }
}

// ---------------------------------------------------------------------------
// run

namespace {

struct Job {
    const ArmConfig* arm;
    double rate;
    int fold;
};

fs::path run_dir(const fs::path& out, const Job& job) {
    return out / "runs" / job.arm->name / scenario_label(job.rate) / ("fold" + std::to_string(job.fold));
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), ErrorKind::Io, "cannot write " + path.string());
    return os;
}

RunRecord run_job(const ScenarioConfig& cfg, const ScenarioSeeds& seeds, std::span<const Sample> data,
                  const FoldSplit& fold, const Job& job, const fs::path& out) {
    const auto train_full = select_by_id(data, fold.train_ids);
    const auto train = apply_missingness(train_full, job.rate, seeds.missingness(job.rate, job.fold));
    const auto test = select_by_id(data, fold.test_ids);

    TrainConfig tc = job.arm->apply(cfg.train);
    tc.seed = seeds.training(job.rate, job.fold);
    auto [teacher, student] = make_networks(cfg.arch, tc.seed);

    FitHooks hooks;
    std::ofstream proto_os, ams_os;
    const fs::path dir = run_dir(out, job);
    if (cfg.write_run_artifacts) {
        fs::create_directories(dir);
        proto_os = open_out(dir / "prototypes.csv");
        write_prototypes_header(proto_os, cfg.arch.feature_dim, true);
        ams_os = open_out(dir / "ams_trace.csv");
        write_ams_trace_header(ams_os);
        hooks.on_epoch = [&](const EpochTrace& e, const TrainState& st) {
            if (tc.pcm_active()) {
                const auto& protos = tc.prototype_strategy == PrototypeStrategy::All && st.epoch_protos
                                         ? *st.epoch_protos
                                         : st.running;
                append_prototypes_rows(proto_os, protos, e.epoch);
            }
            append_ams_trace_row(ams_os, e.epoch, st.ams);
        };
    }

    auto result = fit(std::move(teacher), std::move(student), train, tc, hooks);

    std::vector<int> labels;
    for (const auto& s : test) labels.push_back(s.label);
    const auto scores = student_scores(result.student, test);
    RunRecord rec{job.arm->name, job.rate, evaluate_binary(labels, scores, job.fold), result.epochs};

    if (cfg.write_run_artifacts) {
        auto trace_os = open_out(dir / "trace.csv");
        write_epoch_trace_header(trace_os);
        for (const auto& e : result.epochs) append_epoch_trace_row(trace_os, e);
        auto student_os = open_out(dir / "student.ckpt");
        save_checkpoint(student_os, result.student);
        auto teacher_os = open_out(dir / "teacher.ckpt");
        save_checkpoint(teacher_os, result.teacher);
    }
    return rec;
}

}  // namespace

RunSummary run_scenario(const ScenarioConfig& cfg, int jobs) {
    cfg.validate();
    require(jobs >= 1, ErrorKind::Config, "--jobs must be >= 1");
    const ScenarioSeeds seeds(cfg.seed);
    const fs::path out(cfg.output_dir);
    fs::create_directories(out);

    DatasetConfig dc = cfg.dataset;
    dc.missing_rate = 0.0;
    dc.seed = seeds.data;
    const auto data = generate_dataset(dc);
    const auto folds = stratified_kfold(data, cfg.k_folds, seeds.folds);
    {
        auto os = open_out(out / "dataset.csv");
        write_dataset_csv(os, data);
        auto fos = open_out(out / "folds.csv");
        write_folds_csv(fos, folds);
    }

    std::vector<Job> work;
    for (const auto& arm : cfg.arms)
        for (double rate : cfg.rates_for(arm))
            for (int f = 0; f < cfg.k_folds; ++f) work.push_back(Job{&arm, rate, f});

    std::vector<RunRecord> records(work.size());
    std::vector<std::optional<Error>> errors(work.size());
    const auto n = static_cast<std::ptrdiff_t>(work.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs) if (jobs > 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& job = work[static_cast<std::size_t>(i)];
        try {
            records[static_cast<std::size_t>(i)] =
                run_job(cfg, seeds, data, folds[static_cast<std::size_t>(job.fold)], job, out);
        } catch (const Error& e) {
            errors[static_cast<std::size_t>(i)] = e;
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = Error(ErrorKind::Io, e.what());
        }
    }
    for (std::size_t i = 0; i < work.size(); ++i) {
        if (!errors[i]) continue;
        const auto& job = work[i];
        fail(errors[i]->kind(), "scenario aborted at arm=" + job.arm->name + " rate=" + csv::format_double(job.rate) +
                                    " fold=" + std::to_string(job.fold) + ": " + errors[i]->message());
    }

    auto summary = summarize(std::move(records));
    {
        auto os = open_out(out / "metrics.csv");
        write_metrics_csv(os, summary.runs);
        auto sos = open_out(out / "summary.csv");
        write_summary_csv(sos, summary);
        auto ros = open_out(out / "report.md");
        write_report_markdown(ros, cfg, summary);
    }
    if (cfg.baseline_arm) {
        const auto cmp = compare_all(summary.runs, *cfg.baseline_arm, cfg.alpha);
        auto os = open_out(out / "comparisons.csv");
        write_comparisons_csv(os, cmp);
    }
    return summary;
}

}  // namespace pgad
