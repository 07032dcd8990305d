#include "pgad/harness.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "pgad/csv.hpp"
#include "test_util.hpp"

using namespace pgad;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

std::string smoke_json(const fs::path& out, bool artifacts = true) {
    std::ostringstream os;
    os << R"({
  "name": "smoke",
  "seed": 7,
  "dataset": {"num_classes": 2, "samples_per_class": 12, "dim_a": 4, "dim_b": 4, "class_separation": 4.0,
              "latent_dim": 3},
  "arch": {"feature_dim": 4, "encoder_hidden": [6], "fusion_hidden": [6], "activation": "tanh"},
  "train": {"epochs": 2, "batch_size": 8, "learning_rate": 0.01},
  "missing_rates": [0.5],
  "k_folds": 2,
  "arms": [{"name": "base", "pcm": false, "ams": "none", "prototype_strategy": "none"},
           {"name": "full"}],
  "baseline_arm": "base",
  "write_run_artifacts": )"
       << (artifacts ? "true" : "false") << R"(,
  "output_dir": ")" << out.generic_string() << R"("
})";
    return os.str();
}

ScenarioConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_scenario_config(is);
}

RunRecord rec(std::string arm, double rate, int fold, double mcc, double auc = 0.5, double sen = 0.5,
              double spe = 0.5) {
    return RunRecord{std::move(arm), rate, MetricsRecord{fold, mcc, auc, sen, spe}, {}};
}

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = parse(smoke_json("/tmp/x"));
    CHECK(cfg.name == "smoke");
    CHECK(cfg.seed == 7);
    CHECK(cfg.dataset.samples_per_class == 12);
    CHECK(cfg.arch.dim_a == 4);
    CHECK(cfg.arch.activation == Activation::Tanh);
    CHECK(cfg.train.epochs == 2);
    REQUIRE(cfg.arms.size() == 2);
    CHECK(cfg.arms[0].ams == AmsMode::None);
    CHECK_FALSE(cfg.arms[0].apply(cfg.train).pcm_active());
    CHECK(cfg.arms[1].apply(cfg.train).pcm_active());
    CHECK(cfg.baseline_arm == "base");
    CHECK(cfg.rates_for(cfg.arms[0]) == std::vector<double>{0.5});
}

TEST_CASE("config errors") {
    CHECK_ERROR_KIND(parse(R"({"nmae": "x"})"), ErrorKind::Config);
    CHECK_ERROR_KIND(parse(R"({"train": {"epochs": 0}, "arms": [{"name": "a"}]})"), ErrorKind::Config);
    CHECK_ERROR_KIND(parse(R"({"train": {"lr_schedule": "step"}, "arms": [{"name": "a"}]})"), ErrorKind::Config);
    CHECK_ERROR_KIND(parse(R"({"arms": [{"name": "a", "ams": "sometimes"}]})"), ErrorKind::Config);
    CHECK_ERROR_KIND(parse(R"({"arms": [{"name": "a"}], "baseline_arm": "b"})"), ErrorKind::Config);
    CHECK_ERROR_KIND(parse(R"({"arms": [{"name": "a"}, {"name": "a"}]})"), ErrorKind::Config);
    CHECK_ERROR_KIND(parse(R"({"dataset": {"num_classes": 3}, "arms": [{"name": "a"}]})"), ErrorKind::Config);
    CHECK_ERROR_KIND(parse("{not json"), ErrorKind::Config);
    CHECK_ERROR_KIND(load_scenario_config("/nonexistent/pgad.json"), ErrorKind::Io);
}

TEST_CASE("scenario seeds") {
    const ScenarioSeeds a(1), b(1), c(2);
    CHECK(a.data == b.data);
    CHECK(a.data != c.data);
    CHECK(a.data != a.folds);
    CHECK(a.training(0.5, 0) == b.training(0.5, 0));
    CHECK(a.training(0.5, 0) != a.training(0.5, 1));
    CHECK(a.training(0.5, 0) != a.training(0.2, 0));
    CHECK(a.missingness(0.5, 0) != a.training(0.5, 0));
    CHECK(scenario_label(0.5) == "mr0.5");
    CHECK(scenario_label(0.2) == "mr0.2");
}

TEST_CASE("smoke run writes records, CSVs and artifacts") {
    const auto dir = test::scratch_dir("harness_smoke");
    const auto cfg = parse(smoke_json(dir));
    const auto summary = run_scenario(cfg);
    CHECK(summary.runs.size() == 4);  // 2 arms x 1 rate x 2 folds
    CHECK(summary.cells.size() == 2);
    for (const char* f : {"dataset.csv", "folds.csv", "metrics.csv", "summary.csv", "report.md", "comparisons.csv"})
        CHECK_MESSAGE(fs::exists(dir / f), f);
    const auto run = dir / "runs" / "full" / "mr0.5" / "fold1";
    for (const char* f : {"prototypes.csv", "ams_trace.csv", "trace.csv", "student.ckpt", "teacher.ckpt"})
        CHECK_MESSAGE(fs::exists(run / f), f);

    std::ifstream ms(dir / "metrics.csv");
    const auto back = read_metrics_csv(ms);
    REQUIRE(back.size() == 4);
    CHECK(back[0].arm == "base");
    CHECK(back[3].metrics.fold == 1);
    CHECK(back[2].metrics.mcc == summary.runs[2].metrics.mcc);
    CHECK(slurp(dir / "metrics.csv").rfind("method,scenario,fold,mcc,auc,sen,spe\n", 0) == 0);
}

TEST_CASE("runs are reproducible and independent of job count") {
    const auto d1 = test::scratch_dir("harness_det1");
    const auto d2 = test::scratch_dir("harness_det2");
    run_scenario(parse(smoke_json(d1)), 1);
    run_scenario(parse(smoke_json(d2)), 2);
    for (const char* f : {"dataset.csv", "folds.csv", "metrics.csv", "summary.csv", "comparisons.csv"})
        CHECK_MESSAGE(slurp(d1 / f) == slurp(d2 / f), f);
    const auto trace = fs::path("runs") / "full" / "mr0.5" / "fold0" / "trace.csv";
    CHECK(slurp(d1 / trace) == slurp(d2 / trace));
    CHECK(!slurp(d1 / trace).empty());
}

TEST_CASE("adding an arm leaves other arms unchanged") {
    const auto d1 = test::scratch_dir("harness_arm1");
    const auto d2 = test::scratch_dir("harness_arm2");
    auto one = parse(smoke_json(d1, false));
    one.arms.pop_back();
    const auto a = run_scenario(one);
    const auto b = run_scenario(parse(smoke_json(d2, false)));
    for (std::size_t i = 0; i < a.runs.size(); ++i) CHECK(a.runs[i].metrics.mcc == b.runs[i].metrics.mcc);
}

TEST_CASE("summarize is exact") {
    std::vector<RunRecord> runs = {rec("a", 0.5, 0, 0.1, 0.6), rec("a", 0.5, 1, 0.3, 0.8), rec("a", 0.5, 2, 0.8, 1.0),
                                   rec("b", 0.5, 0, 0.5)};
    const auto s = summarize(runs);
    const auto& c = s.cell("a", 0.5);
    CHECK(c.folds == 3);
    CHECK(c.mean[0] == doctest::Approx(0.4).epsilon(1e-15));
    const double sd = std::sqrt(((0.1 - 0.4) * (0.1 - 0.4) + (0.3 - 0.4) * (0.3 - 0.4) + (0.8 - 0.4) * (0.8 - 0.4)) / 2);
    CHECK(c.std[0] == doctest::Approx(sd).epsilon(1e-14));
    CHECK(c.mean[1] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(s.cell("b", 0.5).folds == 1);
    CHECK_ERROR_KIND(s.cell("c", 0.5), ErrorKind::Protocol);
}

TEST_CASE("compare_arms") {
    std::vector<RunRecord> runs;
    const double base[] = {0.61, 0.72, 0.55, 0.68, 0.70};
    for (int f = 0; f < 5; ++f) {
        runs.push_back(rec("base", 0.5, f, base[f]));
        runs.push_back(rec("same", 0.5, f, base[f]));
        runs.push_back(rec("up", 0.5, f, base[f] + 0.05));
    }
    SUBCASE("identical arms") {
        const auto r = compare_arms(runs, "base", "same", 0.5, 0.05, 24);
        REQUIRE(r.size() == 4);
        CHECK(r[0].metric == "mcc");
        CHECK(r[1].metric == "auc");
        CHECK(r[0].p_value == 1.0);
        CHECK_FALSE(r[0].significant);
        CHECK(r[0].degeneracy == TTestDegeneracy::NoEffect);
    }
    SUBCASE("constant offset") {
        const auto r = compare_arms(runs, "base", "up", 0.5, 0.05, 24);
        CHECK(r[0].degeneracy == TTestDegeneracy::PerfectSeparation);
        CHECK(r[0].p_value == 0.0);
        CHECK(r[0].significant);
        CHECK(r[0].alpha_corrected == doctest::Approx(0.05 / 24).epsilon(1e-15));
    }
    SUBCASE("default comparison count") {
        const auto all = compare_all(runs, "base", 0.05);
        CHECK(all.size() == 8);  // two arms x four metrics
        CHECK(all[0].metric == "mr0.5:mcc");
        CHECK(all[0].alpha_corrected == doctest::Approx(0.05 / 8).epsilon(1e-15));
    }
    SUBCASE("fold mismatch") {
        auto partial = runs;
        partial.pop_back();
        CHECK_ERROR_KIND(compare_arms(partial, "base", "up", 0.5, 0.05, 24), ErrorKind::Protocol);
    }
}

TEST_CASE("comparisons CSV") {
    ComparisonResult c;
    c.method_a = "base";
    c.method_b = "full";
    c.metric = "mr0.5:mcc";
    c.t_statistic = 2.5;
    c.p_value = 0.0667;
    c.alpha_corrected = 0.05 / 24;
    std::ostringstream os;
    write_comparisons_csv(os, std::span(&c, 1));
    CHECK(os.str() ==
          "method_a,method_b,metric,t,p,significant,alpha_corrected\nbase,full,mr0.5:mcc,2.5,0.0667,0,"
          + csv::format_double(0.05 / 24) + "\n");
}

TEST_CASE("student scores and embeddings") {
    ArchConfig arch;
    arch.dim_a = 3;
    arch.dim_b = 3;
    arch.feature_dim = 5;
    auto nets = make_networks(arch, 4);
    const auto& student = nets.second;
    std::vector<Sample> samples = {Sample{10, 0, {0.1, 0.2, 0.3}, std::nullopt},
                                   Sample{11, 1, {-1.0, 0.5, 2.0}, std::vector<double>{1, 2, 3}}};
    const auto scores = student_scores(student, samples);
    REQUIRE(scores.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto [feat, logits] = student.forward_one(samples[i].feat_a);
        CHECK(scores[i] == doctest::Approx(1.0 / (1.0 + std::exp(logits[0] - logits[1]))).epsilon(1e-14));
    }

    std::ostringstream os;
    export_embeddings(student, samples, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "id,label,paired,h_0,h_1,h_2,h_3,h_4");
    std::getline(is, line);
    CHECK(line.rfind("10,0,0,", 0) == 0);
    CHECK(std::count(line.begin(), line.end(), ',') == 7);
    std::getline(is, line);
    CHECK(line.rfind("11,1,1,", 0) == 0);
}
