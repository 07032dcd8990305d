// Command-line front end: run a scenario, export student embeddings, compare arms.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pgad/error.hpp"
#include "pgad/harness.hpp"

namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& path, pgad::ErrorKind kind, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    pgad::require(static_cast<bool>(in), kind, "cannot open " + what + " " + path.string());
    return in;
}

int cmd_run(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed, int jobs) {
    auto cfg = pgad::load_scenario_config(config);
    cfg.output_dir = out;
    if (seed) cfg.seed = *seed;
    const auto summary = pgad::run_scenario(cfg, jobs);
    for (const auto& c : summary.cells)
        std::cout << c.arm << ' ' << pgad::scenario_label(c.missing_rate) << " mcc=" << c.mean[0] << " auc=" << c.mean[1]
                  << '\n';
    std::cout << "wrote " << out << '\n';
    return 0;
}

int cmd_export(const std::string& checkpoint, const std::string& data, const std::string& out) {
    std::optional<pgad::StudentNet> student;
    {
        auto in = open_in(checkpoint, pgad::ErrorKind::Usage, "checkpoint");
        try {
            student = pgad::load_student_checkpoint(in);
        } catch (const pgad::Error& e) {
            pgad::fail(pgad::ErrorKind::Usage, "checkpoint " + checkpoint + " is not a trained student: " + e.message());
        }
    }
    auto din = open_in(data, pgad::ErrorKind::Io, "dataset");
    const auto samples = pgad::read_dataset_csv(din);
    std::ofstream os(out, std::ios::binary);
    pgad::require(static_cast<bool>(os), pgad::ErrorKind::Io, "cannot write " + out);
    pgad::export_embeddings(*student, samples, os);
    return 0;
}

int cmd_compare(const std::string& dir, const std::string& baseline, double alpha, int comparisons) {
    auto in = open_in(fs::path(dir) / "metrics.csv", pgad::ErrorKind::Io, "metrics");
    const auto runs = pgad::read_metrics_csv(in);
    const auto results = pgad::compare_all(runs, baseline, alpha, comparisons);
    std::ofstream os(fs::path(dir) / "comparisons.csv", std::ios::binary);
    pgad::require(static_cast<bool>(os), pgad::ErrorKind::Io, "cannot write comparisons.csv in " + dir);
    pgad::write_comparisons_csv(os, results);
    pgad::write_comparisons_csv(std::cout, results);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pgad: prototype-guided distillation under missing modalities"};
    app.require_subcommand(1);

    std::string config, out;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    auto* run = app.add_subcommand("run", "train and evaluate every arm, rate and fold of a scenario");
    run->add_option("--config", config, "scenario JSON")->required();
    run->add_option("--out", out, "output directory")->required();
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--jobs", jobs, "concurrent fold jobs")->check(CLI::PositiveNumber);

    std::string checkpoint, data, emb_out;
    auto* exp = app.add_subcommand("export-embeddings", "write student features for a dataset CSV");
    exp->add_option("--checkpoint", checkpoint, "student checkpoint")->required();
    exp->add_option("--data", data, "dataset CSV")->required();
    exp->add_option("--out", emb_out, "embedding CSV")->required();

    std::string summary_dir, baseline;
    double alpha = 0.05;
    int comparisons = 0;
    auto* cmp = app.add_subcommand("compare", "paired t-tests of every arm against a baseline");
    cmp->add_option("--summary", summary_dir, "directory holding metrics.csv")->required();
    cmp->add_option("--baseline", baseline, "baseline arm")->required();
    cmp->add_option("--alpha", alpha, "family-wise significance level");
    cmp->add_option("--comparisons", comparisons, "Bonferroni m (default: (arms-1)*4)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: usage: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*run) return cmd_run(config, out, seed, jobs);
        if (*exp) return cmd_export(checkpoint, data, emb_out);
        if (*cmp) return cmd_compare(summary_dir, baseline, alpha, comparisons);
    } catch (const pgad::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: io: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
