#include "pgad/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>

#include "pgad/csv.hpp"
#include "pgad/error.hpp"
#include "pgad/rng.hpp"

namespace pgad {

namespace {

std::string field_error(const char* field, const std::string& why) { return std::string(field) + " " + why; }

// Dense (rows x cols) Gaussian projection scaled by 1/sqrt(cols).
std::vector<double> random_projection(Rng& rng, int rows, int cols) {
    std::vector<double> p(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (auto& v : p) v = scale * rng.normal();
    return p;
}

void project_into(const std::vector<double>& p, int rows, int cols, const std::vector<double>& x,
                  std::vector<double>& out, double gain = 1.0) {
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < cols; ++c)
            acc += p[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)] *
                   x[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] += gain * acc;
    }
}

std::map<int, std::vector<std::size_t>> indices_by_class(std::span<const Sample> samples) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < samples.size(); ++i) by_class[samples[i].label].push_back(i);
    return by_class;
}

}  // namespace

void DatasetConfig::validate() const {
    require(num_classes >= 2, ErrorKind::Config, field_error("num_classes", "must be >= 2"));
    require(samples_per_class >= 2, ErrorKind::Config, field_error("samples_per_class", "must be >= 2"));
    require(dim_a >= 1, ErrorKind::Config, field_error("dim_a", "must be >= 1"));
    require(dim_b >= 1, ErrorKind::Config, field_error("dim_b", "must be >= 1"));
    require(std::isfinite(class_separation) && class_separation >= 0.0, ErrorKind::Config,
            field_error("class_separation", "must be a nonnegative real"));
    require(std::isfinite(noise_scale) && noise_scale > 0.0, ErrorKind::Config,
            field_error("noise_scale", "must be positive"));
    require(missing_rate >= 0.0 && missing_rate <= 1.0, ErrorKind::Config,
            field_error("missing_rate", "must lie in [0,1]"));
    require(label_noise >= 0.0 && label_noise < 0.5, ErrorKind::Config,
            field_error("label_noise", "must lie in [0, 0.5)"));
    require(clusters_per_class >= 1, ErrorKind::Config, field_error("clusters_per_class", "must be >= 1"));
    require(latent_dim >= num_classes, ErrorKind::Config, field_error("latent_dim", "must be >= num_classes"));
    require(std::isfinite(nuisance_scale) && nuisance_scale >= 0.0, ErrorKind::Config,
            field_error("nuisance_scale", "must be a nonnegative real"));
    require(std::isfinite(b_noise()) && b_noise() > 0.0, ErrorKind::Config,
            field_error("noise_scale_b", "must be positive"));
    require(std::isfinite(b_nuisance()) && b_nuisance() >= 0.0, ErrorKind::Config,
            field_error("nuisance_scale_b", "must be a nonnegative real"));
}

std::size_t round_half_up_count(double rate, std::size_t n) {
    // The 1e-9 guard absorbs representation error such as 0.35 * 10 = 3.4999...
    return static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 0.5 + 1e-9));
}

// Generative model, per sample of class y:
//   u = c_{y,i mod m} + g,  g ~ N(0, I_K)   one of m clusters of class y
//   s ~ N(0, I_K)                        subject nuisance
//   a = P_a u + nuisance * N_a s + noise * e_a
//   b = P_b u + nuisance_b * N_b s + noise_b * e_b
// With m = 1, c_y = class_separation / sqrt(2) * e_y so any two centres are
// class_separation apart; with m > 1 the centres are random and only their
// expected squared distance is class_separation^2. Both modalities share u and s, so a genuine pair is correlated beyond
// its label and B can cancel the nuisance in A.
std::vector<Sample> generate_dataset(const DatasetConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, {0x5EED'DA7AULL}));
    const int k = cfg.latent_dim;
    const auto proj_a = random_projection(rng, cfg.dim_a, k);
    const auto nuis_a = random_projection(rng, cfg.dim_a, k);
    const auto proj_b = random_projection(rng, cfg.dim_b, k);
    const auto nuis_b = random_projection(rng, cfg.dim_b, k);
    const double centre_scale = cfg.class_separation / std::sqrt(2.0);
    const int m = cfg.clusters_per_class;
    // centres[(y * m + c) * k + j]
    std::vector<double> centres(static_cast<std::size_t>(cfg.num_classes * m * k), 0.0);
    if (m == 1) {
        for (int y = 0; y < cfg.num_classes; ++y) centres[static_cast<std::size_t>(y * k + y)] = centre_scale;
    } else {
        // Random centres with E||c - c'||^2 = class_separation^2.
        const double sd = cfg.class_separation / std::sqrt(2.0 * k);
        for (auto& v : centres) v = sd * rng.normal();
    }

    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(cfg.num_classes) * static_cast<std::size_t>(cfg.samples_per_class));
    std::vector<double> u(static_cast<std::size_t>(k)), s(static_cast<std::size_t>(k));
    std::int64_t next_id = 0;
    // Interleave classes so ids do not encode the label.
    for (int i = 0; i < cfg.samples_per_class; ++i) {
        for (int y = 0; y < cfg.num_classes; ++y) {
            for (int j = 0; j < k; ++j) {
                const auto c = static_cast<std::size_t>((y * m + i % m) * k + j);
                u[static_cast<std::size_t>(j)] = centres[c] + rng.normal();
                s[static_cast<std::size_t>(j)] = rng.normal();
            }
            Sample smp;
            smp.id = next_id++;
            smp.label = y;
            smp.feat_a.assign(static_cast<std::size_t>(cfg.dim_a), 0.0);
            std::vector<double> b(static_cast<std::size_t>(cfg.dim_b), 0.0);
            project_into(proj_a, cfg.dim_a, k, u, smp.feat_a);
            project_into(nuis_a, cfg.dim_a, k, s, smp.feat_a, cfg.nuisance_scale);
            project_into(proj_b, cfg.dim_b, k, u, b);
            project_into(nuis_b, cfg.dim_b, k, s, b, cfg.b_nuisance());
            for (auto& v : smp.feat_a) v += cfg.noise_scale * rng.normal();
            for (auto& v : b) v += cfg.b_noise() * rng.normal();
            smp.feat_b = std::move(b);
            samples.push_back(std::move(smp));
        }
    }
    if (cfg.label_noise > 0.0) {
        // Exactly round(label_noise * n) recorded labels per class point to
        // another class; features keep following the true class.
        Rng flip_rng(derive_seed(cfg.seed, {0xF11BULL}));
        auto by_class = indices_by_class(samples);
        std::vector<int> relabel(samples.size(), -1);
        for (auto& [label, members] : by_class) {
            flip_rng.shuffle(std::span<std::size_t>(members));
            const auto n_flip = round_half_up_count(cfg.label_noise, members.size());
            for (std::size_t j = 0; j < n_flip; ++j) {
                const int offset = 1 + static_cast<int>(j % static_cast<std::size_t>(cfg.num_classes - 1));
                relabel[members[j]] = (label + offset) % cfg.num_classes;
            }
        }
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (relabel[i] >= 0) samples[i].label = relabel[i];
    }
    if (cfg.missing_rate > 0.0)
        samples = apply_missingness(samples, cfg.missing_rate, derive_seed(cfg.seed, {0x0000'0B5EULL}));
    return samples;
}

std::vector<FoldSplit> stratified_kfold(std::span<const Sample> samples, int k, std::uint64_t seed) {
    require(k >= 2, ErrorKind::Range, "k must be >= 2");
    auto by_class = indices_by_class(samples);
    for (const auto& [label, members] : by_class)
        require(members.size() >= static_cast<std::size_t>(k), ErrorKind::Protocol,
                "infeasible split: class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                    " samples, fewer than k=" + std::to_string(k));

    Rng rng(derive_seed(seed, {0xF01DULL}));
    std::vector<int> fold_of(samples.size(), -1);
    // Round-robin within each class, continuing the cycle across classes so
    // total fold sizes also stay within one of each other.
    std::size_t cursor = 0;
    for (auto& [label, members] : by_class) {
        rng.shuffle(std::span<std::size_t>(members));
        for (auto idx : members) {
            fold_of[idx] = static_cast<int>(cursor % static_cast<std::size_t>(k));
            ++cursor;
        }
    }

    std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) folds[static_cast<std::size_t>(f)].fold_index = f;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (int f = 0; f < k; ++f) {
            auto& fold = folds[static_cast<std::size_t>(f)];
            (fold_of[i] == f ? fold.test_ids : fold.train_ids).push_back(samples[i].id);
        }
    }
    for (auto& fold : folds) {
        std::sort(fold.train_ids.begin(), fold.train_ids.end());
        std::sort(fold.test_ids.begin(), fold.test_ids.end());
    }
    return folds;
}

std::vector<Sample> apply_missingness(std::span<const Sample> samples, double rate, std::uint64_t seed) {
    require(rate >= 0.0 && rate <= 1.0, ErrorKind::Range, "missing rate must lie in [0,1]");
    for (const auto& s : samples)
        require(s.paired(), ErrorKind::Protocol, "apply_missingness expects fully paired input (id " +
                                                      std::to_string(s.id) + " already unpaired)");
    std::vector<Sample> out(samples.begin(), samples.end());
    auto by_class = indices_by_class(samples);
    Rng rng(derive_seed(seed, {0x3155ULL}));
    for (auto& [label, members] : by_class) {
        const auto drop = round_half_up_count(rate, members.size());
        rng.shuffle(std::span<std::size_t>(members));
        for (std::size_t i = 0; i < drop; ++i) out[members[i]].feat_b.reset();
    }
    return out;
}

std::vector<Sample> select_by_id(std::span<const Sample> samples, std::span<const std::int64_t> ids) {
    std::unordered_map<std::int64_t, std::size_t> index;
    for (std::size_t i = 0; i < samples.size(); ++i) index.emplace(samples[i].id, i);
    std::vector<Sample> out;
    out.reserve(ids.size());
    for (auto id : ids) {
        auto it = index.find(id);
        require(it != index.end(), ErrorKind::Protocol, "unknown sample id " + std::to_string(id));
        out.push_back(samples[it->second]);
    }
    return out;
}

Matrix stack_feat_a(std::span<const Sample> samples) {
    if (samples.empty()) return {};
    Matrix m(samples.size(), samples.front().feat_a.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        require(samples[i].feat_a.size() == m.cols(), ErrorKind::Shape, "inconsistent modality-A dimension");
        std::copy(samples[i].feat_a.begin(), samples[i].feat_a.end(), m.row(i).begin());
    }
    return m;
}

void write_dataset_csv(std::ostream& os, std::span<const Sample> samples) {
    std::size_t da = 0, db = 0;
    for (const auto& s : samples) {
        da = std::max(da, s.feat_a.size());
        if (s.feat_b) db = std::max(db, s.feat_b->size());
    }
    std::vector<std::string> header{"id", "label", "paired"};
    for (std::size_t j = 0; j < da; ++j) header.push_back("a_" + std::to_string(j));
    for (std::size_t j = 0; j < db; ++j) header.push_back("b_" + std::to_string(j));
    os << csv::join(header) << '\n';
    for (const auto& s : samples) {
        std::vector<std::string> row{std::to_string(s.id), std::to_string(s.label), s.paired() ? "1" : "0"};
        for (double v : s.feat_a) row.push_back(csv::format_double(v));
        for (std::size_t j = 0; j < db; ++j) row.push_back(s.feat_b ? csv::format_double((*s.feat_b)[j]) : "");
        os << csv::join(row) << '\n';
    }
}

std::vector<Sample> read_dataset_csv(std::istream& is) {
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), ErrorKind::Io, "dataset CSV is empty");
    const auto header = csv::split(line);
    require(header.size() >= 3 && header[0] == "id" && header[1] == "label" && header[2] == "paired",
            ErrorKind::Io, "dataset CSV header must start with id,label,paired");
    std::size_t da = 0, db = 0;
    for (std::size_t j = 3; j < header.size(); ++j) {
        if (header[j].starts_with("a_"))
            ++da;
        else if (header[j].starts_with("b_"))
            ++db;
        else
            fail(ErrorKind::Io, "unexpected dataset column '" + std::string(header[j]) + "'");
    }
    std::vector<Sample> out;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = csv::split(line);
        const std::string where = "dataset line " + std::to_string(line_no);
        require(f.size() == 3 + da + db, ErrorKind::Io, where + ": wrong field count");
        Sample s;
        s.id = csv::parse_int(f[0], where);
        s.label = static_cast<int>(csv::parse_int(f[1], where));
        const bool paired = csv::parse_int(f[2], where) != 0;
        for (std::size_t j = 0; j < da; ++j) s.feat_a.push_back(csv::parse_double(f[3 + j], where));
        if (paired) {
            std::vector<double> b;
            for (std::size_t j = 0; j < db; ++j) b.push_back(csv::parse_double(f[3 + da + j], where));
            s.feat_b = std::move(b);
        } else {
            for (std::size_t j = 0; j < db; ++j)
                require(f[3 + da + j].empty(), ErrorKind::Io, where + ": unpaired row carries modality B values");
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_folds_csv(std::ostream& os, std::span<const FoldSplit> folds) {
    os << "fold,id,split\n";
    for (const auto& fold : folds) {
        for (auto id : fold.train_ids) os << fold.fold_index << ',' << id << ",train\n";
        for (auto id : fold.test_ids) os << fold.fold_index << ',' << id << ",test\n";
    }
}

std::vector<FoldSplit> read_folds_csv(std::istream& is) {
    std::string line;
    require(static_cast<bool>(std::getline(is, line)) && line.starts_with("fold,id,split"), ErrorKind::Io,
            "folds CSV header must be fold,id,split");
    std::map<int, FoldSplit> folds;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = csv::split(line);
        require(f.size() == 3, ErrorKind::Io, "folds CSV: wrong field count");
        const int fold = static_cast<int>(csv::parse_int(f[0], "folds CSV"));
        const auto id = csv::parse_int(f[1], "folds CSV");
        auto& split = folds[fold];
        split.fold_index = fold;
        if (f[2] == "train")
            split.train_ids.push_back(id);
        else if (f[2] == "test")
            split.test_ids.push_back(id);
        else
            fail(ErrorKind::Io, "folds CSV: split must be train or test");
    }
    std::vector<FoldSplit> out;
    for (auto& [k, v] : folds) out.push_back(std::move(v));
    return out;
}

}  // namespace pgad
