#include "pgad/nets.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "pgad/csv.hpp"
#include "pgad/error.hpp"
#include "pgad/kernels.hpp"
#include "pgad/rng.hpp"

namespace pgad {

namespace {

double activate(Activation a, double z) { return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }

// Derivative expressed through the pre-activation.
double activate_grad(Activation a, double z) {
    if (a == Activation::Relu) return z > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

// target += addend, where an empty addend means zero and an empty target is
// replaced by the addend.
void accumulate(Matrix& target, const Matrix& addend) {
    if (addend.empty()) return;
    if (target.empty()) {
        target = addend;
        return;
    }
    require(target.rows() == addend.rows() && target.cols() == addend.cols(), ErrorKind::Shape,
            "upstream gradient shape mismatch");
    auto t = target.data();
    auto a = addend.data();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += a[i];
}

void check_upstream(const Matrix& g, std::size_t rows, int cols, const char* what) {
    if (g.empty()) return;
    require(g.rows() == rows && g.cols() == static_cast<std::size_t>(cols), ErrorKind::Shape,
            std::string("upstream ") + what + " gradient is " + std::to_string(g.rows()) + "x" +
                std::to_string(g.cols()) + ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
}

void check_input(const Matrix& x, int expected, const char* what) {
    require(x.cols() == static_cast<std::size_t>(expected), ErrorKind::Shape,
            std::string(what) + " input dimension: expected " + std::to_string(expected) + ", got " +
                std::to_string(x.cols()));
}

Matrix row_matrix(std::span<const double> v) {
    Matrix m(1, v.size());
    std::copy(v.begin(), v.end(), m.row(0).begin());
    return m;
}

std::vector<double> to_vector(const Matrix& m) { return {m.row(0).begin(), m.row(0).end()}; }

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    fail(ErrorKind::Config, "activation must be relu or tanh, got '" + std::string(name) + "'");
}

void MlpSpec::validate(std::string_view name) const {
    require(layer_widths.size() >= 2, ErrorKind::Config, std::string(name) + ": an MLP needs at least one layer");
    for (int w : layer_widths)
        require(w >= 1, ErrorKind::Config, std::string(name) + ": layer widths must be >= 1");
}

// ---------------------------------------------------------------------------

Mlp::Mlp(MlpSpec spec, std::size_t offset) : spec_(std::move(spec)), offset_(offset) {
    spec_.validate("mlp");
    std::size_t cursor = offset_;
    for (std::size_t l = 0; l + 1 < spec_.layer_widths.size(); ++l) {
        Layer layer{static_cast<std::size_t>(spec_.layer_widths[l]), static_cast<std::size_t>(spec_.layer_widths[l + 1]),
                    0, 0};
        layer.w_off = cursor;
        cursor += layer.in * layer.out;
        layer.b_off = cursor;
        cursor += layer.out;
        layers_.push_back(layer);
    }
    size_ = cursor - offset_;
}

Matrix Mlp::forward(std::span<const double> params, const Matrix& x, MlpTape* tape) const {
    check_input(x, spec_.input_dim(), "mlp");
    if (tape) {
        tape->inputs.clear();
        tape->pre.clear();
    }
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& L = layers_[l];
        Matrix z = kernels::affine_forward(h, params.subspan(L.w_off, L.in * L.out), params.subspan(L.b_off, L.out),
                                           L.out);
        if (tape) tape->inputs.push_back(std::move(h));
        if (l + 1 < layers_.size()) {
            h = Matrix(z.rows(), z.cols());
            auto src = z.data();
            auto dst = h.data();
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = activate(spec_.activation, src[i]);
            if (tape) tape->pre.push_back(std::move(z));
        } else {
            h = std::move(z);
        }
    }
    return h;
}

Matrix Mlp::backward(std::span<const double> params, const MlpTape& tape, const Matrix& dy,
                     std::span<double> grad) const {
    require(tape.inputs.size() == layers_.size(), ErrorKind::Usage, "mlp backward without a matching forward pass");
    Matrix g = dy;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& L = layers_[l];
        if (l + 1 < layers_.size()) {
            const auto pre = tape.pre[l].data();
            auto gd = g.data();
            for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= activate_grad(spec_.activation, pre[i]);
        }
        kernels::affine_backward_params(tape.inputs[l], g, grad.subspan(L.w_off, L.in * L.out),
                                        grad.subspan(L.b_off, L.out));
        g = kernels::affine_backward_input(g, params.subspan(L.w_off, L.in * L.out), L.in);
    }
    return g;
}

// ---------------------------------------------------------------------------

void Network::unflatten(std::span<const double> flat) {
    require(flat.size() == params_.size(), ErrorKind::Shape,
            "parameter vector has " + std::to_string(flat.size()) + " entries, expected " +
                std::to_string(params_.size()));
    std::copy(flat.begin(), flat.end(), params_.begin());
}

void Network::initialize(std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0x1417ULL}));
    for (const auto& p : parts_) {
        const auto& widths = p.mlp.spec().layer_widths;
        std::size_t cursor = p.mlp.offset();
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            const auto in = static_cast<std::size_t>(widths[l]);
            const auto out = static_cast<std::size_t>(widths[l + 1]);
            const double s = 1.0 / std::sqrt(static_cast<double>(in));
            for (std::size_t i = 0; i < in * out + out; ++i) params_[cursor++] = rng.uniform(-s, s);
        }
    }
}

const Mlp& Network::add_part(std::string name, MlpSpec spec) {
    spec.validate(name);
    Mlp mlp(std::move(spec), params_.size());
    params_.resize(params_.size() + mlp.size(), 0.0);
    parts_.push_back(NamedPart{std::move(name), std::move(mlp)});
    return parts_.back().mlp;
}

// ---------------------------------------------------------------------------

TeacherNet::TeacherNet(MlpSpec enc_a, MlpSpec enc_b, MlpSpec fusion, MlpSpec head) {
    enc_a.validate("teacher.enc_a");
    enc_b.validate("teacher.enc_b");
    fusion.validate("teacher.fusion");
    head.validate("teacher.head");
    const int h = enc_a.output_dim();
    require(enc_b.output_dim() == h, ErrorKind::Shape, "teacher encoders must share their output dimension");
    require(fusion.input_dim() == 2 * h, ErrorKind::Shape,
            "teacher fusion input must be " + std::to_string(2 * h) + ", got " + std::to_string(fusion.input_dim()));
    require(fusion.output_dim() == h, ErrorKind::Shape, "teacher fusion output must equal encoder output");
    require(head.input_dim() == h, ErrorKind::Shape, "teacher head input must equal fused dimension");
    require(head.num_layers() == 1, ErrorKind::Config, "teacher head must be a single affine layer");
    add_part("enc_a", std::move(enc_a));
    add_part("enc_b", std::move(enc_b));
    add_part("fusion", std::move(fusion));
    add_part("head", std::move(head));
}

TeacherPass TeacherNet::forward(const Matrix& a, const Matrix& b) const {
    check_input(a, dim_a(), "teacher modality-A");
    check_input(b, dim_b(), "teacher modality-B");
    require(a.rows() == b.rows(), ErrorKind::Shape,
            "teacher batch sizes differ: " + std::to_string(a.rows()) + " vs " + std::to_string(b.rows()));
    TeacherPass pass;
    pass.feat_a = part(0).forward(params_, a, &pass.enc_a_tape);
    pass.feat_b = part(1).forward(params_, b, &pass.enc_b_tape);
    pass.fused = part(2).forward(params_, Matrix::hconcat(pass.feat_a, pass.feat_b), &pass.fusion_tape);
    pass.logits = part(3).forward(params_, pass.fused, &pass.head_tape);
    pass.valid = true;
    return pass;
}

ParamVector TeacherNet::backward(const TeacherPass& pass, const TeacherUpstream& up) const {
    require(pass.valid, ErrorKind::Usage, "teacher backward called without a forward pass");
    const std::size_t n = pass.logits.rows();
    const int h = feature_dim();
    check_upstream(up.d_logits, n, num_classes(), "teacher logits");
    check_upstream(up.d_fused, n, h, "teacher fused");
    check_upstream(up.d_feat_a, n, h, "teacher modality-A feature");
    check_upstream(up.d_feat_b, n, h, "teacher modality-B feature");

    ParamVector grad(params_.size(), 0.0);
    Matrix d_fused = up.d_fused;
    if (!up.d_logits.empty()) accumulate(d_fused, part(3).backward(params_, pass.head_tape, up.d_logits, grad));
    Matrix d_a = up.d_feat_a;
    Matrix d_b = up.d_feat_b;
    if (!d_fused.empty()) {
        auto [left, right] = part(2).backward(params_, pass.fusion_tape, d_fused, grad).hsplit(static_cast<std::size_t>(h));
        accumulate(d_a, left);
        accumulate(d_b, right);
    }
    if (!d_a.empty()) part(0).backward(params_, pass.enc_a_tape, d_a, grad);
    if (!d_b.empty()) part(1).backward(params_, pass.enc_b_tape, d_b, grad);
    return grad;
}

std::pair<std::vector<double>, std::vector<double>> TeacherNet::forward_one(std::span<const double> a,
                                                                            std::span<const double> b) const {
    auto pass = forward(row_matrix(a), row_matrix(b));
    return {to_vector(pass.fused), to_vector(pass.logits)};
}

StudentNet::StudentNet(MlpSpec enc_a, MlpSpec head) {
    enc_a.validate("student.enc_a");
    head.validate("student.head");
    require(head.input_dim() == enc_a.output_dim(), ErrorKind::Shape,
            "student head input must equal feature dimension");
    require(head.num_layers() == 1, ErrorKind::Config, "student head must be a single affine layer");
    add_part("enc_a", std::move(enc_a));
    add_part("head", std::move(head));
}

StudentPass StudentNet::forward(const Matrix& a) const {
    check_input(a, dim_a(), "student modality-A");
    StudentPass pass;
    pass.feat = part(0).forward(params_, a, &pass.enc_tape);
    pass.logits = part(1).forward(params_, pass.feat, &pass.head_tape);
    pass.valid = true;
    return pass;
}

ParamVector StudentNet::backward(const StudentPass& pass, const StudentUpstream& up) const {
    require(pass.valid, ErrorKind::Usage, "student backward called without a forward pass");
    const std::size_t n = pass.logits.rows();
    check_upstream(up.d_logits, n, num_classes(), "student logits");
    check_upstream(up.d_feat, n, feature_dim(), "student feature");
    ParamVector grad(params_.size(), 0.0);
    Matrix d_feat = up.d_feat;
    if (!up.d_logits.empty()) accumulate(d_feat, part(1).backward(params_, pass.head_tape, up.d_logits, grad));
    if (!d_feat.empty()) part(0).backward(params_, pass.enc_tape, d_feat, grad);
    return grad;
}

std::pair<std::vector<double>, std::vector<double>> StudentNet::forward_one(std::span<const double> a) const {
    auto pass = forward(row_matrix(a));
    return {to_vector(pass.feat), to_vector(pass.logits)};
}

// ---------------------------------------------------------------------------

std::pair<TeacherNet, StudentNet> make_networks(const ArchConfig& arch, std::uint64_t seed) {
    auto encoder = [&](int in) {
        MlpSpec s{{in}, arch.activation};
        for (int w : arch.encoder_hidden) s.layer_widths.push_back(w);
        s.layer_widths.push_back(arch.feature_dim);
        return s;
    };
    MlpSpec fusion{{2 * arch.feature_dim}, arch.activation};
    for (int w : arch.fusion_hidden) fusion.layer_widths.push_back(w);
    fusion.layer_widths.push_back(arch.feature_dim);
    MlpSpec head{{arch.feature_dim, arch.num_classes}, arch.activation};

    TeacherNet teacher(encoder(arch.dim_a), encoder(arch.dim_b), fusion, head);
    StudentNet student(encoder(arch.dim_a), head);
    teacher.initialize(derive_seed(seed, {1}));
    student.initialize(derive_seed(seed, {2}));
    return {std::move(teacher), std::move(student)};
}

void check_compatible(const TeacherNet& teacher, const StudentNet& student) {
    require(teacher.feature_dim() == student.feature_dim(), ErrorKind::Shape,
            "teacher fused dimension " + std::to_string(teacher.feature_dim()) + " != student feature dimension " +
                std::to_string(student.feature_dim()));
    require(teacher.dim_a() == student.dim_a(), ErrorKind::Shape, "teacher and student modality-A dims differ");
    require(teacher.num_classes() == student.num_classes(), ErrorKind::Shape, "teacher and student class counts differ");
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kMagic = "pgad-checkpoint 1";

void write_checkpoint(std::ostream& os, std::string_view kind, const Network& net) {
    os << kMagic << '\n' << "net " << kind << '\n';
    for (const auto& p : net.parts()) {
        os << "mlp " << p.name << ' ' << to_string(p.mlp.spec().activation);
        for (int w : p.mlp.spec().layer_widths) os << ' ' << w;
        os << '\n';
    }
    os << "params " << net.num_params() << '\n';
    for (double v : net.params()) os << csv::format_double(v) << '\n';
}

struct ParsedCheckpoint {
    std::string kind;
    std::vector<std::pair<std::string, MlpSpec>> parts;
    ParamVector params;
};

ParsedCheckpoint read_checkpoint(std::istream& is) {
    std::string line;
    require(std::getline(is, line) && line == kMagic, ErrorKind::Io, "not a pgad checkpoint");
    ParsedCheckpoint out;
    require(std::getline(is, line) && line.starts_with("net "), ErrorKind::Io, "checkpoint missing net line");
    out.kind = line.substr(4);
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "mlp") {
            std::string name, act;
            ls >> name >> act;
            MlpSpec spec{{}, activation_from_string(act)};
            int w;
            while (ls >> w) spec.layer_widths.push_back(w);
            out.parts.emplace_back(name, std::move(spec));
        } else if (tag == "params") {
            std::size_t n = 0;
            ls >> n;
            out.params.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                require(static_cast<bool>(std::getline(is, line)), ErrorKind::Io, "checkpoint truncated");
                out.params.push_back(csv::parse_double(line, "checkpoint"));
            }
            return out;
        } else {
            fail(ErrorKind::Io, "unexpected checkpoint line '" + line + "'");
        }
    }
    fail(ErrorKind::Io, "checkpoint missing params section");
}

const MlpSpec& find_part(const ParsedCheckpoint& ck, std::string_view name) {
    for (const auto& [n, spec] : ck.parts)
        if (n == name) return spec;
    fail(ErrorKind::Io, "checkpoint missing part '" + std::string(name) + "'");
}

}  // namespace

void save_checkpoint(std::ostream& os, const TeacherNet& net) { write_checkpoint(os, "teacher", net); }
void save_checkpoint(std::ostream& os, const StudentNet& net) { write_checkpoint(os, "student", net); }

TeacherNet load_teacher_checkpoint(std::istream& is) {
    auto ck = read_checkpoint(is);
    require(ck.kind == "teacher", ErrorKind::Io, "checkpoint holds a " + ck.kind + ", expected teacher");
    TeacherNet net(find_part(ck, "enc_a"), find_part(ck, "enc_b"), find_part(ck, "fusion"), find_part(ck, "head"));
    net.unflatten(ck.params);
    return net;
}

StudentNet load_student_checkpoint(std::istream& is) {
    auto ck = read_checkpoint(is);
    require(ck.kind == "student", ErrorKind::Io, "checkpoint holds a " + ck.kind + ", expected student");
    StudentNet net(find_part(ck, "enc_a"), find_part(ck, "head"));
    net.unflatten(ck.params);
    return net;
}

}  // namespace pgad
