#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgad/matrix.hpp"

namespace pgad {

enum class Activation { Relu, Tanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Widths from input to output; the activation follows every layer but the last.
struct MlpSpec {
    std::vector<int> layer_widths;
    Activation activation = Activation::Relu;

    int input_dim() const { return layer_widths.front(); }
    int output_dim() const { return layer_widths.back(); }
    std::size_t num_layers() const { return layer_widths.size() - 1; }
    void validate(std::string_view name) const;

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Flat parameter storage. Layout: parts in network order; within a part,
/// layer by layer, the weight matrix (out x in, row-major) then the bias.
using ParamVector = std::vector<double>;

/// Activations kept by a forward pass for the matching backward pass.
struct MlpTape {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each hidden layer
};

/// An MLP that lives at [offset, offset + size) inside a ParamVector.
class Mlp {
public:
    Mlp(MlpSpec spec, std::size_t offset);

    const MlpSpec& spec() const noexcept { return spec_; }
    std::size_t offset() const noexcept { return offset_; }
    std::size_t size() const noexcept { return size_; }

    Matrix forward(std::span<const double> params, const Matrix& x, MlpTape* tape) const;
    /// Accumulates parameter gradients into `grad` (full ParamVector span) and
    /// returns the gradient with respect to the input.
    Matrix backward(std::span<const double> params, const MlpTape& tape, const Matrix& dy,
                    std::span<double> grad) const;

private:
    struct Layer {
        std::size_t in, out, w_off, b_off;
    };
    MlpSpec spec_;
    std::size_t offset_;
    std::size_t size_ = 0;
    std::vector<Layer> layers_;
};

struct NamedPart {
    std::string name;
    Mlp mlp;
};

/// Common storage for teacher and student.
class Network {
public:
    std::span<const double> params() const noexcept { return params_; }
    std::span<double> params() noexcept { return params_; }
    std::size_t num_params() const noexcept { return params_.size(); }

    ParamVector flatten() const { return params_; }
    void unflatten(std::span<const double> flat);

    const std::vector<NamedPart>& parts() const noexcept { return parts_; }

    /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
    void initialize(std::uint64_t seed);

protected:
    const Mlp& add_part(std::string name, MlpSpec spec);
    const Mlp& part(std::size_t i) const { return parts_[i].mlp; }

    std::vector<NamedPart> parts_;
    ParamVector params_;
};

struct TeacherPass {
    bool valid = false;
    MlpTape enc_a_tape, enc_b_tape, fusion_tape, head_tape;
    Matrix feat_a;  // modality-A encoder output
    Matrix feat_b;  // modality-B encoder output
    Matrix fused;
    Matrix logits;
};

/// Upstream gradients; an empty matrix stands for zeros.
struct TeacherUpstream {
    Matrix d_logits, d_fused, d_feat_a, d_feat_b;
};

struct StudentPass {
    bool valid = false;
    MlpTape enc_tape, head_tape;
    Matrix feat;
    Matrix logits;
};

struct StudentUpstream {
    Matrix d_logits, d_feat;
};

/// enc_a (Da -> H), enc_b (Db -> H), fusion (2H -> H), head (H -> C).
class TeacherNet : public Network {
public:
    TeacherNet(MlpSpec enc_a, MlpSpec enc_b, MlpSpec fusion, MlpSpec head);

    int dim_a() const { return part(0).spec().input_dim(); }
    int dim_b() const { return part(1).spec().input_dim(); }
    int feature_dim() const { return part(2).spec().output_dim(); }
    int num_classes() const { return part(3).spec().output_dim(); }

    TeacherPass forward(const Matrix& a, const Matrix& b) const;
    ParamVector backward(const TeacherPass& pass, const TeacherUpstream& up) const;

    /// Single sample convenience: (fused, logits).
    std::pair<std::vector<double>, std::vector<double>> forward_one(std::span<const double> a,
                                                                    std::span<const double> b) const;
};

/// enc_a (Da -> H), head (H -> C).
class StudentNet : public Network {
public:
    StudentNet(MlpSpec enc_a, MlpSpec head);

    int dim_a() const { return part(0).spec().input_dim(); }
    int feature_dim() const { return part(0).spec().output_dim(); }
    int num_classes() const { return part(1).spec().output_dim(); }

    StudentPass forward(const Matrix& a) const;
    ParamVector backward(const StudentPass& pass, const StudentUpstream& up) const;

    std::pair<std::vector<double>, std::vector<double>> forward_one(std::span<const double> a) const;
};

struct ArchConfig {
    int dim_a = 16;
    int dim_b = 16;
    int feature_dim = 16;
    int num_classes = 2;
    std::vector<int> encoder_hidden{32};
    std::vector<int> fusion_hidden{32};
    Activation activation = Activation::Relu;
};

/// Builds an initialized teacher/student pair sharing feature_dim.
std::pair<TeacherNet, StudentNet> make_networks(const ArchConfig& arch, std::uint64_t seed);

/// Throws Error(Shape) unless teacher fused dim equals student feature dim and
/// both agree on modality-A input and class count.
void check_compatible(const TeacherNet& teacher, const StudentNet& student);

// Checkpoints are text: a header naming the net kind and each part's MlpSpec,
// then the flat ParamVector one value per line in shortest round-trip form.
void save_checkpoint(std::ostream& os, const TeacherNet& net);
void save_checkpoint(std::ostream& os, const StudentNet& net);
TeacherNet load_teacher_checkpoint(std::istream& is);
StudentNet load_student_checkpoint(std::istream& is);

}  // namespace pgad
