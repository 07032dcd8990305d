#include "pgad/kernels.hpp"

#include <atomic>
#include <cmath>
#include <string>
#include <vector>

#include "pgad/error.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace pgad::kernels {

namespace {

std::atomic<std::size_t> g_parallel_threshold{1u << 16};

void check_affine(const Matrix& x, std::span<const double> w, std::span<const double> b, std::size_t out) {
    require(w.size() == out * x.cols(), ErrorKind::Shape,
            "affine weight size " + std::to_string(w.size()) + ", expected " + std::to_string(out * x.cols()));
    require(b.size() == out, ErrorKind::Shape,
            "affine bias size " + std::to_string(b.size()) + ", expected " + std::to_string(out));
}

// Row kernels shared by both variants. Keeping a single body is what makes the
// serial and parallel results bitwise equal.

inline void affine_row(const double* x, std::size_t in, std::span<const double> w, std::span<const double> b,
                       double* y, std::size_t out) {
    for (std::size_t o = 0; o < out; ++o) {
        const double* wo = w.data() + o * in;
        double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc += x[i] * wo[i];
        y[o] = acc;
    }
}

inline void backward_input_row(const double* dy, std::size_t out, std::span<const double> w, double* dx,
                               std::size_t in) {
    for (std::size_t i = 0; i < in; ++i) dx[i] = 0.0;
    for (std::size_t o = 0; o < out; ++o) {
        const double g = dy[o];
        const double* wo = w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) dx[i] += g * wo[i];
    }
}

// Gradient for output unit `o`: one row of dw plus one bias entry.
inline void backward_params_unit(const Matrix& x, const Matrix& dy, std::size_t o, double* dw_row, double& db_o) {
    const std::size_t in = x.cols();
    double bias = 0.0;
    for (std::size_t n = 0; n < x.rows(); ++n) {
        const double g = dy(n, o);
        bias += g;
        const double* xn = x.row(n).data();
        for (std::size_t i = 0; i < in; ++i) dw_row[i] += g * xn[i];
    }
    db_o += bias;
}

std::vector<double> row_norms(const Matrix& m, const char* which) {
    std::vector<double> norms(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (double v : m.row(r)) s += v * v;
        norms[r] = std::sqrt(s);
        require(norms[r] > 0.0, ErrorKind::Numeric,
                std::string("degenerate input: zero vector in cosine similarity (") + which + " row " +
                    std::to_string(r) + ")");
    }
    return norms;
}

inline double dot(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += a[k] * b[k];
    return s;
}

inline void cosine_row(const Matrix& left, const Matrix& right, const std::vector<double>& nl,
                       const std::vector<double>& nr, double tau, std::size_t i, double* s) {
    const std::size_t d = left.cols();
    for (std::size_t j = 0; j < right.rows(); ++j)
        s[j] = dot(left.row(i).data(), right.row(j).data(), d) / (nl[i] * nr[j]) / tau;
}

// d/d left_i of sum_j g_ij * cos(left_i, right_j)/tau
inline void cosine_grad_left_row(const Matrix& left, const Matrix& right, const std::vector<double>& nl,
                                 const std::vector<double>& nr, double tau, const Matrix& d_sim, std::size_t i,
                                 double* out) {
    const std::size_t d = left.cols();
    const double* a = left.row(i).data();
    for (std::size_t k = 0; k < d; ++k) out[k] = 0.0;
    for (std::size_t j = 0; j < right.rows(); ++j) {
        const double g = d_sim(i, j) / tau;
        if (g == 0.0) continue;
        const double* b = right.row(j).data();
        const double inv = 1.0 / (nl[i] * nr[j]);
        const double c = dot(a, b, d) * inv;
        const double ca = c / (nl[i] * nl[i]);
        for (std::size_t k = 0; k < d; ++k) out[k] += g * (b[k] * inv - ca * a[k]);
    }
}

inline void cosine_grad_right_row(const Matrix& left, const Matrix& right, const std::vector<double>& nl,
                                  const std::vector<double>& nr, double tau, const Matrix& d_sim, std::size_t j,
                                  double* out) {
    const std::size_t d = left.cols();
    const double* b = right.row(j).data();
    for (std::size_t k = 0; k < d; ++k) out[k] = 0.0;
    for (std::size_t i = 0; i < left.rows(); ++i) {
        const double g = d_sim(i, j) / tau;
        if (g == 0.0) continue;
        const double* a = left.row(i).data();
        const double inv = 1.0 / (nl[i] * nr[j]);
        const double c = dot(a, b, d) * inv;
        const double cb = c / (nr[j] * nr[j]);
        for (std::size_t k = 0; k < d; ++k) out[k] += g * (a[k] * inv - cb * b[k]);
    }
}

inline void sqdist_row(const Matrix& x, const Matrix& z, std::size_t i, double* out) {
    const double* xi = x.row(i).data();
    for (std::size_t c = 0; c < z.rows(); ++c) {
        const double* zc = z.row(c).data();
        double s = 0.0;
        for (std::size_t k = 0; k < x.cols(); ++k) {
            const double diff = xi[k] - zc[k];
            s += diff * diff;
        }
        out[c] = s;
    }
}

void check_cosine(const Matrix& left, const Matrix& right, double tau) {
    require(left.cols() == right.cols(), ErrorKind::Shape,
            "cosine similarity dims differ: " + std::to_string(left.cols()) + " vs " + std::to_string(right.cols()));
    require(tau > 0.0, ErrorKind::Range, "similarity temperature must be positive");
}

bool go_parallel(std::size_t work) {
#if defined(_OPENMP)
    return work >= g_parallel_threshold.load(std::memory_order_relaxed) && !omp_in_parallel() &&
           omp_get_max_threads() > 1;
#else
    (void)work;
    return false;
#endif
}

}  // namespace

// ---------------------------------------------------------------------------
// serial

namespace serial {

Matrix affine_forward(const Matrix& x, std::span<const double> w, std::span<const double> b, std::size_t out) {
    check_affine(x, w, b, out);
    Matrix y(x.rows(), out);
    for (std::size_t n = 0; n < x.rows(); ++n) affine_row(x.row(n).data(), x.cols(), w, b, y.row(n).data(), out);
    return y;
}

Matrix affine_backward_input(const Matrix& dy, std::span<const double> w, std::size_t in) {
    require(w.size() == dy.cols() * in, ErrorKind::Shape, "affine backward weight size mismatch");
    Matrix dx(dy.rows(), in);
    for (std::size_t n = 0; n < dy.rows(); ++n)
        backward_input_row(dy.row(n).data(), dy.cols(), w, dx.row(n).data(), in);
    return dx;
}

void affine_backward_params(const Matrix& x, const Matrix& dy, std::span<double> dw, std::span<double> db) {
    require(x.rows() == dy.rows() && dw.size() == dy.cols() * x.cols() && db.size() == dy.cols(),
            ErrorKind::Shape, "affine parameter gradient shape mismatch");
    for (std::size_t o = 0; o < dy.cols(); ++o) backward_params_unit(x, dy, o, dw.data() + o * x.cols(), db[o]);
}

Matrix cosine_similarity(const Matrix& left, const Matrix& right, double tau) {
    check_cosine(left, right, tau);
    const auto nl = row_norms(left, "left");
    const auto nr = row_norms(right, "right");
    Matrix s(left.rows(), right.rows());
    for (std::size_t i = 0; i < left.rows(); ++i) cosine_row(left, right, nl, nr, tau, i, s.row(i).data());
    return s;
}

CosineGrads cosine_similarity_backward(const Matrix& left, const Matrix& right, double tau, const Matrix& d_sim) {
    check_cosine(left, right, tau);
    require(d_sim.rows() == left.rows() && d_sim.cols() == right.rows(), ErrorKind::Shape,
            "similarity gradient shape mismatch");
    const auto nl = row_norms(left, "left");
    const auto nr = row_norms(right, "right");
    CosineGrads g{Matrix(left.rows(), left.cols()), Matrix(right.rows(), right.cols())};
    for (std::size_t i = 0; i < left.rows(); ++i)
        cosine_grad_left_row(left, right, nl, nr, tau, d_sim, i, g.d_left.row(i).data());
    for (std::size_t j = 0; j < right.rows(); ++j)
        cosine_grad_right_row(left, right, nl, nr, tau, d_sim, j, g.d_right.row(j).data());
    return g;
}

Matrix squared_distances(const Matrix& x, const Matrix& z) {
    require(x.cols() == z.cols(), ErrorKind::Shape, "distance dims differ");
    Matrix d(x.rows(), z.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) sqdist_row(x, z, i, d.row(i).data());
    return d;
}

}  // namespace serial

// ---------------------------------------------------------------------------
// omp

namespace omp {

Matrix affine_forward(const Matrix& x, std::span<const double> w, std::span<const double> b, std::size_t out) {
    check_affine(x, w, b, out);
    Matrix y(x.rows(), out);
    const auto rows = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < rows; ++n) {
        const auto r = static_cast<std::size_t>(n);
        affine_row(x.row(r).data(), x.cols(), w, b, y.row(r).data(), out);
    }
    return y;
}

Matrix affine_backward_input(const Matrix& dy, std::span<const double> w, std::size_t in) {
    require(w.size() == dy.cols() * in, ErrorKind::Shape, "affine backward weight size mismatch");
    Matrix dx(dy.rows(), in);
    const auto rows = static_cast<std::ptrdiff_t>(dy.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < rows; ++n) {
        const auto r = static_cast<std::size_t>(n);
        backward_input_row(dy.row(r).data(), dy.cols(), w, dx.row(r).data(), in);
    }
    return dx;
}

void affine_backward_params(const Matrix& x, const Matrix& dy, std::span<double> dw, std::span<double> db) {
    require(x.rows() == dy.rows() && dw.size() == dy.cols() * x.cols() && db.size() == dy.cols(),
            ErrorKind::Shape, "affine parameter gradient shape mismatch");
    const auto units = static_cast<std::ptrdiff_t>(dy.cols());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t o = 0; o < units; ++o) {
        const auto u = static_cast<std::size_t>(o);
        backward_params_unit(x, dy, u, dw.data() + u * x.cols(), db[u]);
    }
}

Matrix cosine_similarity(const Matrix& left, const Matrix& right, double tau) {
    check_cosine(left, right, tau);
    const auto nl = row_norms(left, "left");
    const auto nr = row_norms(right, "right");
    Matrix s(left.rows(), right.rows());
    const auto rows = static_cast<std::ptrdiff_t>(left.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const auto r = static_cast<std::size_t>(i);
        cosine_row(left, right, nl, nr, tau, r, s.row(r).data());
    }
    return s;
}

CosineGrads cosine_similarity_backward(const Matrix& left, const Matrix& right, double tau, const Matrix& d_sim) {
    check_cosine(left, right, tau);
    require(d_sim.rows() == left.rows() && d_sim.cols() == right.rows(), ErrorKind::Shape,
            "similarity gradient shape mismatch");
    const auto nl = row_norms(left, "left");
    const auto nr = row_norms(right, "right");
    CosineGrads g{Matrix(left.rows(), left.cols()), Matrix(right.rows(), right.cols())};
    const auto nleft = static_cast<std::ptrdiff_t>(left.rows());
    const auto nright = static_cast<std::ptrdiff_t>(right.rows());
#pragma omp parallel
    {
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t i = 0; i < nleft; ++i) {
            const auto r = static_cast<std::size_t>(i);
            cosine_grad_left_row(left, right, nl, nr, tau, d_sim, r, g.d_left.row(r).data());
        }
#pragma omp for schedule(static)
        for (std::ptrdiff_t j = 0; j < nright; ++j) {
            const auto r = static_cast<std::size_t>(j);
            cosine_grad_right_row(left, right, nl, nr, tau, d_sim, r, g.d_right.row(r).data());
        }
    }
    return g;
}

Matrix squared_distances(const Matrix& x, const Matrix& z) {
    require(x.cols() == z.cols(), ErrorKind::Shape, "distance dims differ");
    Matrix d(x.rows(), z.rows());
    const auto rows = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const auto r = static_cast<std::size_t>(i);
        sqdist_row(x, z, r, d.row(r).data());
    }
    return d;
}

}  // namespace omp

// ---------------------------------------------------------------------------
// dispatch

std::size_t parallel_threshold() { return g_parallel_threshold.load(std::memory_order_relaxed); }
void set_parallel_threshold(std::size_t work) { g_parallel_threshold.store(work, std::memory_order_relaxed); }

Matrix affine_forward(const Matrix& x, std::span<const double> w, std::span<const double> b, std::size_t out) {
    return go_parallel(x.rows() * x.cols() * out) ? omp::affine_forward(x, w, b, out)
                                                  : serial::affine_forward(x, w, b, out);
}

Matrix affine_backward_input(const Matrix& dy, std::span<const double> w, std::size_t in) {
    return go_parallel(dy.rows() * dy.cols() * in) ? omp::affine_backward_input(dy, w, in)
                                                   : serial::affine_backward_input(dy, w, in);
}

void affine_backward_params(const Matrix& x, const Matrix& dy, std::span<double> dw, std::span<double> db) {
    if (go_parallel(x.rows() * x.cols() * dy.cols()))
        omp::affine_backward_params(x, dy, dw, db);
    else
        serial::affine_backward_params(x, dy, dw, db);
}

Matrix cosine_similarity(const Matrix& left, const Matrix& right, double tau) {
    return go_parallel(left.rows() * right.rows() * left.cols()) ? omp::cosine_similarity(left, right, tau)
                                                                 : serial::cosine_similarity(left, right, tau);
}

CosineGrads cosine_similarity_backward(const Matrix& left, const Matrix& right, double tau, const Matrix& d_sim) {
    return go_parallel(2 * left.rows() * right.rows() * left.cols())
               ? omp::cosine_similarity_backward(left, right, tau, d_sim)
               : serial::cosine_similarity_backward(left, right, tau, d_sim);
}

Matrix squared_distances(const Matrix& x, const Matrix& z) {
    return go_parallel(x.rows() * z.rows() * x.cols()) ? omp::squared_distances(x, z)
                                                       : serial::squared_distances(x, z);
}

}  // namespace pgad::kernels
