#pragma once

#include <cstddef>
#include <span>

#include "pgad/matrix.hpp"

// Dense kernels behind the networks and losses. Each kernel exists twice:
// `serial` is the reference, `omp` splits the outermost output loop across
// OpenMP threads. Every output element is reduced by exactly one thread in the
// same order as the serial code, so both variants are bitwise identical and
// training stays deterministic whatever the thread count.
//
// Weights use the layout (out x in), row-major, as stored in ParamVector.

namespace pgad::kernels {

struct CosineGrads {
    Matrix d_left;
    Matrix d_right;
};

#define PGAD_KERNEL_DECLS                                                                     \
    /* y = x * w^T + b */                                                                     \
    Matrix affine_forward(const Matrix& x, std::span<const double> w, std::span<const double> b, \
                          std::size_t out);                                                   \
    /* dx = dy * w */                                                                         \
    Matrix affine_backward_input(const Matrix& dy, std::span<const double> w, std::size_t in); \
    /* dw += dy^T * x, db += colsum(dy) */                                                    \
    void affine_backward_params(const Matrix& x, const Matrix& dy, std::span<double> dw,      \
                                std::span<double> db);                                        \
    /* s(i,j) = cos(left_i, right_j) / tau */                                                 \
    Matrix cosine_similarity(const Matrix& left, const Matrix& right, double tau);            \
    CosineGrads cosine_similarity_backward(const Matrix& left, const Matrix& right, double tau, \
                                           const Matrix& d_sim);                              \
    /* d(i,c) = ||x_i - z_c||^2 */                                                            \
    Matrix squared_distances(const Matrix& x, const Matrix& z);

namespace serial {
PGAD_KERNEL_DECLS
}  // namespace serial

namespace omp {
PGAD_KERNEL_DECLS
}  // namespace omp

// Dispatching entry points: pick `omp` when the work is large enough and we are
// not already inside a parallel region, `serial` otherwise.
PGAD_KERNEL_DECLS

#undef PGAD_KERNEL_DECLS

/// Work (multiply-adds) above which the dispatcher goes parallel.
std::size_t parallel_threshold();
void set_parallel_threshold(std::size_t work);

}  // namespace pgad::kernels
