#pragma once

#include <cstddef>

#include "causalegm/mat.hpp"

// Dense compute kernels. Every kernel exists twice: a plain serial reference
// in kernels::serial and an OpenMP version in kernels::omp. Both use the same
// loop bodies and the same per-element accumulation order, so their results
// are bitwise identical; tests assert that and kernel_bench compares their
// throughput. The unqualified wrappers dispatch based on the global parallel
// configuration and problem size.

namespace cegm::kernels {

struct ParallelConfig {
    bool enabled = true;          // global switch, off forces the serial path
    std::size_t min_elements = 1u << 15;  // below this the serial path is used anyway
};

ParallelConfig& parallel_config();
void set_parallel_enabled(bool on);
int max_threads();  // OpenMP thread count the omp kernels will use

namespace serial {
// C = A * B (or C += with accumulate), A n x k, B k x m
void matmul_nn(const Mat& A, const Mat& B, Mat& C, bool accumulate = false);
// C = A^T * B, A n x k, B n x m, C k x m
void matmul_tn(const Mat& A, const Mat& B, Mat& C, bool accumulate = false);
// C = A * B^T, A n x k, B m x k, C n x m
void matmul_nt(const Mat& A, const Mat& B, Mat& C, bool accumulate = false);
void add_bias_rows(Mat& X, const Mat& bias);                   // bias 1 x m
void col_sum(const Mat& X, Mat& out, bool accumulate = false); // out 1 x m
void col_mean_var(const Mat& X, Mat& mean, Mat& var);          // biased variance
void leaky_relu_fwd(const Mat& X, double slope, Mat& Y);
void leaky_relu_bwd(const Mat& X, const Mat& G, double slope, Mat& dX, bool accumulate = true);
void sigmoid_fwd(const Mat& X, Mat& Y);
void sigmoid_bwd(const Mat& Y, const Mat& G, Mat& dX, bool accumulate = true);  // Y = sigmoid output
}  // namespace serial

namespace omp {
void matmul_nn(const Mat& A, const Mat& B, Mat& C, bool accumulate = false);
void matmul_tn(const Mat& A, const Mat& B, Mat& C, bool accumulate = false);
void matmul_nt(const Mat& A, const Mat& B, Mat& C, bool accumulate = false);
void add_bias_rows(Mat& X, const Mat& bias);
void col_sum(const Mat& X, Mat& out, bool accumulate = false);
void col_mean_var(const Mat& X, Mat& mean, Mat& var);
void leaky_relu_fwd(const Mat& X, double slope, Mat& Y);
void leaky_relu_bwd(const Mat& X, const Mat& G, double slope, Mat& dX, bool accumulate = true);
void sigmoid_fwd(const Mat& X, Mat& Y);
void sigmoid_bwd(const Mat& Y, const Mat& G, Mat& dX, bool accumulate = true);
}  // namespace omp

// dispatching wrappers
void matmul_nn(const Mat& A, const Mat& B, Mat& C, bool accumulate = false);
void matmul_tn(const Mat& A, const Mat& B, Mat& C, bool accumulate = false);
void matmul_nt(const Mat& A, const Mat& B, Mat& C, bool accumulate = false);
void add_bias_rows(Mat& X, const Mat& bias);
void col_sum(const Mat& X, Mat& out, bool accumulate = false);
void col_mean_var(const Mat& X, Mat& mean, Mat& var);
void leaky_relu_fwd(const Mat& X, double slope, Mat& Y);
void leaky_relu_bwd(const Mat& X, const Mat& G, double slope, Mat& dX, bool accumulate = true);
void sigmoid_fwd(const Mat& X, Mat& Y);
void sigmoid_bwd(const Mat& Y, const Mat& G, Mat& dX, bool accumulate = true);

// small helpers, serial everywhere (cheap relative to the GEMMs)
double sum_all(const Mat& X);
double mean_all(const Mat& X);
double sum_squares(const Mat& X);
void ewise_add(Mat& dst, const Mat& src);                   // dst += src
void ewise_axpy(Mat& dst, double alpha, const Mat& src);    // dst += alpha * src
void ewise_mul(const Mat& A, const Mat& B, Mat& out);       // out = A .* B
void ewise_sub(const Mat& A, const Mat& B, Mat& out);       // out = A - B

}  // namespace cegm::kernels
