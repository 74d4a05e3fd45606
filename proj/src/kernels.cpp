#include "causalegm/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cegm::kernels {

ParallelConfig& parallel_config() {
    static ParallelConfig cfg;
    return cfg;
}

void set_parallel_enabled(bool on) { parallel_config().enabled = on; }

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

static bool use_parallel(std::size_t work_elements) {
#ifdef _OPENMP
    const ParallelConfig& cfg = parallel_config();
    return cfg.enabled && work_elements >= cfg.min_elements && omp_get_max_threads() > 1;
#else
    (void)work_elements;
    return false;
#endif
}

static void check_matmul_nn(const Mat& A, const Mat& B, const Mat& C) {
    if (A.cols != B.rows || C.rows != A.rows || C.cols != B.cols)
        throw ShapeError("matmul_nn: incompatible shapes");
}

static void check_matmul_tn(const Mat& A, const Mat& B, const Mat& C) {
    if (A.rows != B.rows || C.rows != A.cols || C.cols != B.cols)
        throw ShapeError("matmul_tn: incompatible shapes");
}

static void check_matmul_nt(const Mat& A, const Mat& B, const Mat& C) {
    if (A.cols != B.cols || C.rows != A.rows || C.cols != B.rows)
        throw ShapeError("matmul_nt: incompatible shapes");
}

namespace serial {

void matmul_nn(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    check_matmul_nn(A, B, C);
    const int n = A.rows, k = A.cols, m = B.cols;
    for (int i = 0; i < n; ++i) {
        double* ci = C.row(i);
        if (!accumulate) std::fill(ci, ci + m, 0.0);
        const double* ai = A.row(i);
        for (int l = 0; l < k; ++l) {
            const double a = ai[l];
            const double* bl = B.row(l);
            for (int j = 0; j < m; ++j) ci[j] += a * bl[j];
        }
    }
}

void matmul_tn(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    check_matmul_tn(A, B, C);
    const int n = A.rows, k = A.cols, m = B.cols;
    for (int i = 0; i < k; ++i) {
        double* ci = C.row(i);
        if (!accumulate) std::fill(ci, ci + m, 0.0);
        for (int l = 0; l < n; ++l) {
            const double a = A(l, i);
            const double* bl = B.row(l);
            for (int j = 0; j < m; ++j) ci[j] += a * bl[j];
        }
    }
}

// B is transposed into a scratch buffer first so the inner loop runs over
// contiguous memory without a reduction; per output element the addition
// order (ascending l) is the same as a direct row-dot-product would use.
static void transpose_into(const Mat& B, Mat& BT) {
    if (BT.rows != B.cols || BT.cols != B.rows) BT = Mat(B.cols, B.rows);
    for (int i = 0; i < B.rows; ++i) {
        const double* bi = B.row(i);
        for (int j = 0; j < B.cols; ++j) BT(j, i) = bi[j];
    }
}

void matmul_nt(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    check_matmul_nt(A, B, C);
    thread_local Mat scratch;
    transpose_into(B, scratch);
    const int n = A.rows, k = A.cols, m = B.rows;
    for (int i = 0; i < n; ++i) {
        double* ci = C.row(i);
        if (!accumulate) std::fill(ci, ci + m, 0.0);
        const double* ai = A.row(i);
        for (int l = 0; l < k; ++l) {
            const double a = ai[l];
            const double* bl = scratch.row(l);
            for (int j = 0; j < m; ++j) ci[j] += a * bl[j];
        }
    }
}

void add_bias_rows(Mat& X, const Mat& bias) {
    require_shape(bias, 1, X.cols, "add_bias_rows bias");
    const int n = X.rows, m = X.cols;
    const double* b = bias.data();
    for (int i = 0; i < n; ++i) {
        double* xi = X.row(i);
        for (int j = 0; j < m; ++j) xi[j] += b[j];
    }
}

void col_sum(const Mat& X, Mat& out, bool accumulate) {
    require_shape(out, 1, X.cols, "col_sum out");
    const int n = X.rows, m = X.cols;
    double* o = out.data();
    for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += X(i, j);
        o[j] = accumulate ? o[j] + s : s;
    }
}

void col_mean_var(const Mat& X, Mat& mean, Mat& var) {
    require_shape(mean, 1, X.cols, "col_mean_var mean");
    require_shape(var, 1, X.cols, "col_mean_var var");
    const int n = X.rows, m = X.cols;
    if (n == 0) throw ShapeError("col_mean_var: empty batch");
    for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += X(i, j);
        const double mu = s / n;
        double v = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = X(i, j) - mu;
            v += d * d;
        }
        mean(0, j) = mu;
        var(0, j) = v / n;
    }
}

void leaky_relu_fwd(const Mat& X, double slope, Mat& Y) {
    require_shape(Y, X.rows, X.cols, "leaky_relu_fwd out");
    const std::size_t sz = X.size();
    const double* x = X.data();
    double* y = Y.data();
    for (std::size_t i = 0; i < sz; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_bwd(const Mat& X, const Mat& G, double slope, Mat& dX, bool accumulate) {
    require_shape(G, X.rows, X.cols, "leaky_relu_bwd grad");
    require_shape(dX, X.rows, X.cols, "leaky_relu_bwd out");
    const std::size_t sz = X.size();
    const double* x = X.data();
    const double* g = G.data();
    double* d = dX.data();
    for (std::size_t i = 0; i < sz; ++i) {
        const double v = g[i] * (x[i] > 0.0 ? 1.0 : slope);
        d[i] = accumulate ? d[i] + v : v;
    }
}

void sigmoid_fwd(const Mat& X, Mat& Y) {
    require_shape(Y, X.rows, X.cols, "sigmoid_fwd out");
    const std::size_t sz = X.size();
    const double* x = X.data();
    double* y = Y.data();
    for (std::size_t i = 0; i < sz; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void sigmoid_bwd(const Mat& Y, const Mat& G, Mat& dX, bool accumulate) {
    require_shape(G, Y.rows, Y.cols, "sigmoid_bwd grad");
    require_shape(dX, Y.rows, Y.cols, "sigmoid_bwd out");
    const std::size_t sz = Y.size();
    const double* y = Y.data();
    const double* g = G.data();
    double* d = dX.data();
    for (std::size_t i = 0; i < sz; ++i) {
        const double v = g[i] * y[i] * (1.0 - y[i]);
        d[i] = accumulate ? d[i] + v : v;
    }
}

}  // namespace serial

namespace omp {

void matmul_nn(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    check_matmul_nn(A, B, C);
    const int n = A.rows, k = A.cols, m = B.cols;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* ci = C.row(i);
        if (!accumulate) std::fill(ci, ci + m, 0.0);
        const double* ai = A.row(i);
        for (int l = 0; l < k; ++l) {
            const double a = ai[l];
            const double* bl = B.row(l);
            for (int j = 0; j < m; ++j) ci[j] += a * bl[j];
        }
    }
}

void matmul_tn(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    check_matmul_tn(A, B, C);
    const int n = A.rows, k = A.cols, m = B.cols;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < k; ++i) {
        double* ci = C.row(i);
        if (!accumulate) std::fill(ci, ci + m, 0.0);
        for (int l = 0; l < n; ++l) {
            const double a = A(l, i);
            const double* bl = B.row(l);
            for (int j = 0; j < m; ++j) ci[j] += a * bl[j];
        }
    }
}

void matmul_nt(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    check_matmul_nt(A, B, C);
    Mat scratch(B.cols, B.rows);
    for (int i = 0; i < B.rows; ++i) {
        const double* bi = B.row(i);
        for (int j = 0; j < B.cols; ++j) scratch(j, i) = bi[j];
    }
    const int n = A.rows, k = A.cols, m = B.rows;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* ci = C.row(i);
        if (!accumulate) std::fill(ci, ci + m, 0.0);
        const double* ai = A.row(i);
        for (int l = 0; l < k; ++l) {
            const double a = ai[l];
            const double* bl = scratch.row(l);
            for (int j = 0; j < m; ++j) ci[j] += a * bl[j];
        }
    }
}

void add_bias_rows(Mat& X, const Mat& bias) {
    require_shape(bias, 1, X.cols, "add_bias_rows bias");
    const int n = X.rows, m = X.cols;
    const double* b = bias.data();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* xi = X.row(i);
        for (int j = 0; j < m; ++j) xi[j] += b[j];
    }
}

void col_sum(const Mat& X, Mat& out, bool accumulate) {
    require_shape(out, 1, X.cols, "col_sum out");
    const int n = X.rows, m = X.cols;
    double* o = out.data();
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += X(i, j);
        o[j] = accumulate ? o[j] + s : s;
    }
}

void col_mean_var(const Mat& X, Mat& mean, Mat& var) {
    require_shape(mean, 1, X.cols, "col_mean_var mean");
    require_shape(var, 1, X.cols, "col_mean_var var");
    const int n = X.rows, m = X.cols;
    if (n == 0) throw ShapeError("col_mean_var: empty batch");
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += X(i, j);
        const double mu = s / n;
        double v = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = X(i, j) - mu;
            v += d * d;
        }
        mean(0, j) = mu;
        var(0, j) = v / n;
    }
}

void leaky_relu_fwd(const Mat& X, double slope, Mat& Y) {
    require_shape(Y, X.rows, X.cols, "leaky_relu_fwd out");
    const int n = X.rows, m = X.cols;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* x = X.row(i);
        double* y = Y.row(i);
        for (int j = 0; j < m; ++j) y[j] = x[j] > 0.0 ? x[j] : slope * x[j];
    }
}

void leaky_relu_bwd(const Mat& X, const Mat& G, double slope, Mat& dX, bool accumulate) {
    require_shape(G, X.rows, X.cols, "leaky_relu_bwd grad");
    require_shape(dX, X.rows, X.cols, "leaky_relu_bwd out");
    const int n = X.rows, m = X.cols;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* x = X.row(i);
        const double* g = G.row(i);
        double* d = dX.row(i);
        for (int j = 0; j < m; ++j) {
            const double v = g[j] * (x[j] > 0.0 ? 1.0 : slope);
            d[j] = accumulate ? d[j] + v : v;
        }
    }
}

void sigmoid_fwd(const Mat& X, Mat& Y) {
    require_shape(Y, X.rows, X.cols, "sigmoid_fwd out");
    const int n = X.rows, m = X.cols;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* x = X.row(i);
        double* y = Y.row(i);
        for (int j = 0; j < m; ++j) y[j] = 1.0 / (1.0 + std::exp(-x[j]));
    }
}

void sigmoid_bwd(const Mat& Y, const Mat& G, Mat& dX, bool accumulate) {
    require_shape(G, Y.rows, Y.cols, "sigmoid_bwd grad");
    require_shape(dX, Y.rows, Y.cols, "sigmoid_bwd out");
    const int n = Y.rows, m = Y.cols;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* y = Y.row(i);
        const double* g = G.row(i);
        double* d = dX.row(i);
        for (int j = 0; j < m; ++j) {
            const double v = g[j] * y[j] * (1.0 - y[j]);
            d[j] = accumulate ? d[j] + v : v;
        }
    }
}

}  // namespace omp

void matmul_nn(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    const std::size_t work = static_cast<std::size_t>(A.rows) * A.cols * B.cols;
    if (use_parallel(work))
        omp::matmul_nn(A, B, C, accumulate);
    else
        serial::matmul_nn(A, B, C, accumulate);
}

void matmul_tn(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    const std::size_t work = static_cast<std::size_t>(A.rows) * A.cols * B.cols;
    if (use_parallel(work))
        omp::matmul_tn(A, B, C, accumulate);
    else
        serial::matmul_tn(A, B, C, accumulate);
}

void matmul_nt(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    const std::size_t work = static_cast<std::size_t>(A.rows) * A.cols * B.rows;
    if (use_parallel(work))
        omp::matmul_nt(A, B, C, accumulate);
    else
        serial::matmul_nt(A, B, C, accumulate);
}

void add_bias_rows(Mat& X, const Mat& bias) {
    if (use_parallel(X.size()))
        omp::add_bias_rows(X, bias);
    else
        serial::add_bias_rows(X, bias);
}

void col_sum(const Mat& X, Mat& out, bool accumulate) {
    if (use_parallel(X.size()))
        omp::col_sum(X, out, accumulate);
    else
        serial::col_sum(X, out, accumulate);
}

void col_mean_var(const Mat& X, Mat& mean, Mat& var) {
    if (use_parallel(X.size()))
        omp::col_mean_var(X, mean, var);
    else
        serial::col_mean_var(X, mean, var);
}

void leaky_relu_fwd(const Mat& X, double slope, Mat& Y) {
    if (use_parallel(X.size()))
        omp::leaky_relu_fwd(X, slope, Y);
    else
        serial::leaky_relu_fwd(X, slope, Y);
}

void leaky_relu_bwd(const Mat& X, const Mat& G, double slope, Mat& dX, bool accumulate) {
    if (use_parallel(X.size()))
        omp::leaky_relu_bwd(X, G, slope, dX, accumulate);
    else
        serial::leaky_relu_bwd(X, G, slope, dX, accumulate);
}

void sigmoid_fwd(const Mat& X, Mat& Y) {
    if (use_parallel(X.size()))
        omp::sigmoid_fwd(X, Y);
    else
        serial::sigmoid_fwd(X, Y);
}

void sigmoid_bwd(const Mat& Y, const Mat& G, Mat& dX, bool accumulate) {
    if (use_parallel(Y.size()))
        omp::sigmoid_bwd(Y, G, dX, accumulate);
    else
        serial::sigmoid_bwd(Y, G, dX, accumulate);
}

double sum_all(const Mat& X) {
    double s = 0.0;
    for (double v : X.a) s += v;
    return s;
}

double mean_all(const Mat& X) {
    if (X.empty()) throw ShapeError("mean_all: empty matrix");
    return sum_all(X) / static_cast<double>(X.size());
}

double sum_squares(const Mat& X) {
    double s = 0.0;
    for (double v : X.a) s += v * v;
    return s;
}

void ewise_add(Mat& dst, const Mat& src) {
    if (!dst.same_shape(src)) throw ShapeError("ewise_add: shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst.a[i] += src.a[i];
}

void ewise_axpy(Mat& dst, double alpha, const Mat& src) {
    if (!dst.same_shape(src)) throw ShapeError("ewise_axpy: shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst.a[i] += alpha * src.a[i];
}

void ewise_mul(const Mat& A, const Mat& B, Mat& out) {
    if (!A.same_shape(B) || !A.same_shape(out)) throw ShapeError("ewise_mul: shape mismatch");
    for (std::size_t i = 0; i < A.size(); ++i) out.a[i] = A.a[i] * B.a[i];
}

void ewise_sub(const Mat& A, const Mat& B, Mat& out) {
    if (!A.same_shape(B) || !A.same_shape(out)) throw ShapeError("ewise_sub: shape mismatch");
    for (std::size_t i = 0; i < A.size(); ++i) out.a[i] = A.a[i] - B.a[i];
}

}  // namespace cegm::kernels
