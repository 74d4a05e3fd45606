// Throughput comparison between the serial reference kernels and their OpenMP
// versions on the matrix shapes the training loop actually produces, plus a
// check that both paths give bitwise identical results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "causalegm/kernels.hpp"
#include "causalegm/mat.hpp"
#include "causalegm/rng.hpp"

using namespace cegm;
using Clock = std::chrono::steady_clock;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
    Mat m(r, c);
    for (double& v : m.a) v = rng.normal();
    return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.a[i] - b.a[i]));
    return worst;
}

// best-of-reps wall time for one call
double time_call(const std::function<void()>& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        fn();
        const auto t1 = Clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

struct Shape {
    const char* label;
    int n, k, m;
};

}  // namespace

int main() {
    // batch x layer shapes from the default architecture, plus two larger
    // ones where the parallel path should earn its keep
    const std::vector<Shape> shapes = {
        {"batch fwd      ", 32, 64, 64},    {"wide input     ", 32, 200, 64},
        {"curve eval     ", 2000, 64, 64},  {"dataset encode ", 10000, 64, 64},
        {"large          ", 2000, 200, 200}};

    std::printf("threads available: %d\n", kernels::max_threads());
    std::printf("%-16s %10s %12s %12s %9s %10s\n", "shape", "n,k,m", "serial ms", "omp ms",
                "speedup", "max|diff|");

    Rng rng(7);
    for (const Shape& s : shapes) {
        const Mat A = random_mat(s.n, s.k, rng);
        const Mat B = random_mat(s.k, s.m, rng);
        Mat C_serial(s.n, s.m), C_omp(s.n, s.m);

        const double flops = 2.0 * s.n * s.k * s.m;
        const int reps = flops > 1e8 ? 3 : 20;
        const double t_serial =
            time_call([&] { kernels::serial::matmul_nn(A, B, C_serial); }, reps);
        const double t_omp = time_call([&] { kernels::omp::matmul_nn(A, B, C_omp); }, reps);
        const double diff = max_abs_diff(C_serial, C_omp);

        char dims[32];
        std::snprintf(dims, sizeof dims, "%d,%d,%d", s.n, s.k, s.m);
        std::printf("%-16s %10s %12.3f %12.3f %8.2fx %10.2e\n", s.label, dims,
                    t_serial * 1e3, t_omp * 1e3, t_serial / t_omp, diff);
        if (diff != 0.0) {
            std::fprintf(stderr, "error: contract: serial and omp results differ\n");
            return 1;
        }
    }
    return 0;
}
