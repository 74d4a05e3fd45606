#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "causalegm/errors.hpp"

namespace cegm {

// Dense row-major matrix of doubles. Deliberately minimal: storage, shape
// and element access. All heavy arithmetic lives in kernels.hpp so that the
// serial and OpenMP code paths stay comparable.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw ShapeError("Mat: negative dimension");
    }
    Mat(int r, int c, double fill_value)
        : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill_value) {}

    static Mat zeros(int r, int c) { return Mat(r, c); }
    static Mat full(int r, int c, double v) { return Mat(r, c, v); }

    std::size_t size() const { return a.size(); }
    bool empty() const { return a.empty(); }

    double* data() { return a.data(); }
    const double* data() const { return a.data(); }

    double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    void fill(double v) { std::fill(a.begin(), a.end(), v); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline void require_shape(const Mat& m, int r, int c, const char* what) {
    if (m.rows != r || m.cols != c)
        throw ShapeError(std::string(what) + ": expected " + std::to_string(r) + "x" +
                         std::to_string(c) + ", got " + std::to_string(m.rows) + "x" +
                         std::to_string(m.cols));
}

}  // namespace cegm
