#include "causalegm/ad.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "causalegm/kernels.hpp"

namespace cegm::ad {

using kernels::col_sum;
using kernels::matmul_nn;
using kernels::matmul_nt;
using kernels::matmul_tn;

Node* Tape::alloc() {
    nodes_.emplace_back();
    return &nodes_.back();
}

Node* Tape::constant(Mat v) {
    Node* n = alloc();
    n->val = std::move(v);
    return n;
}

Node* Tape::constant_ref(const Mat& v) {
    Node* n = alloc();
    n->bound = &v;
    return n;
}

Node* Tape::param(const Mat& value, Mat& grad_accum) {
    if (value.rows != grad_accum.rows || value.cols != grad_accum.cols)
        throw ShapeError("param: gradient buffer shape mismatch");
    Node* n = alloc();
    n->bound = &value;
    n->grad_sink = &grad_accum;
    n->needs_grad = true;
    return n;
}

Node* Tape::custom(Mat val, const std::vector<Node*>& parents,
                   std::function<void(Tape&, Node&)> backfn) {
    Node* n = alloc();
    n->val = std::move(val);
    for (const Node* p : parents)
        if (p->needs_grad) n->needs_grad = true;
    if (n->needs_grad) n->back = std::move(backfn);
    return n;
}

Mat& Tape::grad_buf(Node* n) {
    if (n->grad_sink) return *n->grad_sink;
    if (n->grad.empty()) n->grad = Mat::zeros(n->rows(), n->cols());
    return n->grad;
}

void accum(Tape& t, Node* parent, const Mat& delta) {
    if (!parent->needs_grad) return;
    kernels::ewise_add(t.grad_buf(parent), delta);
}

void Tape::backward(Node* loss) {
    if (loss->rows() != 1 || loss->cols() != 1)
        throw ShapeError("backward: loss must be a 1x1 scalar");
    grad_buf(loss).fill(1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = *it;
        if (n.back && n.needs_grad && !n.grad.empty()) n.back(*this, n);
    }
}

Node* Tape::matmul(Node* a, Node* b) {
    Mat out(a->rows(), b->cols());
    matmul_nn(a->v(), b->v(), out);
    Node* n = custom(std::move(out), {a, b}, [a, b](Tape& t, Node& self) {
        const Mat& g = self.grad;
        if (a->needs_grad) matmul_nt(g, b->v(), t.grad_buf(a), true);
        if (b->needs_grad) matmul_tn(a->v(), g, t.grad_buf(b), true);
    });
    return n;
}

Node* Tape::affine(Node* x, Node* w, Node* b) {
    if (b->rows() != 1 || b->cols() != w->cols())
        throw ShapeError("affine: bias must be 1 x output_dim");
    Mat out(x->rows(), w->cols());
    matmul_nn(x->v(), w->v(), out);
    kernels::add_bias_rows(out, b->v());
    return custom(std::move(out), {x, w, b}, [x, w, b](Tape& t, Node& self) {
        const Mat& g = self.grad;
        if (x->needs_grad) matmul_nt(g, w->v(), t.grad_buf(x), true);
        if (w->needs_grad) matmul_tn(x->v(), g, t.grad_buf(w), true);
        if (b->needs_grad) col_sum(g, t.grad_buf(b), true);
    });
}

Node* Tape::leaky_relu(Node* x, double slope) {
    Mat out(x->rows(), x->cols());
    kernels::leaky_relu_fwd(x->v(), slope, out);
    return custom(std::move(out), {x}, [x, slope](Tape& t, Node& self) {
        if (x->needs_grad) kernels::leaky_relu_bwd(x->v(), self.grad, slope, t.grad_buf(x), true);
    });
}

Node* Tape::sigmoid(Node* x) {
    Mat out(x->rows(), x->cols());
    kernels::sigmoid_fwd(x->v(), out);
    return custom(std::move(out), {x}, [x](Tape& t, Node& self) {
        if (x->needs_grad) kernels::sigmoid_bwd(self.val, self.grad, t.grad_buf(x), true);
    });
}

namespace {
struct BnCache {
    Mat xhat;  // normalized input
    Mat istd;  // 1 x d
};
}  // namespace

Node* Tape::batchnorm_train(Node* x, Node* gamma, Node* beta, Mat* run_mean, Mat* run_var,
                            double momentum, double eps, bool update_running) {
    const int n = x->rows(), d = x->cols();
    if (n < 2) throw ShapeError("batchnorm_train: batch size must be at least 2");
    Mat mean(1, d), var(1, d);
    kernels::col_mean_var(x->v(), mean, var);
    auto cache = std::make_shared<BnCache>();
    cache->istd = Mat(1, d);
    for (int j = 0; j < d; ++j) cache->istd(0, j) = 1.0 / std::sqrt(var(0, j) + eps);
    cache->xhat = Mat(n, d);
    for (int i = 0; i < n; ++i) {
        const double* xi = x->v().row(i);
        double* hi = cache->xhat.row(i);
        for (int j = 0; j < d; ++j) hi[j] = (xi[j] - mean(0, j)) * cache->istd(0, j);
    }
    if (update_running) {
        if (!run_mean || !run_var) throw ShapeError("batchnorm_train: missing running buffers");
        for (int j = 0; j < d; ++j) {
            (*run_mean)(0, j) = momentum * (*run_mean)(0, j) + (1.0 - momentum) * mean(0, j);
            (*run_var)(0, j) = momentum * (*run_var)(0, j) + (1.0 - momentum) * var(0, j);
        }
    }
    Mat out(n, d);
    for (int i = 0; i < n; ++i) {
        const double* hi = cache->xhat.row(i);
        double* oi = out.row(i);
        for (int j = 0; j < d; ++j) oi[j] = gamma->v()(0, j) * hi[j] + beta->v()(0, j);
    }
    return custom(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, cache, n, d](Tape& t, Node& self) {
                      const Mat& g = self.grad;
                      if (beta->needs_grad) col_sum(g, t.grad_buf(beta), true);
                      if (gamma->needs_grad) {
                          Mat gx(n, d);
                          kernels::ewise_mul(g, cache->xhat, gx);
                          col_sum(gx, t.grad_buf(gamma), true);
                      }
                      if (!x->needs_grad) return;
                      // dxhat = g .* gamma; dx = istd .* (dxhat - mean(dxhat)
                      //          - xhat .* mean(dxhat .* xhat)), means over the batch
                      Mat dxhat(n, d);
                      for (int i = 0; i < n; ++i) {
                          const double* gi = g.row(i);
                          double* di = dxhat.row(i);
                          for (int j = 0; j < d; ++j) di[j] = gi[j] * gamma->v()(0, j);
                      }
                      Mat m1(1, d), m2(1, d);
                      for (int j = 0; j < d; ++j) {
                          double s1 = 0.0, s2 = 0.0;
                          for (int i = 0; i < n; ++i) {
                              s1 += dxhat(i, j);
                              s2 += dxhat(i, j) * cache->xhat(i, j);
                          }
                          m1(0, j) = s1 / n;
                          m2(0, j) = s2 / n;
                      }
                      Mat& gx = t.grad_buf(x);
                      for (int i = 0; i < n; ++i) {
                          double* gxi = gx.row(i);
                          const double* di = dxhat.row(i);
                          const double* hi = cache->xhat.row(i);
                          for (int j = 0; j < d; ++j)
                              gxi[j] += cache->istd(0, j) * (di[j] - m1(0, j) - hi[j] * m2(0, j));
                      }
                  });
}

Node* Tape::batchnorm_eval(Node* x, Node* gamma, Node* beta, const Mat& mean, const Mat& var,
                           double eps) {
    const int n = x->rows(), d = x->cols();
    require_shape(mean, 1, d, "batchnorm_eval mean");
    require_shape(var, 1, d, "batchnorm_eval var");
    auto cache = std::make_shared<BnCache>();
    cache->istd = Mat(1, d);
    for (int j = 0; j < d; ++j) cache->istd(0, j) = 1.0 / std::sqrt(var(0, j) + eps);
    cache->xhat = Mat(n, d);
    Mat out(n, d);
    for (int i = 0; i < n; ++i) {
        const double* xi = x->v().row(i);
        double* hi = cache->xhat.row(i);
        double* oi = out.row(i);
        for (int j = 0; j < d; ++j) {
            hi[j] = (xi[j] - mean(0, j)) * cache->istd(0, j);
            oi[j] = gamma->v()(0, j) * hi[j] + beta->v()(0, j);
        }
    }
    return custom(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, cache, n, d](Tape& t, Node& self) {
                      const Mat& g = self.grad;
                      if (beta->needs_grad) col_sum(g, t.grad_buf(beta), true);
                      if (gamma->needs_grad) {
                          Mat gx(n, d);
                          kernels::ewise_mul(g, cache->xhat, gx);
                          col_sum(gx, t.grad_buf(gamma), true);
                      }
                      if (!x->needs_grad) return;
                      Mat& gx = t.grad_buf(x);
                      for (int i = 0; i < n; ++i) {
                          double* gxi = gx.row(i);
                          const double* gi = g.row(i);
                          for (int j = 0; j < d; ++j)
                              gxi[j] += gi[j] * gamma->v()(0, j) * cache->istd(0, j);
                      }
                  });
}

Node* Tape::slice_cols(Node* x, int c0, int c1) {
    if (c0 < 0 || c1 > x->cols() || c0 >= c1) throw ShapeError("slice_cols: bad column range");
    const int n = x->rows(), w = c1 - c0;
    Mat out(n, w);
    for (int i = 0; i < n; ++i) {
        const double* xi = x->v().row(i);
        double* oi = out.row(i);
        for (int j = 0; j < w; ++j) oi[j] = xi[c0 + j];
    }
    return custom(std::move(out), {x}, [x, c0, w](Tape& t, Node& self) {
        if (!x->needs_grad) return;
        Mat& gx = t.grad_buf(x);
        for (int i = 0; i < self.val.rows; ++i) {
            const double* gi = self.grad.row(i);
            double* gxi = gx.row(i);
            for (int j = 0; j < w; ++j) gxi[c0 + j] += gi[j];
        }
    });
}

Node* Tape::concat_cols(const std::vector<Node*>& xs) {
    if (xs.empty()) throw ShapeError("concat_cols: no inputs");
    const int n = xs[0]->rows();
    int total = 0;
    for (const Node* p : xs) {
        if (p->rows() != n) throw ShapeError("concat_cols: row count mismatch");
        total += p->cols();
    }
    Mat out(n, total);
    int off = 0;
    for (const Node* p : xs) {
        const int w = p->cols();
        for (int i = 0; i < n; ++i) {
            const double* pi = p->v().row(i);
            double* oi = out.row(i) + off;
            for (int j = 0; j < w; ++j) oi[j] = pi[j];
        }
        off += w;
    }
    std::vector<Node*> parents = xs;
    return custom(std::move(out), parents, [parents](Tape& t, Node& self) {
        int off2 = 0;
        for (Node* p : parents) {
            const int w = p->cols();
            if (p->needs_grad) {
                Mat& gx = t.grad_buf(p);
                for (int i = 0; i < self.val.rows; ++i) {
                    const double* gi = self.grad.row(i) + off2;
                    double* gxi = gx.row(i);
                    for (int j = 0; j < w; ++j) gxi[j] += gi[j];
                }
            }
            off2 += w;
        }
    });
}

Node* Tape::add(Node* a, Node* b) {
    if (a->rows() != b->rows() || a->cols() != b->cols())
        throw ShapeError("add: shape mismatch");
    Mat out(a->rows(), a->cols());
    for (std::size_t i = 0; i < out.size(); ++i) out.a[i] = a->v().a[i] + b->v().a[i];
    return custom(std::move(out), {a, b}, [a, b](Tape& t, Node& self) {
        accum(t, a, self.grad);
        accum(t, b, self.grad);
    });
}

Node* Tape::sub(Node* a, Node* b) {
    if (a->rows() != b->rows() || a->cols() != b->cols())
        throw ShapeError("sub: shape mismatch");
    Mat out(a->rows(), a->cols());
    kernels::ewise_sub(a->v(), b->v(), out);
    return custom(std::move(out), {a, b}, [a, b](Tape& t, Node& self) {
        accum(t, a, self.grad);
        if (b->needs_grad) kernels::ewise_axpy(t.grad_buf(b), -1.0, self.grad);
    });
}

Node* Tape::scale(Node* x, double c) {
    Mat out(x->rows(), x->cols());
    for (std::size_t i = 0; i < out.size(); ++i) out.a[i] = c * x->v().a[i];
    return custom(std::move(out), {x}, [x, c](Tape& t, Node& self) {
        if (x->needs_grad) kernels::ewise_axpy(t.grad_buf(x), c, self.grad);
    });
}

Node* Tape::mean_all(Node* x) {
    Mat out(1, 1);
    out(0, 0) = kernels::mean_all(x->v());
    return custom(std::move(out), {x}, [x](Tape& t, Node& self) {
        if (!x->needs_grad) return;
        const double c = self.grad(0, 0) / static_cast<double>(x->v().size());
        Mat& gx = t.grad_buf(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx.a[i] += c;
    });
}

Node* Tape::mean_row_sumsq(Node* x) {
    Mat out(1, 1);
    out(0, 0) = kernels::sum_squares(x->v()) / static_cast<double>(x->rows());
    return custom(std::move(out), {x}, [x](Tape& t, Node& self) {
        if (!x->needs_grad) return;
        const double c = self.grad(0, 0) * 2.0 / static_cast<double>(x->rows());
        kernels::ewise_axpy(t.grad_buf(x), c, x->v());
    });
}

Node* Tape::add_scalars(const std::vector<Node*>& xs) {
    if (xs.empty()) throw ShapeError("add_scalars: no inputs");
    Mat out(1, 1);
    for (const Node* p : xs) {
        if (p->rows() != 1 || p->cols() != 1) throw ShapeError("add_scalars: non-scalar input");
        out(0, 0) += p->v()(0, 0);
    }
    std::vector<Node*> parents = xs;
    return custom(std::move(out), parents, [parents](Tape& t, Node& self) {
        for (Node* p : parents) accum(t, p, self.grad);
    });
}

}  // namespace cegm::ad
