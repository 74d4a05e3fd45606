#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "causalegm/mat.hpp"

// Reverse-mode automatic differentiation on matrices. A Tape owns the nodes
// of one computation; ops evaluate eagerly at build time and record a
// backward closure. backward() walks the nodes in reverse creation order,
// which is a valid topological order because graphs are built by
// straight-line code.

namespace cegm::ad {

class Tape;

struct Node {
    Mat val;                     // owned value (computed nodes, owned leaves)
    const Mat* bound = nullptr;  // external value storage (bound leaves)
    Mat grad;                    // owned gradient, allocated on first use
    Mat* grad_sink = nullptr;    // external gradient accumulator (parameter leaves)
    bool needs_grad = false;
    std::function<void(Tape&, Node&)> back;

    const Mat& v() const { return bound ? *bound : val; }
    int rows() const { return v().rows; }
    int cols() const { return v().cols; }
};

class Tape {
  public:
    // leaves
    Node* constant(Mat v);
    Node* constant_ref(const Mat& v);  // borrows v; caller keeps it alive
    Node* param(const Mat& value, Mat& grad_accum);

    // generic node, used by ops defined outside this file
    Node* custom(Mat val, const std::vector<Node*>& parents,
                 std::function<void(Tape&, Node&)> backfn);

    // ops
    Node* matmul(Node* a, Node* b);
    Node* affine(Node* x, Node* w, Node* b);  // x*w + bias rows
    Node* leaky_relu(Node* x, double slope);
    Node* sigmoid(Node* x);
    Node* batchnorm_train(Node* x, Node* gamma, Node* beta, Mat* run_mean, Mat* run_var,
                          double momentum, double eps, bool update_running);
    Node* batchnorm_eval(Node* x, Node* gamma, Node* beta, const Mat& mean, const Mat& var,
                         double eps);
    Node* slice_cols(Node* x, int c0, int c1);
    Node* concat_cols(const std::vector<Node*>& xs);
    Node* add(Node* a, Node* b);
    Node* sub(Node* a, Node* b);
    Node* scale(Node* x, double c);
    Node* mean_all(Node* x);          // 1x1
    Node* mean_row_sumsq(Node* x);    // 1x1: sum of squares / rows
    Node* add_scalars(const std::vector<Node*>& xs);

    // runs reverse accumulation from a scalar loss node
    void backward(Node* loss);

    // gradient buffer of a node, allocated (zeros) on first access
    Mat& grad_buf(Node* n);

    std::size_t node_count() const { return nodes_.size(); }

  private:
    Node* alloc();
    std::deque<Node> nodes_;  // deque keeps node addresses stable
};

// accumulate delta into parent's gradient if it participates in the graph
void accum(Tape& t, Node* parent, const Mat& delta);

}  // namespace cegm::ad
