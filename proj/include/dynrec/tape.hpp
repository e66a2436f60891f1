#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dynrec/array.hpp"
#include "dynrec/rng.hpp"

namespace dynrec {

// Reverse-mode tape. Every op returns a Value; when gradient recording is on
// and an input is tracked, the result carries a backward closure and keeps
// its parents alive. With recording off (evaluation), ops are plain numeric
// kernels and the graph never grows.

struct TapeNode;
using Value = std::shared_ptr<TapeNode>;

struct TapeNode {
    Array val;
    Array grad;  // allocated on first use during backward
    bool tracked = false;
    std::string name;  // only set for named leaves
    std::vector<Value> parents;
    std::function<void(TapeNode&)> backfn;

    Array& g() {
        if (grad.numel() != val.numel()) grad = Array::zeros(val.shape);
        return grad;
    }
};

bool grad_enabled();
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

Value constant(Array v);
Value leaf(Array v, std::string name = "");

// elementwise / linear algebra
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double c);
Value matmul(const Value& a, const Value& b);
Value add_row(const Value& a, const Value& bias);
Value vtanh(const Value& a);
Value vsigmoid(const Value& a);
Value softmax_rows(const Value& a);
Value concat_cols(std::span<const Value> parts);
Value stack_rows(std::span<const Value> rows);
Value gather_cols(const Value& a, std::vector<std::size_t> idx);
Value sum_all(const Value& a);
Value mean_all(const Value& a);
Value sum_sq(const Value& a);
Value dot(const Value& a, const Value& b);
Value vsqrt(const Value& a);
Value reciprocal(const Value& a);
Value mul_by_scalar(const Value& a, const Value& s);
Value neg_log_sigmoid(const Value& a);
Value dropout(const Value& a, double rate, Rng& rng, bool train);

// scaled dot-product attention over already-projected q (1 x p), K,V (n x p).
// Per-head softmax over the n tokens; scaling 1/sqrt(p/heads). If weights is
// non-null it receives the (heads x n) attention distribution.
Value attention(const Value& q, const Value& K, const Value& V, std::size_t heads,
                Array* weights = nullptr);

// interleaved cos/sin functional time encoding, differentiable wrt omega
Value time_encode_op(const Value& omega, double delta_t);

void backward(const Value& root);

// Breaks parent links reachable from root so long graphs free iteratively.
void release_graph(const Value& root);

inline Value detach(const Value& v) { return constant(v->val); }

}  // namespace dynrec
