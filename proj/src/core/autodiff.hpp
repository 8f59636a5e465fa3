#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace lfb {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Same shape, but for malformed *content* (files, serialized blobs) rather
// than misuse of an interface.
inline void format_require(bool cond, const std::string& msg) {
    if (!cond) throw format_error(msg);
}

// ---------------------------------------------------------------------------
// Tape-based reverse-mode differentiation.
//
// A Node owns a value and (lazily) a gradient of the same shape. Ops compute
// the forward result eagerly and, when a Tape is supplied and some input
// requires gradient, push one backward step onto the tape. backward() seeds
// d(loss)/d(loss)=1 and replays the steps in reverse. Gradients *accumulate*;
// zeroing is explicit (optimizer / caller responsibility).
// ---------------------------------------------------------------------------

struct Node {
    Tensor4 value;
    Tensor4 grad;
    bool needs_grad = false;
    bool grad_live = false;  // grad allocated and participating

    void ensure_grad() {
        if (!grad_live) {
            grad = Tensor4(value.shape);
            grad_live = true;
        }
    }
    void zero_grad() {
        if (grad_live) grad.fill(0.0);
    }
};

using NodeRef = std::shared_ptr<Node>;

class Var {
public:
    Var() = default;
    explicit Var(NodeRef n) : n_(std::move(n)) {}

    static Var leaf(Tensor4 value, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->value = std::move(value);
        n->needs_grad = requires_grad;
        return Var(n);
    }

    bool defined() const { return n_ != nullptr; }
    const Tensor4& value() const { return n_->value; }
    Tensor4& value() { return n_->value; }
    const Tensor4& grad() const { return n_->grad; }
    Shape4 shape() const { return n_->value.shape; }
    bool needs_grad() const { return n_ && n_->needs_grad; }
    const NodeRef& node() const { return n_; }

private:
    NodeRef n_;
};

class Tape {
public:
    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

    // Seed the scalar output with gradient 1 and run all recorded steps in
    // reverse. The output must be a 1-element tensor that requires grad.
    void backward(const Var& scalar_out);

    std::size_t size() const { return steps_.size(); }

private:
    std::vector<std::function<void()>> steps_;
};

// Helper shared by all op implementations.
NodeRef make_result(Tensor4 value, bool needs_grad);

// ---------------------------------------------------------------------------
// Ops. `tape` may be null for pure evaluation (no backward step recorded).
// Every op validates shapes and throws std::invalid_argument on mismatch.
// ---------------------------------------------------------------------------

// y = x if x > 0 else alpha*(exp(x)-1)
Var elu(Tape* tape, const Var& x, double alpha = 1.0);
Var sigmoid(Tape* tape, const Var& x);
// Softmax across the channel axis per (n, y, x), max-subtracted for stability.
Var softmax_channels(Tape* tape, const Var& x);

Var add(Tape* tape, const Var& a, const Var& b);
Var mul(Tape* tape, const Var& a, const Var& b);
Var concat_channels(Tape* tape, const Var& a, const Var& b);
// 0.5*(a+b), elementwise; the exact arithmetic mean used to combine losses.
Var average2(Tape* tape, const Var& a, const Var& b);
Var mul_scalar(Tape* tape, const Var& x, double s);
Var sum_all(Tape* tape, const Var& x);  // -> (1,1,1,1)

// Mean over spatial dims -> (n, c, 1, 1).
Var global_avg_pool(Tape* tape, const Var& x);
// y[n,c,y,x] = x[n,c,y,x] * g[n,c,0,0]
Var scale_channels(Tape* tape, const Var& x, const Var& g);

// 2x2 max pooling, stride 2. Spatial dims must be even. On ties the first
// element in row-major window order wins; backward routes the gradient to
// that element only.
Var maxpool2d(Tape* tape, const Var& x);

struct BatchNormState {
    Tensor4 running_mean;  // (1, c, 1, 1)
    Tensor4 running_var;   // (1, c, 1, 1), population (biased) estimate
    double momentum = 0.9;  // running = momentum*running + (1-momentum)*batch
    double eps = 1e-5;

    explicit BatchNormState(int c = 0)
        : running_mean({1, c > 0 ? c : 1, 1, 1}),
          running_var({1, c > 0 ? c : 1, 1, 1}, 1.0) {}
};

// Per-channel batch normalization. training=true uses batch statistics and
// updates the running estimates; training=false uses the running estimates
// and leaves them untouched.
Var batchnorm2d(Tape* tape, const Var& x, const Var& gamma, const Var& beta,
                BatchNormState& state, bool training);

// weight (c_out, c_in, kh, kw); bias (1, c_out, 1, 1) or undefined Var.
// Zero padding; output (n, c_out, (h+2p-kh)/stride+1, (w+2p-kw)/stride+1).
Var conv2d(Tape* tape, const Var& x, const Var& weight, const Var& bias,
           int stride = 1, int padding = 0);

// weight (c_in, c_out, kh, kw); output (n, c_out, (h-1)*stride+kh, ...).
// With kh=kw=stride=2 this exactly doubles the spatial dims. Forward equals
// the gradient-by-input of conv2d with the same kernel (adjoint pair).
Var transposed_conv2d(Tape* tape, const Var& x, const Var& weight, const Var& bias,
                      int stride = 2);

// Squeeze-and-excitation gate: global average pool -> 1x1 conv (c -> c/r)
// -> ELU -> 1x1 conv (c/r -> c) -> sigmoid -> channel-wise rescale of x.
// w1 (c/r, c, 1, 1), w2 (c, c/r, 1, 1); no biases.
Var se_block(Tape* tape, const Var& x, const Var& w1, const Var& w2);

}  // namespace lfb
