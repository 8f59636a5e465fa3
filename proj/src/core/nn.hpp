#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/rng.hpp"

namespace lfb {

// A named, persistent trainable tensor. The underlying Node survives across
// tapes so gradients accumulate into the same buffer every step. Freezing is
// a marker honored by the optimizer (and by the systems when resolving batch
// norm mode); it does not alter tape behavior.
class Parameter {
public:
    Parameter(std::string name, Tensor4 value)
        : name_(std::move(name)) {
        node_ = std::make_shared<Node>();
        node_->value = std::move(value);
        node_->needs_grad = true;
    }

    const std::string& name() const { return name_; }
    Var var() const { return Var(node_); }
    Tensor4& value() { return node_->value; }
    const Tensor4& value() const { return node_->value; }
    Tensor4& grad() { return node_->grad; }
    bool grad_live() const { return node_->grad_live; }
    void zero_grad() { node_->zero_grad(); }

    bool frozen() const { return frozen_; }
    void set_frozen(bool f) { frozen_ = f; }

private:
    std::string name_;
    NodeRef node_;
    bool frozen_ = false;
};

// Ordered parameter/state registry for one system. Registration order is the
// checkpoint record order and the weight-initialization draw order, so it is
// part of the reproducibility contract.
class ParamSet {
public:
    Parameter* add_he_uniform(const std::string& name, Shape4 shape, int fan_in, Rng& rng);
    Parameter* add_constant(const std::string& name, Shape4 shape, double value);

    // Non-trainable named state (batch norm running estimates).
    void add_state(const std::string& name, Tensor4* tensor);

    const std::vector<Parameter*>& params() const { return params_; }

    struct StateEntry {
        std::string name;
        Tensor4* tensor;
    };
    // All persistent tensors in registration order: parameters first-come,
    // with running stats interleaved where their layers registered them.
    std::vector<StateEntry> entries();

    std::size_t parameter_count(const std::string& prefix = "") const;
    void set_frozen(const std::string& prefix, bool frozen);

    // FNV-1a over the raw bytes of every persistent tensor (parameters and
    // running stats) whose name starts with prefix; bit-level fingerprint.
    std::uint64_t state_hash(const std::string& prefix = "") const;

private:
    std::deque<Parameter> storage_;
    std::vector<Parameter*> params_;
    std::vector<StateEntry> order_;
};

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------

struct Conv2d {
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;  // null when bias-free
    int stride = 1, padding = 0;

    Conv2d() = default;
    Conv2d(ParamSet& ps, const std::string& name, int c_in, int c_out, int k,
           int stride, int padding, bool with_bias, Rng& rng);
    Var forward(Tape* tape, const Var& x) const;
};

struct TransposedConv2d {
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;
    int stride = 2;

    TransposedConv2d() = default;
    TransposedConv2d(ParamSet& ps, const std::string& name, int c_in, int c_out,
                     int k, int stride, Rng& rng);
    Var forward(Tape* tape, const Var& x) const;
};

struct BatchNorm {
    Parameter* gamma = nullptr;
    Parameter* beta = nullptr;
    std::unique_ptr<BatchNormState> state;

    BatchNorm() = default;
    BatchNorm(ParamSet& ps, const std::string& name, int c);
    Var forward(Tape* tape, const Var& x, bool training) const;
};

struct SqueezeExcite {
    Parameter* w1 = nullptr;
    Parameter* w2 = nullptr;

    SqueezeExcite() = default;
    SqueezeExcite(ParamSet& ps, const std::string& name, int c, int reduction, Rng& rng);
    Var forward(Tape* tape, const Var& x) const;
};

// repeats x [3x3 conv (pad 1) -> ELU -> batch norm], optionally followed by a
// squeeze-excitation gate. Spatial dims are preserved.
struct ConvBlock {
    std::vector<Conv2d> convs;
    std::vector<BatchNorm> bns;
    std::optional<SqueezeExcite> se;

    ConvBlock() = default;
    ConvBlock(ParamSet& ps, const std::string& name, int c_in, int c_out, int repeats,
              bool with_se, int se_reduction, Rng& rng);
    Var forward(Tape* tape, const Var& x, bool training) const;
};

}  // namespace lfb
