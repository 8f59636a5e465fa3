#include "core/nn.hpp"

#include <cmath>

namespace lfb {

Parameter* ParamSet::add_he_uniform(const std::string& name, Shape4 shape, int fan_in,
                                    Rng& rng) {
    Tensor4 t(shape);
    const double bound = std::sqrt(6.0 / double(fan_in));
    for (double& v : t.v) v = rng.uniform(-bound, bound);
    storage_.emplace_back(name, std::move(t));
    Parameter* p = &storage_.back();
    params_.push_back(p);
    order_.push_back({name, &p->value()});
    return p;
}

Parameter* ParamSet::add_constant(const std::string& name, Shape4 shape, double value) {
    storage_.emplace_back(name, Tensor4(shape, value));
    Parameter* p = &storage_.back();
    params_.push_back(p);
    order_.push_back({name, &p->value()});
    return p;
}

void ParamSet::add_state(const std::string& name, Tensor4* tensor) {
    order_.push_back({name, tensor});
}

std::vector<ParamSet::StateEntry> ParamSet::entries() { return order_; }

std::size_t ParamSet::parameter_count(const std::string& prefix) const {
    std::size_t total = 0;
    for (const Parameter* p : params_)
        if (p->name().rfind(prefix, 0) == 0) total += p->value().size();
    return total;
}

void ParamSet::set_frozen(const std::string& prefix, bool frozen) {
    for (Parameter* p : params_)
        if (p->name().rfind(prefix, 0) == 0) p->set_frozen(frozen);
}

std::uint64_t ParamSet::state_hash(const std::string& prefix) const {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& e : order_) {
        if (e.name.rfind(prefix, 0) != 0) continue;
        h = fnv1a64(e.name.data(), e.name.size(), h);
        h = fnv1a64(e.tensor->data(), e.tensor->size() * sizeof(double), h);
    }
    return h;
}

// ---------------------------------------------------------------------------

Conv2d::Conv2d(ParamSet& ps, const std::string& name, int c_in, int c_out, int k,
               int stride_, int padding_, bool with_bias, Rng& rng)
    : stride(stride_), padding(padding_) {
    weight = ps.add_he_uniform(name + "/weight", {c_out, c_in, k, k}, c_in * k * k, rng);
    if (with_bias) bias = ps.add_constant(name + "/bias", {1, c_out, 1, 1}, 0.0);
}

Var Conv2d::forward(Tape* tape, const Var& x) const {
    return conv2d(tape, x, weight->var(), bias ? bias->var() : Var(), stride, padding);
}

TransposedConv2d::TransposedConv2d(ParamSet& ps, const std::string& name, int c_in,
                                   int c_out, int k, int stride_, Rng& rng)
    : stride(stride_) {
    weight = ps.add_he_uniform(name + "/weight", {c_in, c_out, k, k}, c_in * k * k, rng);
    bias = ps.add_constant(name + "/bias", {1, c_out, 1, 1}, 0.0);
}

Var TransposedConv2d::forward(Tape* tape, const Var& x) const {
    return transposed_conv2d(tape, x, weight->var(), bias->var(), stride);
}

BatchNorm::BatchNorm(ParamSet& ps, const std::string& name, int c)
    : state(std::make_unique<BatchNormState>(c)) {
    gamma = ps.add_constant(name + "/gamma", {1, c, 1, 1}, 1.0);
    beta = ps.add_constant(name + "/beta", {1, c, 1, 1}, 0.0);
    ps.add_state(name + "/running_mean", &state->running_mean);
    ps.add_state(name + "/running_var", &state->running_var);
}

Var BatchNorm::forward(Tape* tape, const Var& x, bool training) const {
    return batchnorm2d(tape, x, gamma->var(), beta->var(), *state, training);
}

SqueezeExcite::SqueezeExcite(ParamSet& ps, const std::string& name, int c, int reduction,
                             Rng& rng) {
    require(reduction >= 1 && c % reduction == 0,
            "SqueezeExcite: channels " + std::to_string(c) +
                " not divisible by reduction " + std::to_string(reduction));
    const int cr = c / reduction;
    w1 = ps.add_he_uniform(name + "/w1", {cr, c, 1, 1}, c, rng);
    w2 = ps.add_he_uniform(name + "/w2", {c, cr, 1, 1}, cr, rng);
}

Var SqueezeExcite::forward(Tape* tape, const Var& x) const {
    return se_block(tape, x, w1->var(), w2->var());
}

ConvBlock::ConvBlock(ParamSet& ps, const std::string& name, int c_in, int c_out,
                     int repeats, bool with_se, int se_reduction, Rng& rng) {
    require(repeats >= 1, "ConvBlock: repeats must be >= 1");
    int c = c_in;
    for (int r = 0; r < repeats; ++r) {
        const std::string stem = name + "/conv" + std::to_string(r + 1);
        convs.emplace_back(ps, stem, c, c_out, 3, 1, 1, true, rng);
        bns.emplace_back(ps, name + "/bn" + std::to_string(r + 1), c_out);
        c = c_out;
    }
    if (with_se) se.emplace(ps, name + "/se", c_out, se_reduction, rng);
}

Var ConvBlock::forward(Tape* tape, const Var& x, bool training) const {
    Var h = x;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        h = convs[i].forward(tape, h);
        h = elu(tape, h);
        h = bns[i].forward(tape, h, training);
    }
    if (se) h = se->forward(tape, h);
    return h;
}

}  // namespace lfb
