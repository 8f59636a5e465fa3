#include "core/optimizer.hpp"

#include <cmath>

namespace lfb {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : cfg_(cfg) {
    require(cfg.lr > 0.0 && cfg.eps > 0.0, "Adam: lr and eps must be positive");
    require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0,
            "Adam: betas must lie in [0, 1)");
    slots_.reserve(params.size());
    for (Parameter* p : params)
        slots_.push_back({p, Tensor4(p->value().shape), Tensor4(p->value().shape)});
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (Slot& s : slots_) {
        if (s.p->frozen() || !s.p->grad_live()) continue;
        const std::size_t n = s.p->value().size();
        double* w = s.p->value().data();
        const double* g = s.p->grad().data();
        double* m = s.m.data();
        double* v = s.v.data();
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Slot& s : slots_) s.p->zero_grad();
}

}  // namespace lfb
