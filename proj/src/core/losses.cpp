#include "core/losses.hpp"

#include <cmath>

namespace lfb {
namespace {

constexpr double kClampLo = 1e-12;
constexpr double kClampHi = 1.0 - 1e-12;

double clamp01(double p) { return p < kClampLo ? kClampLo : (p > kClampHi ? kClampHi : p); }

void validate_target(const Tensor4& probs, const Tensor4& target) {
    require(probs.shape == target.shape, "loss: probs shape " + probs.shape.str() +
                                             " != target shape " + target.shape.str());
    const Shape4 s = target.shape;
    for (double v : target.v)
        require(v == 0.0 || v == 1.0, "loss: target values must be exactly 0 or 1");
    if (s.c >= 2) {
        const std::size_t plane = std::size_t(s.h) * s.w;
        for (int in = 0; in < s.n; ++in)
            for (std::size_t p = 0; p < plane; ++p) {
                double sum = 0.0;
                for (int ic = 0; ic < s.c; ++ic)
                    sum += target.v[(std::size_t(in) * s.c + ic) * plane + p];
                require(sum == 1.0, "loss: target is not one-hot across channels");
            }
    }
}

}  // namespace

Var cross_entropy_loss(Tape* tape, const Var& probs, const Var& target) {
    validate_target(probs.value(), target.value());
    const Shape4 s = probs.shape();
    const std::size_t plane = std::size_t(s.h) * s.w;
    const double inv_n = 1.0 / (double(s.n) * double(plane));
    const bool binary = s.c == 1;

    double loss = 0.0;
    const Tensor4& p = probs.value();
    const Tensor4& t = target.value();
    const std::size_t total = p.size();
    for (std::size_t i = 0; i < total; ++i) {
        if (binary) {
            loss -= t.v[i] * std::log(clamp01(p.v[i])) +
                    (1.0 - t.v[i]) * std::log(clamp01(1.0 - p.v[i]));
        } else if (t.v[i] == 1.0) {
            loss -= std::log(clamp01(p.v[i]));
        }
    }
    loss *= inv_n;

    bool rec = tape && probs.needs_grad();
    NodeRef out = make_result(Tensor4::scalar(loss), rec);
    if (rec) {
        NodeRef pn = probs.node(), tn = target.node(), on = out;
        tape->record([pn, tn, on, inv_n, binary] {
            if (!on->grad_live) return;
            pn->ensure_grad();
            const double g = on->grad.v[0] * inv_n;
            const std::size_t total = pn->value.size();
            for (std::size_t i = 0; i < total; ++i) {
                const double pv = pn->value.v[i], tv = tn->value.v[i];
                double d = 0.0;
                // clamp has zero slope outside its band
                if (tv != 0.0 && pv >= kClampLo && pv <= kClampHi) d -= tv / pv;
                if (binary && tv != 1.0 && (1.0 - pv) >= kClampLo && (1.0 - pv) <= kClampHi)
                    d += (1.0 - tv) / (1.0 - pv);
                pn->grad.v[i] += g * d;
            }
        });
    }
    return Var(out);
}

Var dice_loss(Tape* tape, const Var& probs, const Var& target,
              const std::vector<double>& class_weights, double eps) {
    validate_target(probs.value(), target.value());
    const Shape4 s = probs.shape();
    std::vector<double> w = class_weights.empty() ? std::vector<double>(s.c, 1.0)
                                                  : class_weights;
    require(int(w.size()) == s.c, "dice_loss: expected " + std::to_string(s.c) +
                                      " class weights, got " + std::to_string(w.size()));
    double wsum = 0.0;
    for (double x : w) {
        require(x >= 0.0, "dice_loss: class weights must be non-negative");
        wsum += x;
    }
    require(wsum > 0.0, "dice_loss: class weights sum to zero");

    const std::size_t plane = std::size_t(s.h) * s.w;
    const Tensor4& p = probs.value();
    const Tensor4& t = target.value();
    // Per-class intersection and magnitude sums across batch and pixels.
    std::vector<double> inter(s.c, 0.0), sums(s.c, 0.0);
    for (int in = 0; in < s.n; ++in)
        for (int ic = 0; ic < s.c; ++ic) {
            const std::size_t base = (std::size_t(in) * s.c + ic) * plane;
            double a = 0.0, b = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                a += p.v[base + i] * t.v[base + i];
                b += p.v[base + i] + t.v[base + i];
            }
            inter[ic] += a;
            sums[ic] += b;
        }
    double overlap = 0.0;
    for (int ic = 0; ic < s.c; ++ic)
        overlap += w[ic] * (2.0 * inter[ic] + eps) / (sums[ic] + eps);
    const double loss = 1.0 - overlap / wsum;

    bool rec = tape && probs.needs_grad();
    NodeRef out = make_result(Tensor4::scalar(loss), rec);
    if (rec) {
        NodeRef pn = probs.node(), tn = target.node(), on = out;
        auto inter_c = std::make_shared<std::vector<double>>(std::move(inter));
        auto sums_c = std::make_shared<std::vector<double>>(std::move(sums));
        auto w_c = std::make_shared<std::vector<double>>(std::move(w));
        tape->record([pn, tn, on, inter_c, sums_c, w_c, wsum, eps] {
            if (!on->grad_live) return;
            pn->ensure_grad();
            const Shape4 s = pn->value.shape;
            const std::size_t plane = std::size_t(s.h) * s.w;
            const double g = on->grad.v[0];
            for (int ic = 0; ic < s.c; ++ic) {
                const double denom = (*sums_c)[ic] + eps;
                const double num = 2.0 * (*inter_c)[ic] + eps;
                const double scale = -g * (*w_c)[ic] / wsum;
                // d term / du_i = (2*v_i*denom - num) / denom^2
                const double inv_d = 1.0 / denom, inv_d2 = inv_d * inv_d;
                for (int in = 0; in < s.n; ++in) {
                    const std::size_t base = (std::size_t(in) * s.c + ic) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        double tv = tn->value.v[base + i];
                        pn->grad.v[base + i] +=
                            scale * (2.0 * tv * inv_d - num * inv_d2);
                    }
                }
            }
        });
    }
    return Var(out);
}

Var total_loss(Tape* tape, const Var& l1, const Var& l2) {
    require(l1.value().size() == 1 && l2.value().size() == 1,
            "total_loss: inputs must be scalar losses");
    return average2(tape, l1, l2);
}

}  // namespace lfb
