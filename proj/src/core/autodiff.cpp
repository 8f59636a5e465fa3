#include "core/autodiff.hpp"

#include <cmath>

namespace lfb {

void Tape::backward(const Var& scalar_out) {
    require(scalar_out.defined() && scalar_out.value().size() == 1,
            "backward: output must be a single-element tensor");
    require(scalar_out.needs_grad(), "backward: output does not require grad");
    Node* out = scalar_out.node().get();
    out->ensure_grad();
    out->grad.v[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    steps_.clear();
}

NodeRef make_result(Tensor4 value, bool needs_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->needs_grad = needs_grad;
    return n;
}

namespace {

// true when this op must record a backward step
bool taping(const Tape* tape, std::initializer_list<const Var*> ins) {
    if (!tape) return false;
    for (const Var* v : ins)
        if (v && v->needs_grad()) return true;
    return false;
}

}  // namespace

// --------------------------------------------------------------------------
// elementwise
// --------------------------------------------------------------------------

Var elu(Tape* tape, const Var& x, double alpha) {
    const Tensor4& xv = x.value();
    Tensor4 y(xv.shape);
    const std::size_t n = xv.size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = xv.v[i];
        y.v[i] = v > 0.0 ? v : alpha * (std::exp(v) - 1.0);
    }
    bool rec = taping(tape, {&x});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef xn = x.node(), on = out;
        tape->record([xn, on, alpha] {
            if (!on->grad_live) return;
            xn->ensure_grad();
            const std::size_t n = xn->value.size();
            for (std::size_t i = 0; i < n; ++i) {
                double v = xn->value.v[i];
                // d/dx = 1 for x>0, else alpha*exp(x) = y + alpha
                double d = v > 0.0 ? 1.0 : on->value.v[i] + alpha;
                xn->grad.v[i] += on->grad.v[i] * d;
            }
        });
    }
    return Var(out);
}

Var sigmoid(Tape* tape, const Var& x) {
    const Tensor4& xv = x.value();
    Tensor4 y(xv.shape);
    const std::size_t n = xv.size();
    for (std::size_t i = 0; i < n; ++i) y.v[i] = 1.0 / (1.0 + std::exp(-xv.v[i]));
    bool rec = taping(tape, {&x});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef xn = x.node(), on = out;
        tape->record([xn, on] {
            if (!on->grad_live) return;
            xn->ensure_grad();
            const std::size_t n = xn->value.size();
            for (std::size_t i = 0; i < n; ++i) {
                double s = on->value.v[i];
                xn->grad.v[i] += on->grad.v[i] * s * (1.0 - s);
            }
        });
    }
    return Var(out);
}

Var softmax_channels(Tape* tape, const Var& x) {
    const Tensor4& xv = x.value();
    const Shape4 s = xv.shape;
    require(s.c >= 1, "softmax_channels: need at least one channel");
    Tensor4 y(s);
    const std::size_t plane = std::size_t(s.h) * s.w;
    for (int in = 0; in < s.n; ++in) {
        const double* xb = xv.data() + std::size_t(in) * s.c * plane;
        double* yb = y.data() + std::size_t(in) * s.c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            double mx = xb[p];
            for (int ic = 1; ic < s.c; ++ic) mx = std::max(mx, xb[ic * plane + p]);
            double sum = 0.0;
            for (int ic = 0; ic < s.c; ++ic) {
                double e = std::exp(xb[ic * plane + p] - mx);
                yb[ic * plane + p] = e;
                sum += e;
            }
            double inv = 1.0 / sum;
            for (int ic = 0; ic < s.c; ++ic) yb[ic * plane + p] *= inv;
        }
    }
    bool rec = taping(tape, {&x});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef xn = x.node(), on = out;
        tape->record([xn, on] {
            if (!on->grad_live) return;
            xn->ensure_grad();
            const Shape4 s = xn->value.shape;
            const std::size_t plane = std::size_t(s.h) * s.w;
            for (int in = 0; in < s.n; ++in) {
                const std::size_t base = std::size_t(in) * s.c * plane;
                const double* p = on->value.data() + base;
                const double* dy = on->grad.data() + base;
                double* dx = xn->grad.data() + base;
                for (std::size_t q = 0; q < plane; ++q) {
                    double dot = 0.0;
                    for (int ic = 0; ic < s.c; ++ic) dot += dy[ic * plane + q] * p[ic * plane + q];
                    for (int ic = 0; ic < s.c; ++ic)
                        dx[ic * plane + q] += p[ic * plane + q] * (dy[ic * plane + q] - dot);
                }
            }
        });
    }
    return Var(out);
}

// --------------------------------------------------------------------------
// binary / shape ops
// --------------------------------------------------------------------------

Var add(Tape* tape, const Var& a, const Var& b) {
    require(a.shape() == b.shape(),
            "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor4 y(a.shape());
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) y.v[i] = a.value().v[i] + b.value().v[i];
    bool rec = taping(tape, {&a, &b});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef an = a.node(), bn = b.node(), on = out;
        tape->record([an, bn, on] {
            if (!on->grad_live) return;
            const std::size_t n = on->grad.size();
            if (an->needs_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) an->grad.v[i] += on->grad.v[i];
            }
            if (bn->needs_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) bn->grad.v[i] += on->grad.v[i];
            }
        });
    }
    return Var(out);
}

Var mul(Tape* tape, const Var& a, const Var& b) {
    require(a.shape() == b.shape(),
            "mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor4 y(a.shape());
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) y.v[i] = a.value().v[i] * b.value().v[i];
    bool rec = taping(tape, {&a, &b});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef an = a.node(), bn = b.node(), on = out;
        tape->record([an, bn, on] {
            if (!on->grad_live) return;
            const std::size_t n = on->grad.size();
            if (an->needs_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) an->grad.v[i] += on->grad.v[i] * bn->value.v[i];
            }
            if (bn->needs_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) bn->grad.v[i] += on->grad.v[i] * an->value.v[i];
            }
        });
    }
    return Var(out);
}

Var concat_channels(Tape* tape, const Var& a, const Var& b) {
    const Shape4 sa = a.shape(), sb = b.shape();
    require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w,
            "concat_channels: non-channel dims differ: " + sa.str() + " vs " + sb.str());
    Shape4 so{sa.n, sa.c + sb.c, sa.h, sa.w};
    Tensor4 y(so);
    const std::size_t plane = std::size_t(sa.h) * sa.w;
    for (int in = 0; in < sa.n; ++in) {
        double* dst = y.data() + std::size_t(in) * so.c * plane;
        const double* pa = a.value().data() + std::size_t(in) * sa.c * plane;
        const double* pb = b.value().data() + std::size_t(in) * sb.c * plane;
        std::copy(pa, pa + std::size_t(sa.c) * plane, dst);
        std::copy(pb, pb + std::size_t(sb.c) * plane, dst + std::size_t(sa.c) * plane);
    }
    bool rec = taping(tape, {&a, &b});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef an = a.node(), bn = b.node(), on = out;
        tape->record([an, bn, on] {
            if (!on->grad_live) return;
            const Shape4 sa = an->value.shape, sb = bn->value.shape, so = on->value.shape;
            const std::size_t plane = std::size_t(sa.h) * sa.w;
            for (int in = 0; in < sa.n; ++in) {
                const double* g = on->grad.data() + std::size_t(in) * so.c * plane;
                if (an->needs_grad) {
                    an->ensure_grad();
                    double* ga = an->grad.data() + std::size_t(in) * sa.c * plane;
                    for (std::size_t i = 0; i < std::size_t(sa.c) * plane; ++i) ga[i] += g[i];
                }
                if (bn->needs_grad) {
                    bn->ensure_grad();
                    double* gb = bn->grad.data() + std::size_t(in) * sb.c * plane;
                    const double* gsrc = g + std::size_t(sa.c) * plane;
                    for (std::size_t i = 0; i < std::size_t(sb.c) * plane; ++i) gb[i] += gsrc[i];
                }
            }
        });
    }
    return Var(out);
}

Var average2(Tape* tape, const Var& a, const Var& b) {
    require(a.shape() == b.shape(),
            "average2: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor4 y(a.shape());
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) y.v[i] = 0.5 * (a.value().v[i] + b.value().v[i]);
    bool rec = taping(tape, {&a, &b});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef an = a.node(), bn = b.node(), on = out;
        tape->record([an, bn, on] {
            if (!on->grad_live) return;
            const std::size_t n = on->grad.size();
            if (an->needs_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) an->grad.v[i] += 0.5 * on->grad.v[i];
            }
            if (bn->needs_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) bn->grad.v[i] += 0.5 * on->grad.v[i];
            }
        });
    }
    return Var(out);
}

Var mul_scalar(Tape* tape, const Var& x, double s) {
    Tensor4 y(x.shape());
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) y.v[i] = x.value().v[i] * s;
    bool rec = taping(tape, {&x});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef xn = x.node(), on = out;
        tape->record([xn, on, s] {
            if (!on->grad_live) return;
            xn->ensure_grad();
            const std::size_t n = on->grad.size();
            for (std::size_t i = 0; i < n; ++i) xn->grad.v[i] += on->grad.v[i] * s;
        });
    }
    return Var(out);
}

Var sum_all(Tape* tape, const Var& x) {
    double acc = 0.0;
    for (double v : x.value().v) acc += v;
    bool rec = taping(tape, {&x});
    NodeRef out = make_result(Tensor4::scalar(acc), rec);
    if (rec) {
        NodeRef xn = x.node(), on = out;
        tape->record([xn, on] {
            if (!on->grad_live) return;
            xn->ensure_grad();
            double g = on->grad.v[0];
            for (double& d : xn->grad.v) d += g;
        });
    }
    return Var(out);
}

// --------------------------------------------------------------------------
// pooling / channel gating
// --------------------------------------------------------------------------

Var global_avg_pool(Tape* tape, const Var& x) {
    const Shape4 s = x.shape();
    Tensor4 y({s.n, s.c, 1, 1});
    const std::size_t plane = std::size_t(s.h) * s.w;
    const double inv = 1.0 / double(plane);
    for (int in = 0; in < s.n; ++in)
        for (int ic = 0; ic < s.c; ++ic) {
            const double* p = x.value().data() + (std::size_t(in) * s.c + ic) * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += p[i];
            y.at(in, ic, 0, 0) = acc * inv;
        }
    bool rec = taping(tape, {&x});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef xn = x.node(), on = out;
        tape->record([xn, on] {
            if (!on->grad_live) return;
            xn->ensure_grad();
            const Shape4 s = xn->value.shape;
            const std::size_t plane = std::size_t(s.h) * s.w;
            const double inv = 1.0 / double(plane);
            for (int in = 0; in < s.n; ++in)
                for (int ic = 0; ic < s.c; ++ic) {
                    double g = on->grad.at(in, ic, 0, 0) * inv;
                    double* d = xn->grad.data() + (std::size_t(in) * s.c + ic) * plane;
                    for (std::size_t i = 0; i < plane; ++i) d[i] += g;
                }
        });
    }
    return Var(out);
}

Var scale_channels(Tape* tape, const Var& x, const Var& g) {
    const Shape4 s = x.shape(), sg = g.shape();
    require(sg.n == s.n && sg.c == s.c && sg.h == 1 && sg.w == 1,
            "scale_channels: gate must be (n,c,1,1), got " + sg.str() + " for input " + s.str());
    Tensor4 y(s);
    const std::size_t plane = std::size_t(s.h) * s.w;
    for (int in = 0; in < s.n; ++in)
        for (int ic = 0; ic < s.c; ++ic) {
            double gv = g.value().at(in, ic, 0, 0);
            const double* p = x.value().data() + (std::size_t(in) * s.c + ic) * plane;
            double* q = y.data() + (std::size_t(in) * s.c + ic) * plane;
            for (std::size_t i = 0; i < plane; ++i) q[i] = p[i] * gv;
        }
    bool rec = taping(tape, {&x, &g});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef xn = x.node(), gn = g.node(), on = out;
        tape->record([xn, gn, on] {
            if (!on->grad_live) return;
            const Shape4 s = xn->value.shape;
            const std::size_t plane = std::size_t(s.h) * s.w;
            for (int in = 0; in < s.n; ++in)
                for (int ic = 0; ic < s.c; ++ic) {
                    const std::size_t base = (std::size_t(in) * s.c + ic) * plane;
                    const double* gy = on->grad.data() + base;
                    if (xn->needs_grad) {
                        xn->ensure_grad();
                        double gv = gn->value.at(in, ic, 0, 0);
                        double* dx = xn->grad.data() + base;
                        for (std::size_t i = 0; i < plane; ++i) dx[i] += gy[i] * gv;
                    }
                    if (gn->needs_grad) {
                        gn->ensure_grad();
                        const double* px = xn->value.data() + base;
                        double acc = 0.0;
                        for (std::size_t i = 0; i < plane; ++i) acc += gy[i] * px[i];
                        gn->grad.at(in, ic, 0, 0) += acc;
                    }
                }
        });
    }
    return Var(out);
}

Var maxpool2d(Tape* tape, const Var& x) {
    const Shape4 s = x.shape();
    require(s.h % 2 == 0 && s.w % 2 == 0,
            "maxpool2d: spatial dims must be even, got " + s.str());
    Shape4 so{s.n, s.c, s.h / 2, s.w / 2};
    Tensor4 y(so);
    // Window-local argmax (0..3, row-major; first max wins) for grad routing.
    auto arg = std::make_shared<std::vector<std::uint8_t>>(so.count());
    const Tensor4& xv = x.value();
    std::size_t o = 0;
    for (int in = 0; in < s.n; ++in)
        for (int ic = 0; ic < s.c; ++ic)
            for (int oy = 0; oy < so.h; ++oy)
                for (int ox = 0; ox < so.w; ++ox, ++o) {
                    const int iy = oy * 2, ix = ox * 2;
                    double best = xv.at(in, ic, iy, ix);
                    int besti = 0;
                    static constexpr int dy[4] = {0, 0, 1, 1}, dx[4] = {0, 1, 0, 1};
                    for (int k = 1; k < 4; ++k) {
                        double v = xv.at(in, ic, iy + dy[k], ix + dx[k]);
                        if (v > best) {
                            best = v;
                            besti = k;
                        }
                    }
                    y.v[o] = best;
                    (*arg)[o] = std::uint8_t(besti);
                }
    bool rec = taping(tape, {&x});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef xn = x.node(), on = out;
        tape->record([xn, on, arg] {
            if (!on->grad_live) return;
            xn->ensure_grad();
            const Shape4 so = on->value.shape;
            static constexpr int dy[4] = {0, 0, 1, 1}, dx[4] = {0, 1, 0, 1};
            std::size_t o = 0;
            for (int in = 0; in < so.n; ++in)
                for (int ic = 0; ic < so.c; ++ic)
                    for (int oy = 0; oy < so.h; ++oy)
                        for (int ox = 0; ox < so.w; ++ox, ++o) {
                            int k = (*arg)[o];
                            xn->grad.at(in, ic, oy * 2 + dy[k], ox * 2 + dx[k]) += on->grad.v[o];
                        }
        });
    }
    return Var(out);
}

// --------------------------------------------------------------------------
// batch normalization
// --------------------------------------------------------------------------

Var batchnorm2d(Tape* tape, const Var& x, const Var& gamma, const Var& beta,
                BatchNormState& state, bool training) {
    const Shape4 s = x.shape();
    const Shape4 sc{1, s.c, 1, 1};
    require(gamma.shape() == sc && beta.shape() == sc,
            "batchnorm2d: gamma/beta must be (1,c,1,1) for input " + s.str());
    require(state.running_mean.shape == sc && state.running_var.shape == sc,
            "batchnorm2d: running stats shape mismatch for input " + s.str());

    const std::size_t plane = std::size_t(s.h) * s.w;
    const std::size_t per_c = std::size_t(s.n) * plane;
    Tensor4 y(s);
    // Per-channel mean/var actually used for normalization (batch or running).
    std::vector<double> mean(s.c), inv_std(s.c);

    const Tensor4& xv = x.value();
    if (training) {
        require(per_c >= 1, "batchnorm2d: empty input");
        for (int ic = 0; ic < s.c; ++ic) {
            double m = 0.0;
            for (int in = 0; in < s.n; ++in) {
                const double* p = xv.data() + (std::size_t(in) * s.c + ic) * plane;
                for (std::size_t i = 0; i < plane; ++i) m += p[i];
            }
            m /= double(per_c);
            double var = 0.0;
            for (int in = 0; in < s.n; ++in) {
                const double* p = xv.data() + (std::size_t(in) * s.c + ic) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    double d = p[i] - m;
                    var += d * d;
                }
            }
            var /= double(per_c);
            mean[ic] = m;
            inv_std[ic] = 1.0 / std::sqrt(var + state.eps);
            const double mom = state.momentum;
            state.running_mean.v[ic] = mom * state.running_mean.v[ic] + (1.0 - mom) * m;
            state.running_var.v[ic] = mom * state.running_var.v[ic] + (1.0 - mom) * var;
        }
    } else {
        for (int ic = 0; ic < s.c; ++ic) {
            mean[ic] = state.running_mean.v[ic];
            inv_std[ic] = 1.0 / std::sqrt(state.running_var.v[ic] + state.eps);
        }
    }

    for (int in = 0; in < s.n; ++in)
        for (int ic = 0; ic < s.c; ++ic) {
            const double g = gamma.value().v[ic], b = beta.value().v[ic];
            const double m = mean[ic], is = inv_std[ic];
            const double* p = xv.data() + (std::size_t(in) * s.c + ic) * plane;
            double* q = y.data() + (std::size_t(in) * s.c + ic) * plane;
            for (std::size_t i = 0; i < plane; ++i) q[i] = g * (p[i] - m) * is + b;
        }

    bool rec = taping(tape, {&x, &gamma, &beta});
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out;
        auto mean_c = std::make_shared<std::vector<double>>(std::move(mean));
        auto istd_c = std::make_shared<std::vector<double>>(std::move(inv_std));
        tape->record([xn, gn, bn, on, mean_c, istd_c, training] {
            if (!on->grad_live) return;
            const Shape4 s = xn->value.shape;
            const std::size_t plane = std::size_t(s.h) * s.w;
            const std::size_t per_c = std::size_t(s.n) * plane;
            for (int ic = 0; ic < s.c; ++ic) {
                const double m = (*mean_c)[ic], is = (*istd_c)[ic];
                const double g = gn->value.v[ic];
                // accumulate the channel reductions first
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (int in = 0; in < s.n; ++in) {
                    const std::size_t base = (std::size_t(in) * s.c + ic) * plane;
                    const double* dy = on->grad.data() + base;
                    const double* px = xn->value.data() + base;
                    for (std::size_t i = 0; i < plane; ++i) {
                        sum_dy += dy[i];
                        sum_dy_xhat += dy[i] * (px[i] - m) * is;
                    }
                }
                if (gn->needs_grad) {
                    gn->ensure_grad();
                    gn->grad.v[ic] += sum_dy_xhat;
                }
                if (bn->needs_grad) {
                    bn->ensure_grad();
                    bn->grad.v[ic] += sum_dy;
                }
                if (xn->needs_grad) {
                    xn->ensure_grad();
                    if (training) {
                        // dx = (g*is/N) * (N*dy - sum_dy - xhat*sum_dy_xhat)
                        const double k = g * is / double(per_c);
                        for (int in = 0; in < s.n; ++in) {
                            const std::size_t base = (std::size_t(in) * s.c + ic) * plane;
                            const double* dy = on->grad.data() + base;
                            const double* px = xn->value.data() + base;
                            double* dx = xn->grad.data() + base;
                            for (std::size_t i = 0; i < plane; ++i) {
                                double xhat = (px[i] - m) * is;
                                dx[i] += k * (double(per_c) * dy[i] - sum_dy - xhat * sum_dy_xhat);
                            }
                        }
                    } else {
                        const double k = g * is;  // running stats are constants
                        for (int in = 0; in < s.n; ++in) {
                            const std::size_t base = (std::size_t(in) * s.c + ic) * plane;
                            const double* dy = on->grad.data() + base;
                            double* dx = xn->grad.data() + base;
                            for (std::size_t i = 0; i < plane; ++i) dx[i] += k * dy[i];
                        }
                    }
                }
            }
        });
    }
    return Var(out);
}

}  // namespace lfb
