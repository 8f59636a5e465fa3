#include <algorithm>
#include <vector>

#include "core/autodiff.hpp"
#include "core/blas.hpp"

namespace lfb {
namespace {

// im2col panel width: keep the column buffer around 2M doubles (~16 MB) so a
// panel stays cache/TLB friendly while the GEMM n-dimension remains large
// enough to reach peak throughput.
int panel_columns(int k_rows, std::size_t out_pixels) {
    std::size_t p = 2'000'000 / std::size_t(std::max(k_rows, 1));
    p = std::clamp<std::size_t>(p, 64, 65536);
    return int(std::min(p, out_pixels));
}

std::vector<double>& scratch(int which) {
    static thread_local std::vector<double> bufs[2];
    return bufs[which];
}

struct ConvDims {
    int c_in, c_out, kh, kw, oh, ow, stride, pad;
    std::size_t k_rows() const { return std::size_t(c_in) * kh * kw; }
    std::size_t out_pixels() const { return std::size_t(oh) * ow; }
};

// Gather the [p0, p1) slice of output pixels into col (k_rows x (p1-p0)),
// zero-filling out-of-bounds taps.
void im2col_panel(const double* x, int h, int w, const ConvDims& d, std::size_t p0,
                  std::size_t p1, double* col) {
    const std::size_t pn = p1 - p0;
    for (int ic = 0; ic < d.c_in; ++ic) {
        const double* xc = x + std::size_t(ic) * h * w;
        for (int ky = 0; ky < d.kh; ++ky)
            for (int kx = 0; kx < d.kw; ++kx) {
                double* row = col + ((std::size_t(ic) * d.kh + ky) * d.kw + kx) * pn;
                for (std::size_t p = p0; p < p1; ++p) {
                    const int oy = int(p / d.ow), ox = int(p % d.ow);
                    const int iy = oy * d.stride - d.pad + ky;
                    const int ix = ox * d.stride - d.pad + kx;
                    row[p - p0] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                      ? xc[std::size_t(iy) * w + ix]
                                      : 0.0;
                }
            }
    }
}

// Scatter-add the panel's column gradient back onto the input image.
void col2im_panel(const double* col, int h, int w, const ConvDims& d, std::size_t p0,
                  std::size_t p1, double* dx) {
    const std::size_t pn = p1 - p0;
    for (int ic = 0; ic < d.c_in; ++ic) {
        double* dxc = dx + std::size_t(ic) * h * w;
        for (int ky = 0; ky < d.kh; ++ky)
            for (int kx = 0; kx < d.kw; ++kx) {
                const double* row = col + ((std::size_t(ic) * d.kh + ky) * d.kw + kx) * pn;
                for (std::size_t p = p0; p < p1; ++p) {
                    const int oy = int(p / d.ow), ox = int(p % d.ow);
                    const int iy = oy * d.stride - d.pad + ky;
                    const int ix = ox * d.stride - d.pad + kx;
                    if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                        dxc[std::size_t(iy) * w + ix] += row[p - p0];
                }
            }
    }
}

bool is_pointwise(const ConvDims& d) {
    return d.kh == 1 && d.kw == 1 && d.stride == 1 && d.pad == 0;
}

void conv_forward(const Tensor4& x, const Tensor4& w, const double* bias, Tensor4& y,
                  const ConvDims& d) {
    const Shape4 s = x.shape;
    const std::size_t in_plane = std::size_t(s.h) * s.w;
    const std::size_t out_plane = d.out_pixels();
    const int K = int(d.k_rows());
    for (int in = 0; in < s.n; ++in) {
        const double* xs = x.data() + std::size_t(in) * s.c * in_plane;
        double* ys = y.data() + std::size_t(in) * d.c_out * out_plane;
        if (is_pointwise(d)) {
            // col == x; a single GEMM covers the sample.
            blas::dgemm(false, false, d.c_out, int(out_plane), K, 1.0, w.data(), K,
                        xs, int(out_plane), 0.0, ys, int(out_plane));
        } else {
            const int pcap = panel_columns(K, out_plane);
            auto& col = scratch(0);
            col.resize(std::size_t(K) * pcap);
            for (std::size_t p0 = 0; p0 < out_plane; p0 += pcap) {
                const std::size_t p1 = std::min(out_plane, p0 + pcap);
                im2col_panel(xs, s.h, s.w, d, p0, p1, col.data());
                blas::dgemm(false, false, d.c_out, int(p1 - p0), K, 1.0, w.data(), K,
                            col.data(), int(p1 - p0), 0.0, ys + p0, int(out_plane));
            }
        }
        if (bias)
            for (int co = 0; co < d.c_out; ++co) {
                double b = bias[co];
                double* row = ys + std::size_t(co) * out_plane;
                for (std::size_t p = 0; p < out_plane; ++p) row[p] += b;
            }
    }
}

}  // namespace

Var conv2d(Tape* tape, const Var& x, const Var& weight, const Var& bias, int stride,
           int padding) {
    const Shape4 s = x.shape(), sw = weight.shape();
    require(stride >= 1 && padding >= 0, "conv2d: invalid stride/padding");
    require(sw.c == s.c, "conv2d: weight expects " + std::to_string(sw.c) +
                             " input channels, input has " + std::to_string(s.c));
    ConvDims d{s.c, sw.n, sw.h, sw.w,
               (s.h + 2 * padding - sw.h) / stride + 1,
               (s.w + 2 * padding - sw.w) / stride + 1,
               stride, padding};
    require(s.h + 2 * padding >= sw.h && s.w + 2 * padding >= sw.w && d.oh >= 1 && d.ow >= 1,
            "conv2d: kernel " + sw.str() + " does not fit input " + s.str());
    if (bias.defined())
        require(bias.shape() == Shape4{1, sw.n, 1, 1},
                "conv2d: bias must be (1,c_out,1,1), got " + bias.shape().str());

    Tensor4 y({s.n, d.c_out, d.oh, d.ow});
    conv_forward(x.value(), weight.value(), bias.defined() ? bias.value().data() : nullptr,
                 y, d);

    bool rec = tape && (x.needs_grad() || weight.needs_grad() || bias.needs_grad());
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef xn = x.node(), wn = weight.node(), on = out;
        NodeRef bn = bias.defined() ? bias.node() : nullptr;
        tape->record([xn, wn, bn, on, d] {
            if (!on->grad_live) return;
            const Shape4 s = xn->value.shape;
            const std::size_t in_plane = std::size_t(s.h) * s.w;
            const std::size_t out_plane = d.out_pixels();
            const int K = int(d.k_rows());
            const bool need_dx = xn->needs_grad, need_dw = wn->needs_grad;
            if (need_dx) xn->ensure_grad();
            if (need_dw) wn->ensure_grad();
            for (int in = 0; in < s.n; ++in) {
                const double* xs = xn->value.data() + std::size_t(in) * s.c * in_plane;
                const double* dys = on->grad.data() + std::size_t(in) * d.c_out * out_plane;
                if (is_pointwise(d)) {
                    if (need_dw)
                        blas::dgemm(false, true, d.c_out, K, int(out_plane), 1.0, dys,
                                    int(out_plane), xs, int(out_plane), 1.0,
                                    wn->grad.data(), K);
                    if (need_dx)
                        blas::dgemm(true, false, K, int(out_plane), d.c_out, 1.0,
                                    wn->value.data(), K, dys, int(out_plane), 1.0,
                                    xn->grad.data() + std::size_t(in) * s.c * in_plane,
                                    int(out_plane));
                } else {
                    const int pcap = panel_columns(K, out_plane);
                    auto& col = scratch(0);
                    auto& dcol = scratch(1);
                    col.resize(std::size_t(K) * pcap);
                    if (need_dx) dcol.resize(std::size_t(K) * pcap);
                    double* dxs = need_dx
                                      ? xn->grad.data() + std::size_t(in) * s.c * in_plane
                                      : nullptr;
                    for (std::size_t p0 = 0; p0 < out_plane; p0 += pcap) {
                        const std::size_t p1 = std::min(out_plane, p0 + pcap);
                        const int pn = int(p1 - p0);
                        if (need_dw) {
                            // columns are recomputed instead of saved: trades
                            // ~10% backward time for O(batch) memory
                            im2col_panel(xs, s.h, s.w, d, p0, p1, col.data());
                            blas::dgemm(false, true, d.c_out, K, pn, 1.0, dys + p0,
                                        int(out_plane), col.data(), pn, 1.0,
                                        wn->grad.data(), K);
                        }
                        if (need_dx) {
                            blas::dgemm(true, false, K, pn, d.c_out, 1.0,
                                        wn->value.data(), K, dys + p0, int(out_plane),
                                        0.0, dcol.data(), pn);
                            col2im_panel(dcol.data(), s.h, s.w, d, p0, p1, dxs);
                        }
                    }
                }
            }
            if (bn && bn->needs_grad) {
                bn->ensure_grad();
                for (int in = 0; in < s.n; ++in)
                    for (int co = 0; co < d.c_out; ++co) {
                        const double* row = on->grad.data() +
                                            (std::size_t(in) * d.c_out + co) * out_plane;
                        double acc = 0.0;
                        for (std::size_t p = 0; p < out_plane; ++p) acc += row[p];
                        bn->grad.v[co] += acc;
                    }
            }
        });
    }
    return Var(out);
}

Var transposed_conv2d(Tape* tape, const Var& x, const Var& weight, const Var& bias,
                      int stride) {
    const Shape4 s = x.shape(), sw = weight.shape();
    require(stride >= 1, "transposed_conv2d: invalid stride");
    require(sw.n == s.c, "transposed_conv2d: weight expects " + std::to_string(sw.n) +
                             " input channels, input has " + std::to_string(s.c));
    const int c_out = sw.c, kh = sw.h, kw = sw.w;
    const int oh = (s.h - 1) * stride + kh, ow = (s.w - 1) * stride + kw;
    if (bias.defined())
        require(bias.shape() == Shape4{1, c_out, 1, 1},
                "transposed_conv2d: bias must be (1,c_out,1,1), got " + bias.shape().str());

    const int Kt = c_out * kh * kw;  // weight as matrix (c_in, Kt)
    const std::size_t in_plane = std::size_t(s.h) * s.w;
    const std::size_t out_plane = std::size_t(oh) * ow;

    Tensor4 y({s.n, c_out, oh, ow});
    {
        auto& cols = scratch(0);
        const int pcap = panel_columns(Kt, in_plane);
        cols.resize(std::size_t(Kt) * pcap);
        for (int in = 0; in < s.n; ++in) {
            const double* xs = x.value().data() + std::size_t(in) * s.c * in_plane;
            double* ys = y.data() + std::size_t(in) * c_out * out_plane;
            if (bias.defined())
                for (int co = 0; co < c_out; ++co) {
                    double b = bias.value().v[co];
                    double* row = ys + std::size_t(co) * out_plane;
                    for (std::size_t p = 0; p < out_plane; ++p) row[p] = b;
                }
            for (std::size_t p0 = 0; p0 < in_plane; p0 += pcap) {
                const std::size_t p1 = std::min(in_plane, p0 + pcap);
                const int pn = int(p1 - p0);
                // cols(Kt, pn) = W^T (Kt, c_in) * X(c_in, pn)
                blas::dgemm(true, false, Kt, pn, s.c, 1.0, weight.value().data(), Kt,
                            xs + p0, int(in_plane), 0.0, cols.data(), pn);
                // scatter each input pixel's taps onto the (strided) output
                for (int co = 0; co < c_out; ++co)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const double* row =
                                cols.data() + ((std::size_t(co) * kh + ky) * kw + kx) * pn;
                            double* yc = ys + std::size_t(co) * out_plane;
                            for (std::size_t p = p0; p < p1; ++p) {
                                const int iy = int(p / s.w), ix = int(p % s.w);
                                yc[std::size_t(iy * stride + ky) * ow + (ix * stride + kx)] +=
                                    row[p - p0];
                            }
                        }
            }
        }
    }

    bool rec = tape && (x.needs_grad() || weight.needs_grad() || bias.needs_grad());
    NodeRef out = make_result(std::move(y), rec);
    if (rec) {
        NodeRef xn = x.node(), wn = weight.node(), on = out;
        NodeRef bn = bias.defined() ? bias.node() : nullptr;
        const int str = stride;
        tape->record([xn, wn, bn, on, str] {
            if (!on->grad_live) return;
            const Shape4 s = xn->value.shape, sw = wn->value.shape, so = on->value.shape;
            const int c_out = sw.c, kh = sw.h, kw = sw.w, Kt = c_out * kh * kw;
            const std::size_t in_plane = std::size_t(s.h) * s.w;
            const std::size_t out_plane = std::size_t(so.h) * so.w;
            const bool need_dx = xn->needs_grad, need_dw = wn->needs_grad;
            if (need_dx) xn->ensure_grad();
            if (need_dw) wn->ensure_grad();
            auto& dcols = scratch(1);
            const int pcap = panel_columns(Kt, in_plane);
            dcols.resize(std::size_t(Kt) * pcap);
            for (int in = 0; in < s.n; ++in) {
                const double* xs = xn->value.data() + std::size_t(in) * s.c * in_plane;
                const double* dys = on->grad.data() + std::size_t(in) * c_out * out_plane;
                for (std::size_t p0 = 0; p0 < in_plane; p0 += pcap) {
                    const std::size_t p1 = std::min(in_plane, p0 + pcap);
                    const int pn = int(p1 - p0);
                    // gather dOut taps into (Kt, pn); every tap is in bounds
                    for (int co = 0; co < c_out; ++co)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                double* row = dcols.data() +
                                              ((std::size_t(co) * kh + ky) * kw + kx) * pn;
                                const double* dyc = dys + std::size_t(co) * out_plane;
                                for (std::size_t p = p0; p < p1; ++p) {
                                    const int iy = int(p / s.w), ix = int(p % s.w);
                                    row[p - p0] = dyc[std::size_t(iy * str + ky) * so.w +
                                                      (ix * str + kx)];
                                }
                            }
                    if (need_dx)
                        blas::dgemm(false, false, s.c, pn, Kt, 1.0, wn->value.data(), Kt,
                                    dcols.data(), pn, 1.0,
                                    xn->grad.data() + std::size_t(in) * s.c * in_plane + p0,
                                    int(in_plane));
                    if (need_dw)
                        blas::dgemm(false, true, s.c, Kt, pn, 1.0, xs + p0, int(in_plane),
                                    dcols.data(), pn, 1.0, wn->grad.data(), Kt);
                }
            }
            if (bn && bn->needs_grad) {
                bn->ensure_grad();
                const Shape4 so2 = on->value.shape;
                for (int in = 0; in < so2.n; ++in)
                    for (int co = 0; co < c_out; ++co) {
                        const double* row =
                            on->grad.data() + (std::size_t(in) * c_out + co) * out_plane;
                        double acc = 0.0;
                        for (std::size_t p = 0; p < out_plane; ++p) acc += row[p];
                        bn->grad.v[co] += acc;
                    }
            }
        });
    }
    return Var(out);
}

Var se_block(Tape* tape, const Var& x, const Var& w1, const Var& w2) {
    const Shape4 s = x.shape(), s1 = w1.shape(), s2 = w2.shape();
    require(s1.c == s.c && s1.h == 1 && s1.w == 1,
            "se_block: w1 must be (c_r,c,1,1) for input " + s.str() + ", got " + s1.str());
    require(s2.n == s.c && s2.c == s1.n && s2.h == 1 && s2.w == 1,
            "se_block: w2 must be (c,c_r,1,1), got " + s2.str());
    Var none;
    Var pooled = global_avg_pool(tape, x);
    Var z = elu(tape, conv2d(tape, pooled, w1, none));
    Var gate = sigmoid(tape, conv2d(tape, z, w2, none));
    return scale_channels(tape, x, gate);
}

}  // namespace lfb
