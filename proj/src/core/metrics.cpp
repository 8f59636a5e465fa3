#include "core/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "core/autodiff.hpp"  // require()

namespace lfb {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_compatible(const BinaryMask& a, const BinaryMask& b, const char* who) {
    require(a.d == b.d && a.h == b.h && a.w == b.w,
            std::string(who) + ": mask grids differ");
    require(a.sd == b.sd && a.sh == b.sh && a.sw == b.sw,
            std::string(who) + ": mask spacings differ");
    require(a.d >= 1 && a.h >= 1 && a.w >= 1, std::string(who) + ": empty grid");
}

// Mark boundary voxels: foreground with a face neighbor (4 in-plane, plus the
// two slice neighbors when d > 1) that is background or out of grid.
std::vector<std::uint8_t> boundary_of(const BinaryMask& m) {
    std::vector<std::uint8_t> b(m.v.size(), 0);
    for (int z = 0; z < m.d; ++z)
        for (int y = 0; y < m.h; ++y)
            for (int x = 0; x < m.w; ++x) {
                if (!m.at(z, y, x)) continue;
                bool edge = false;
                auto bg = [&](int zz, int yy, int xx) {
                    return zz < 0 || zz >= m.d || yy < 0 || yy >= m.h || xx < 0 ||
                           xx >= m.w || !m.at(zz, yy, xx);
                };
                edge = bg(z, y - 1, x) || bg(z, y + 1, x) || bg(z, y, x - 1) ||
                       bg(z, y, x + 1);
                if (!edge && m.d > 1) edge = bg(z - 1, y, x) || bg(z + 1, y, x);
                b[(std::size_t(z) * m.h + y) * m.w + x] = edge ? 1 : 0;
            }
    return b;
}

// 1D squared-distance transform over parabolas rooted at positions pos[i]
// with heights f[i] (lower envelope; exact). Infinite parabolas are skipped.
void dt1d(const double* f, const double* pos, int n, double* out, int* vtx, double* z) {
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        double s;
        while (true) {
            if (k < 0) break;
            const int p = vtx[k];
            s = ((f[q] + pos[q] * pos[q]) - (f[p] + pos[p] * pos[p])) /
                (2.0 * pos[q] - 2.0 * pos[p]);
            if (s <= z[k])
                --k;
            else
                break;
        }
        ++k;
        vtx[k] = q;
        z[k] = k == 0 ? -kInf : s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) out[q] = kInf;
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < pos[q]) ++j;
        const double dx = pos[q] - pos[vtx[j]];
        out[q] = dx * dx + f[vtx[j]];
    }
}

// Exact squared EDT of the seed set over the full grid (separable transform,
// one pass per axis, positions scaled by the physical spacing).
std::vector<double> squared_edt(const std::vector<std::uint8_t>& seed, int d, int h, int w,
                                double sd, double sh, double sw) {
    std::vector<double> g(seed.size());
    for (std::size_t i = 0; i < seed.size(); ++i) g[i] = seed[i] ? 0.0 : kInf;

    const int maxn = std::max(d, std::max(h, w));
    std::vector<double> f(maxn), out(maxn), pos(maxn), z(maxn + 1);
    std::vector<int> vtx(maxn);

    // along w
    for (int i = 0; i < maxn; ++i) pos[i] = i * sw;
    for (int zz = 0; zz < d; ++zz)
        for (int y = 0; y < h; ++y) {
            double* row = g.data() + (std::size_t(zz) * h + y) * w;
            dt1d(row, pos.data(), w, out.data(), vtx.data(), z.data());
            std::copy(out.begin(), out.begin() + w, row);
        }
    // along h
    for (int i = 0; i < maxn; ++i) pos[i] = i * sh;
    for (int zz = 0; zz < d; ++zz)
        for (int x = 0; x < w; ++x) {
            for (int y = 0; y < h; ++y) f[y] = g[(std::size_t(zz) * h + y) * w + x];
            dt1d(f.data(), pos.data(), h, out.data(), vtx.data(), z.data());
            for (int y = 0; y < h; ++y) g[(std::size_t(zz) * h + y) * w + x] = out[y];
        }
    // along d
    if (d > 1) {
        for (int i = 0; i < maxn; ++i) pos[i] = i * sd;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                for (int zz = 0; zz < d; ++zz) f[zz] = g[(std::size_t(zz) * h + y) * w + x];
                dt1d(f.data(), pos.data(), d, out.data(), vtx.data(), z.data());
                for (int zz = 0; zz < d; ++zz) g[(std::size_t(zz) * h + y) * w + x] = out[zz];
            }
    }
    return g;
}

double directed_max(const std::vector<std::uint8_t>& from_boundary,
                    const std::vector<double>& sq_edt_to) {
    double worst = 0.0;
    for (std::size_t i = 0; i < from_boundary.size(); ++i)
        if (from_boundary[i] && sq_edt_to[i] > worst) worst = sq_edt_to[i];
    return std::sqrt(worst);
}

}  // namespace

BinaryMask BinaryMask::from_labels(const LabelMap& labels, int cls, double sh, double sw) {
    BinaryMask m(1, labels.h, labels.w);
    m.sh = sh;
    m.sw = sw;
    for (std::size_t i = 0; i < labels.v.size(); ++i) m.v[i] = labels.v[i] == cls ? 1 : 0;
    return m;
}

std::size_t BinaryMask::volume() const {
    std::size_t n = 0;
    for (std::uint8_t x : v) n += x ? 1 : 0;
    return n;
}

double dice_coefficient(const BinaryMask& a, const BinaryMask& b) {
    check_compatible(a, b, "dice_coefficient");
    std::size_t inter = 0, total = 0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const bool fa = a.v[i] != 0, fb = b.v[i] != 0;
        inter += fa && fb;
        total += std::size_t(fa) + std::size_t(fb);
    }
    if (total == 0) return 1.0;
    return 2.0 * double(inter) / double(total);
}

double hausdorff_distance(const BinaryMask& a, const BinaryMask& b) {
    check_compatible(a, b, "hausdorff_distance");
    require(a.volume() > 0 && b.volume() > 0,
            "hausdorff_distance: undefined for empty masks");
    const auto ba = boundary_of(a), bb = boundary_of(b);
    const auto da = squared_edt(ba, a.d, a.h, a.w, a.sd, a.sh, a.sw);
    const auto db = squared_edt(bb, b.d, b.h, b.w, b.sd, b.sh, b.sw);
    return std::max(directed_max(ba, db), directed_max(bb, da));
}

double relative_volume_difference(const BinaryMask& pred, const BinaryMask& ref) {
    check_compatible(pred, ref, "relative_volume_difference");
    const double vr = double(ref.volume());
    require(vr > 0.0, "relative_volume_difference: reference mask is empty");
    return std::abs(double(pred.volume()) - vr) / vr;
}

PlausibilityReport plausibility_check(const LabelMap& labels, int n_classes) {
    require(n_classes >= 2, "plausibility_check: need at least one foreground class");
    require(labels.h >= 1 && labels.w >= 1, "plausibility_check: empty label map");
    for (std::uint8_t c : labels.v)
        require(c < n_classes, "plausibility_check: label exceeds class count");

    PlausibilityReport rep;
    rep.components.assign(n_classes, 0);
    rep.holes.assign(n_classes, 0);

    const int h = labels.h, w = labels.w;
    std::vector<int> mark(std::size_t(h) * w);
    std::vector<int> stack;
    auto flood = [&](const std::vector<std::uint8_t>& mask, int y0, int x0, int id,
                     bool& touches_border) {
        stack.clear();
        stack.push_back(y0 * w + x0);
        mark[std::size_t(y0) * w + x0] = id;
        while (!stack.empty()) {
            const int cur = stack.back();
            stack.pop_back();
            const int y = cur / w, x = cur % w;
            if (y == 0 || y == h - 1 || x == 0 || x == w - 1) touches_border = true;
            const int ny[4] = {y - 1, y + 1, y, y};
            const int nx[4] = {x, x, x - 1, x + 1};
            for (int k = 0; k < 4; ++k) {
                if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
                const std::size_t idx = std::size_t(ny[k]) * w + nx[k];
                if (mask[idx] && mark[idx] == 0) {
                    mark[idx] = id;
                    stack.push_back(int(idx));
                }
            }
        }
    };

    std::vector<std::uint8_t> mask(std::size_t(h) * w);
    for (int cls = 1; cls < n_classes; ++cls) {
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = labels.v[i] == cls ? 1 : 0;

        // foreground components
        std::fill(mark.begin(), mark.end(), 0);
        int id = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (mask[std::size_t(y) * w + x] && mark[std::size_t(y) * w + x] == 0) {
                    bool unused = false;
                    flood(mask, y, x, ++id, unused);
                }
        rep.components[cls] = id;

        // enclosed holes: background components that never reach the border
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] ^= 1;
        std::fill(mark.begin(), mark.end(), 0);
        int holes = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (mask[std::size_t(y) * w + x] && mark[std::size_t(y) * w + x] == 0) {
                    bool touches = false;
                    flood(mask, y, x, h * w + 1, touches);
                    if (!touches) ++holes;
                }
        rep.holes[cls] = holes;
    }
    return rep;
}

}  // namespace lfb
