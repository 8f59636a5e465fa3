#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfb {

// Error taxonomy shared by every parser and file reader in the library:
//   std::invalid_argument  semantic misuse (inconsistent config, bad ranges)
//   format_error           content that cannot be parsed (corrupt binary,
//                          malformed CSV/JSON/manifest)
//   io_error               the file system said no (open/read/write failed)
// Both derive from std::runtime_error so untyped handlers keep working.
struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense rank-4 tensor, row-major (n, c, h, w), double precision throughout.
// All network activations, weights and gradients use this one layout; lower
// ranks are embedded by setting leading dims to 1 (a scalar is (1,1,1,1)).

struct Shape4 {
    int n = 0, c = 0, h = 0, w = 0;

    bool operator==(const Shape4&) const = default;
    std::size_t count() const {
        return std::size_t(n) * std::size_t(c) * std::size_t(h) * std::size_t(w);
    }
    std::string str() const;
};

struct Tensor4 {
    Shape4 shape;
    std::vector<double> v;

    Tensor4() = default;
    explicit Tensor4(Shape4 s) : shape(s), v(s.count(), 0.0) {}
    Tensor4(Shape4 s, double fill) : shape(s), v(s.count(), fill) {}

    static Tensor4 scalar(double x) {
        Tensor4 t({1, 1, 1, 1});
        t.v[0] = x;
        return t;
    }

    std::size_t size() const { return v.size(); }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    std::size_t index(int in, int ic, int iy, int ix) const {
        return ((std::size_t(in) * shape.c + ic) * shape.h + iy) * shape.w + ix;
    }
    double& at(int in, int ic, int iy, int ix) { return v[index(in, ic, iy, ix)]; }
    double at(int in, int ic, int iy, int ix) const { return v[index(in, ic, iy, ix)]; }

    double item() const;  // requires size()==1
    void fill(double x) { std::fill(v.begin(), v.end(), x); }

    bool all_finite() const;
};

// Small dense grid of class indices (one label map), row-major (h, w).
struct LabelMap {
    int h = 0, w = 0;
    std::vector<std::uint8_t> v;

    LabelMap() = default;
    LabelMap(int h_, int w_) : h(h_), w(w_), v(std::size_t(h_) * w_, 0) {}
    std::uint8_t& at(int y, int x) { return v[std::size_t(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return v[std::size_t(y) * w + x]; }
};

// 64-bit FNV-1a over raw bytes; used for content hashes (dataset spec hash,
// frozen-group fingerprints in tests).
std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t x);

}  // namespace lfb
