#include "core/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace lfb {

std::string Shape4::str() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "(%d,%d,%d,%d)", n, c, h, w);
    return buf;
}

double Tensor4::item() const {
    if (size() != 1)
        throw std::logic_error("Tensor4::item: tensor has " + std::to_string(size()) + " elements, expected 1");
    return v[0];
}

bool Tensor4::all_finite() const {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

}  // namespace lfb
