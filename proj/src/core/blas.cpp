#include "core/blas.hpp"

#include <dlfcn.h>
#include <cstdlib>
#include <mutex>
#include <stdexcept>

namespace lfb::blas {
namespace {

// CBLAS ABI constants (cblas.h not required at build time).
constexpr int kRowMajor = 101;
constexpr int kNoTrans = 111;
constexpr int kTrans = 112;

using cblas_dgemm_fn = void (*)(int order, int ta, int tb, int m, int n, int k,
                                double alpha, const double* a, int lda,
                                const double* b, int ldb, double beta,
                                double* c, int ldc);
using set_threads_fn = void (*)(int);
using corename_fn = char* (*)();

struct Backend {
    cblas_dgemm_fn dgemm = nullptr;
    std::string name = "internal";
    int threads = 1;
};

int resolve_threads() {
    if (const char* e = std::getenv("LFBNET_THREADS")) {
        int t = std::atoi(e);
        if (t >= 1) return t;
    }
    return 1;
}

// OpenBLAS picks its kernel in a load-time constructor, and on this class of
// virtualized CPU (masked model string, AVX-512 present) its auto-detection
// falls back to a slow generic kernel. The coretype override must therefore
// be in the environment *before* the library is mapped, which is why the
// library is loaded lazily here instead of being linked.
Backend load_backend() {
    Backend b;
    b.threads = resolve_threads();
    if (const char* e = std::getenv("LFBNET_BLAS"); e && std::string(e) == "internal")
        return b;
#if defined(__x86_64__)
    if (!std::getenv("OPENBLAS_CORETYPE") && __builtin_cpu_supports("avx512f"))
        setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 1);
#endif
    setenv("OPENBLAS_NUM_THREADS", std::to_string(b.threads).c_str(), 0);

    void* h = dlopen("libopenblas.so.0", RTLD_NOW | RTLD_LOCAL);
    if (!h) h = dlopen("libopenblas.so", RTLD_NOW | RTLD_LOCAL);
    if (!h) return b;

    auto* fn = reinterpret_cast<cblas_dgemm_fn>(dlsym(h, "cblas_dgemm"));
    if (!fn) {
        dlclose(h);
        return b;
    }
    if (auto* set = reinterpret_cast<set_threads_fn>(dlsym(h, "openblas_set_num_threads")))
        set(b.threads);
    b.dgemm = fn;
    b.name = "openblas";
    if (auto* core = reinterpret_cast<corename_fn>(dlsym(h, "openblas_get_corename")))
        b.name += std::string(":") + core();
    return b;
}

const Backend& backend_instance() {
    static Backend b = load_backend();
    return b;
}

// Fallback kernel, used when no system BLAS is available (or LFBNET_BLAS=
// internal). Deterministic fixed-order accumulation; k-blocked so the panel
// of B stays cache-resident in the axpy form.
void internal_dgemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                    const double* a, int lda, const double* b, int ldb,
                    double beta, double* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        double* crow = c + std::size_t(i) * ldc;
        if (beta == 0.0)
            for (int j = 0; j < n; ++j) crow[j] = 0.0;
        else if (beta != 1.0)
            for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    if (alpha == 0.0 || k == 0) return;

    if (!trans_b) {
        // C[i,:] += alpha * A'[i,l] * B[l,:] — unit-stride over j.
        constexpr int kb = 256;
        for (int l0 = 0; l0 < k; l0 += kb) {
            int l1 = l0 + kb < k ? l0 + kb : k;
            for (int i = 0; i < m; ++i) {
                double* crow = c + std::size_t(i) * ldc;
                for (int l = l0; l < l1; ++l) {
                    double aval = trans_a ? a[std::size_t(l) * lda + i]
                                          : a[std::size_t(i) * lda + l];
                    if (aval == 0.0) continue;
                    double s = alpha * aval;
                    const double* brow = b + std::size_t(l) * ldb;
                    for (int j = 0; j < n; ++j) crow[j] += s * brow[j];
                }
            }
        }
    } else {
        // B transposed: inner products are unit-stride over l.
        for (int i = 0; i < m; ++i) {
            double* crow = c + std::size_t(i) * ldc;
            for (int j = 0; j < n; ++j) {
                const double* brow = b + std::size_t(j) * ldb;
                double acc = 0.0;
                if (trans_a)
                    for (int l = 0; l < k; ++l) acc += a[std::size_t(l) * lda + i] * brow[l];
                else
                    for (int l = 0; l < k; ++l) acc += a[std::size_t(i) * lda + l] * brow[l];
                crow[j] += alpha * acc;
            }
        }
    }
}

}  // namespace

void dgemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
           const double* a, int lda, const double* b, int ldb,
           double beta, double* c, int ldc) {
    if (m < 0 || n < 0 || k < 0)
        throw std::invalid_argument("dgemm: negative dimension");
    if (m == 0 || n == 0) return;
    const Backend& be = backend_instance();
    if (be.dgemm) {
        be.dgemm(kRowMajor, trans_a ? kTrans : kNoTrans, trans_b ? kTrans : kNoTrans,
                 m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    } else {
        internal_dgemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    }
}

std::string backend() { return backend_instance().name; }

int threads() { return backend_instance().threads; }

}  // namespace lfb::blas
