#include "mrsim/simd.hpp"

#include <cstdlib>
#include <cstring>

namespace mrsim {

namespace {

void rotate_relax(std::size_t n, double* mx, double* my, double* mz, const double* c, const double* s,
                  const double* e2, const double* e1, const double* rec) {
    for (std::size_t i = 0; i < n; ++i) {
        const double x = mx[i], y = my[i];
        mx[i] = e2[i] * (c[i] * x + s[i] * y);
        my[i] = e2[i] * (c[i] * y - s[i] * x);
        mz[i] = e1[i] * mz[i] + rec[i];
    }
}

void hard_pulse(std::size_t n, double* mx, double* my, double* mz, const double* r) {
    for (std::size_t i = 0; i < n; ++i) {
        const double x = mx[i], y = my[i], z = mz[i];
        mx[i] = r[0] * x + r[1] * y + r[2] * z;
        my[i] = r[3] * x + r[4] * y + r[5] * z;
        mz[i] = r[6] * x + r[7] * y + r[8] * z;
    }
}

void accumulate(std::size_t n, const double* mx, const double* my, const double* wr, const double* wi, double* re,
                double* im) {
    double a = 0, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        a += wr[i] * mx[i] - wi[i] * my[i];
        b += wr[i] * my[i] + wi[i] * mx[i];
    }
    *re += a;
    *im += b;
}

const SimdKernels kScalar{"scalar", rotate_relax, hard_pulse, accumulate};

}  // namespace

const SimdKernels& scalar_kernels() { return kScalar; }

#if !defined(MRSIM_HAVE_AVX2)
const SimdKernels* avx2_kernels() { return nullptr; }
#endif
#if !defined(__aarch64__)
const SimdKernels* neon_kernels() { return nullptr; }
#endif

const SimdKernels& active_kernels() {
    static const SimdKernels* k = [] {
        const char* env = std::getenv("MRSIM_SIMD");
        if (env && std::strcmp(env, "scalar") == 0) return &kScalar;
        if (const auto* a = avx2_kernels()) return a;
        if (const auto* n = neon_kernels()) return n;
        return &kScalar;
    }();
    return *k;
}

}  // namespace mrsim
