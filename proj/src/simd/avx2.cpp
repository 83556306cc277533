// Built with -mavx2 and without -mfma so products and sums round exactly like the scalar kernels.
#include <immintrin.h>

#include "mrsim/simd.hpp"

namespace mrsim {

namespace {

void rotate_relax(std::size_t n, double* mx, double* my, double* mz, const double* c, const double* s,
                  const double* e2, const double* e1, const double* rec) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(mx + i), y = _mm256_loadu_pd(my + i), z = _mm256_loadu_pd(mz + i);
        const __m256d cc = _mm256_loadu_pd(c + i), ss = _mm256_loadu_pd(s + i);
        const __m256d f2 = _mm256_loadu_pd(e2 + i), f1 = _mm256_loadu_pd(e1 + i);
        const __m256d nx = _mm256_mul_pd(f2, _mm256_add_pd(_mm256_mul_pd(cc, x), _mm256_mul_pd(ss, y)));
        const __m256d ny = _mm256_mul_pd(f2, _mm256_sub_pd(_mm256_mul_pd(cc, y), _mm256_mul_pd(ss, x)));
        const __m256d nz = _mm256_add_pd(_mm256_mul_pd(f1, z), _mm256_loadu_pd(rec + i));
        _mm256_storeu_pd(mx + i, nx);
        _mm256_storeu_pd(my + i, ny);
        _mm256_storeu_pd(mz + i, nz);
    }
    for (; i < n; ++i) {
        const double x = mx[i], y = my[i];
        mx[i] = e2[i] * (c[i] * x + s[i] * y);
        my[i] = e2[i] * (c[i] * y - s[i] * x);
        mz[i] = e1[i] * mz[i] + rec[i];
    }
}

void hard_pulse(std::size_t n, double* mx, double* my, double* mz, const double* r) {
    __m256d m[9];
    for (int k = 0; k < 9; ++k) m[k] = _mm256_set1_pd(r[k]);
    std::size_t i = 0;
    const auto row = [](__m256d a, __m256d b, __m256d c, __m256d x, __m256d y, __m256d z) {
        return _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(a, x), _mm256_mul_pd(b, y)), _mm256_mul_pd(c, z));
    };
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(mx + i), y = _mm256_loadu_pd(my + i), z = _mm256_loadu_pd(mz + i);
        _mm256_storeu_pd(mx + i, row(m[0], m[1], m[2], x, y, z));
        _mm256_storeu_pd(my + i, row(m[3], m[4], m[5], x, y, z));
        _mm256_storeu_pd(mz + i, row(m[6], m[7], m[8], x, y, z));
    }
    for (; i < n; ++i) {
        const double x = mx[i], y = my[i], z = mz[i];
        mx[i] = r[0] * x + r[1] * y + r[2] * z;
        my[i] = r[3] * x + r[4] * y + r[5] * z;
        mz[i] = r[6] * x + r[7] * y + r[8] * z;
    }
}

void accumulate(std::size_t n, const double* mx, const double* my, const double* wr, const double* wi, double* re,
                double* im) {
    __m256d a = _mm256_setzero_pd(), b = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(mx + i), y = _mm256_loadu_pd(my + i);
        const __m256d r = _mm256_loadu_pd(wr + i), q = _mm256_loadu_pd(wi + i);
        a = _mm256_add_pd(a, _mm256_sub_pd(_mm256_mul_pd(r, x), _mm256_mul_pd(q, y)));
        b = _mm256_add_pd(b, _mm256_add_pd(_mm256_mul_pd(r, y), _mm256_mul_pd(q, x)));
    }
    alignas(32) double la[4], lb[4];
    _mm256_store_pd(la, a);
    _mm256_store_pd(lb, b);
    double sa = (la[0] + la[1]) + (la[2] + la[3]);
    double sb = (lb[0] + lb[1]) + (lb[2] + lb[3]);
    for (; i < n; ++i) {
        sa += wr[i] * mx[i] - wi[i] * my[i];
        sb += wr[i] * my[i] + wi[i] * mx[i];
    }
    *re += sa;
    *im += sb;
}

const SimdKernels kAvx2{"avx2", rotate_relax, hard_pulse, accumulate};

}  // namespace

const SimdKernels* avx2_kernels() {
    static const bool ok = __builtin_cpu_supports("avx2");
    return ok ? &kAvx2 : nullptr;
}

}  // namespace mrsim
