#if defined(__aarch64__)
#include <arm_neon.h>

#include "mrsim/simd.hpp"

namespace mrsim {

namespace {

// vmulq/vaddq only (no vfmaq) to keep rounding identical to the scalar kernels.
void rotate_relax(std::size_t n, double* mx, double* my, double* mz, const double* c, const double* s,
                  const double* e2, const double* e1, const double* rec) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t x = vld1q_f64(mx + i), y = vld1q_f64(my + i), z = vld1q_f64(mz + i);
        const float64x2_t cc = vld1q_f64(c + i), ss = vld1q_f64(s + i);
        const float64x2_t f2 = vld1q_f64(e2 + i), f1 = vld1q_f64(e1 + i);
        vst1q_f64(mx + i, vmulq_f64(f2, vaddq_f64(vmulq_f64(cc, x), vmulq_f64(ss, y))));
        vst1q_f64(my + i, vmulq_f64(f2, vsubq_f64(vmulq_f64(cc, y), vmulq_f64(ss, x))));
        vst1q_f64(mz + i, vaddq_f64(vmulq_f64(f1, z), vld1q_f64(rec + i)));
    }
    for (; i < n; ++i) {
        const double x = mx[i], y = my[i];
        mx[i] = e2[i] * (c[i] * x + s[i] * y);
        my[i] = e2[i] * (c[i] * y - s[i] * x);
        mz[i] = e1[i] * mz[i] + rec[i];
    }
}

void hard_pulse(std::size_t n, double* mx, double* my, double* mz, const double* r) {
    std::size_t i = 0;
    const auto row = [](const double* k, float64x2_t x, float64x2_t y, float64x2_t z) {
        return vaddq_f64(vaddq_f64(vmulq_n_f64(x, k[0]), vmulq_n_f64(y, k[1])), vmulq_n_f64(z, k[2]));
    };
    for (; i + 2 <= n; i += 2) {
        const float64x2_t x = vld1q_f64(mx + i), y = vld1q_f64(my + i), z = vld1q_f64(mz + i);
        vst1q_f64(mx + i, row(r, x, y, z));
        vst1q_f64(my + i, row(r + 3, x, y, z));
        vst1q_f64(mz + i, row(r + 6, x, y, z));
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
    float64x2_t a = vdupq_n_f64(0), b = vdupq_n_f64(0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t x = vld1q_f64(mx + i), y = vld1q_f64(my + i);
        const float64x2_t r = vld1q_f64(wr + i), q = vld1q_f64(wi + i);
        a = vaddq_f64(a, vsubq_f64(vmulq_f64(r, x), vmulq_f64(q, y)));
        b = vaddq_f64(b, vaddq_f64(vmulq_f64(r, y), vmulq_f64(q, x)));
    }
    double sa = vgetq_lane_f64(a, 0) + vgetq_lane_f64(a, 1);
    double sb = vgetq_lane_f64(b, 0) + vgetq_lane_f64(b, 1);
    for (; i < n; ++i) {
        sa += wr[i] * mx[i] - wi[i] * my[i];
        sb += wr[i] * my[i] + wi[i] * mx[i];
    }
    *re += sa;
    *im += sb;
}

const SimdKernels kNeon{"neon", rotate_relax, hard_pulse, accumulate};

}  // namespace

const SimdKernels* neon_kernels() { return &kNeon; }

}  // namespace mrsim
#endif
