#pragma once

#include <cstddef>

namespace mrsim {

// Structure-of-arrays kernels over n spins. All variants evaluate the same expression tree per spin, so
// rotate_relax and hard_pulse are bit-identical across variants; accumulate differs only in summation order.
struct SimdKernels {
    const char* name;
    // mx' = e2*(c*mx + s*my), my' = e2*(c*my - s*mx), mz' = e1*mz + rec
    void (*rotate_relax)(std::size_t n, double* mx, double* my, double* mz, const double* c, const double* s,
                         const double* e2, const double* e1, const double* rec);
    // Row-major 3x3 applied to every spin.
    void (*hard_pulse)(std::size_t n, double* mx, double* my, double* mz, const double* r);
    // re += sum(wr*mx - wi*my), im += sum(wr*my + wi*mx)
    void (*accumulate)(std::size_t n, const double* mx, const double* my, const double* wr, const double* wi,
                       double* re, double* im);
};

const SimdKernels& scalar_kernels();
// nullptr when the variant is not compiled in or the CPU lacks it.
const SimdKernels* avx2_kernels();
const SimdKernels* neon_kernels();
// Best available variant; MRSIM_SIMD=scalar forces the reference kernels.
const SimdKernels& active_kernels();

}  // namespace mrsim
