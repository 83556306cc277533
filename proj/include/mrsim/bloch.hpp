#pragma once

#include <complex>
#include <numbers>
#include <span>

namespace mrsim {

using cplx = std::complex<double>;

// rad/(s*T)
inline constexpr double kGamma = 2.0 * std::numbers::pi * 42.6e6;

struct Magnetization {
    double mx = 0, my = 0, mz = 0;

    cplx transverse() const { return {mx, my}; }
    double norm() const;
};

struct RelaxationParams {
    double t1 = 1.0;  // s
    double t2 = 1.0;  // s
    double m0 = 1.0;
};

// Emits a warning when t2 > t1. Throws InvalidParameter on non-positive times or negative m0.
void check_relaxation(const RelaxationParams& r);

struct HardPulse {
    double alpha = 0;  // flip, rad
    double phi = 0;    // phase, rad
};

struct FrameContext {
    double omega_hf = 0;  // rad/s
    double gamma = kGamma;
};

// Row-major 3x3 rotation of a hard pulse.
struct PulseMatrix {
    double m[9];
};

PulseMatrix hard_pulse_matrix(const HardPulse& p);
Magnetization apply(const PulseMatrix& r, const Magnetization& m);

Magnetization apply_hard_pulse(const Magnetization& m, const HardPulse& p);

// Clockwise rotation by domega*dt seen from +z, then T2 decay and T1 recovery.
Magnetization apply_precess_relax(const Magnetization& m, const RelaxationParams& r, double domega, double dt);

// Same operator with the rotation angle given directly (gamma * int G.x dt, rad).
Magnetization apply_gradient_interval(const Magnetization& m, const RelaxationParams& r, double gradient_moment,
                                      double dt);

// Sequence of sub-pulses: hard pulse alpha_i = gamma*|B1_i|*dt, phi_i = arg B1_i, followed by a rotation of
// local_bz_moment (rad) and relaxation over dt. envelope in tesla. Throws EnvelopeUndersampled when
// envelope_sampling_ok is false.
Magnetization apply_shaped_pulse(const Magnetization& m, const RelaxationParams& r, std::span<const cplx> envelope,
                                 double per_sample_dt, double local_bz_moment_per_sample, const FrameContext& ctx,
                                 bool envelope_sampling_ok = true);

// Small-tip transverse response at time t for an envelope sampled at t0 + i*dt (trapezoidal rule).
// Starts from Mxy(t0) = 0.
cplx small_tip_response(std::span<const cplx> envelope, double per_sample_dt, double bz, double t0, double t,
                        double m0z, double gamma = kGamma);

}  // namespace mrsim
