#include "mrsim/bloch.hpp"

#include <cmath>

#include "mrsim/errors.hpp"
#include "mrsim/log.hpp"

namespace mrsim {

double Magnetization::norm() const { return std::sqrt(mx * mx + my * my + mz * mz); }

void check_relaxation(const RelaxationParams& r) {
    if (!(r.t1 > 0) || !(r.t2 > 0)) throw InvalidParameter("relaxation times must be positive");
    if (!(r.m0 >= 0)) throw InvalidParameter("m0 must be non-negative");
    if (r.t2 > r.t1) warn("T2 exceeds T1 (" + std::to_string(r.t2) + " s > " + std::to_string(r.t1) + " s)");
}

PulseMatrix hard_pulse_matrix(const HardPulse& p) {
    const double ca = std::cos(p.alpha), sa = std::sin(p.alpha);
    const double cp = std::cos(p.phi), sp = std::sin(p.phi);
    const double omc = 1.0 - ca;
    return {{cp * cp + sp * sp * ca, sp * cp * omc, -sp * sa,
             sp * cp * omc, sp * sp + cp * cp * ca, cp * sa,
             sp * sa, -cp * sa, ca}};
}

Magnetization apply(const PulseMatrix& r, const Magnetization& m) {
    const double* a = r.m;
    return {a[0] * m.mx + a[1] * m.my + a[2] * m.mz,
            a[3] * m.mx + a[4] * m.my + a[5] * m.mz,
            a[6] * m.mx + a[7] * m.my + a[8] * m.mz};
}

Magnetization apply_hard_pulse(const Magnetization& m, const HardPulse& p) { return apply(hard_pulse_matrix(p), m); }

Magnetization apply_gradient_interval(const Magnetization& m, const RelaxationParams& r, double theta, double dt) {
    const double c = std::cos(theta), s = std::sin(theta);
    const double e2 = std::exp(-dt / r.t2);
    const double e1 = std::exp(-dt / r.t1);
    return {e2 * (c * m.mx + s * m.my), e2 * (-s * m.mx + c * m.my), e1 * m.mz + r.m0 * (1.0 - e1)};
}

Magnetization apply_precess_relax(const Magnetization& m, const RelaxationParams& r, double domega, double dt) {
    return apply_gradient_interval(m, r, domega * dt, dt);
}

Magnetization apply_shaped_pulse(const Magnetization& m, const RelaxationParams& r, std::span<const cplx> envelope,
                                 double dt, double bz_moment, const FrameContext& ctx, bool envelope_sampling_ok) {
    if (!envelope_sampling_ok)
        throw EnvelopeUndersampled("RF envelope sampling violates the aliasing bound for this FOV");
    if (!(dt > 0)) throw InvalidParameter("per-sample dt must be positive");
    Magnetization out = m;
    for (const cplx& b1 : envelope) {
        out = apply_hard_pulse(out, {ctx.gamma * std::abs(b1) * dt, std::arg(b1)});
        out = apply_gradient_interval(out, r, bz_moment, dt);
    }
    return out;
}

cplx small_tip_response(std::span<const cplx> envelope, double dt, double bz, double t0, double t, double m0z,
                        double gamma) {
    if (envelope.empty() || t <= t0) return {0.0, 0.0};
    const double w = gamma * bz;
    cplx integral{0.0, 0.0};
    cplx prev = envelope[0] * std::polar(1.0, w * t0);
    for (std::size_t i = 1; i < envelope.size(); ++i) {
        const double tau = t0 + static_cast<double>(i) * dt;
        if (tau > t) break;
        const cplx cur = envelope[i] * std::polar(1.0, w * tau);
        integral += 0.5 * dt * (prev + cur);
        prev = cur;
    }
    return cplx(0.0, gamma * m0z) * std::polar(1.0, -w * t) * integral;
}

}  // namespace mrsim
