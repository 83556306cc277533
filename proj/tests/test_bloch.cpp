#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mrsim/bloch.hpp"
#include "mrsim/errors.hpp"
#include "mrsim/log.hpp"
#include "oracles.hpp"

using namespace mrsim;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
const RelaxationParams kNoRelax{1e300, 1e300, 1.0};

void check_close(const Magnetization& a, const Magnetization& b, double tol) {
    CHECK(std::abs(a.mx - b.mx) <= tol);
    CHECK(std::abs(a.my - b.my) <= tol);
    CHECK(std::abs(a.mz - b.mz) <= tol);
}

oracle::State st(const Magnetization& m) { return {m.mx, m.my, m.mz}; }

}  // namespace

TEST_CASE("hard pulse examples") {
    check_close(apply_hard_pulse({0, 0, 1}, {90 * kDeg, 0}), {0, 1, 0}, 1e-15);
    check_close(apply_hard_pulse({0.3, 1, 0.5}, {180 * kDeg, 0}), {0.3, -1, -0.5}, 1e-15);
    const Magnetization m{0.2, -0.7, 0.4};
    check_close(apply_hard_pulse(m, {0, 37 * kDeg}), m, 0);
    check_close(apply_hard_pulse({0, 0, 1}, {90 * kDeg, 90 * kDeg}), {-1, 0, 0}, 1e-15);
}

TEST_CASE("hard pulse preserves norm and inverts with -alpha") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1), ang(-4 * kPi, 4 * kPi);
    for (int i = 0; i < 200; ++i) {
        const Magnetization m{u(rng), u(rng), u(rng)};
        const HardPulse p{ang(rng), ang(rng)};
        const Magnetization r = apply_hard_pulse(m, p);
        CHECK(std::abs(r.norm() - m.norm()) <= 1e-12 * m.norm());
        check_close(apply_hard_pulse(r, {-p.alpha, p.phi}), m, 1e-12);
    }
}

TEST_CASE("precession and relaxation examples") {
    const RelaxationParams r{0.8, 0.1, 1.0};
    const Magnetization eq = apply_precess_relax({0.5, -0.3, -0.9}, r, 123.0, 50 * r.t1);
    CHECK(std::abs(eq.mx) <= 1e-12);
    CHECK(std::abs(eq.my) <= 1e-12);
    CHECK(std::abs(eq.mz - 1.0) <= 1e-12);

    const Magnetization half = apply_precess_relax({0, 0, 0}, {1.0, 0.5, 1.0}, 0.0, std::log(2.0));
    CHECK(half.mz == Approx(0.5).epsilon(1e-14));

    const double dt = 1e-3;
    check_close(apply_precess_relax({1, 0, 0}, {1e12, 1e12, 1.0}, kPi / dt, dt), {-1, 0, 0}, 1e-9);
}

TEST_CASE("precession is clockwise seen from +z") {
    // A quarter turn takes +x to -y.
    const Magnetization m = apply_precess_relax({1, 0, 0}, kNoRelax, kPi / 2, 1.0);
    CHECK(std::abs(m.mx) <= 1e-15);
    CHECK(m.my == Approx(-1.0));
}

TEST_CASE("gradient interval examples") {
    const Magnetization m{0.1, 0.2, 0.3};
    check_close(apply_gradient_interval(m, {1, 0.1, 1}, 0.0, 0.0), m, 0);
    check_close(apply_gradient_interval({1, 0, 0}, kNoRelax, kPi, 0), {-1, 0, 0}, 1e-15);
    check_close(apply_gradient_interval({1, 0, 0}, kNoRelax, 2 * kPi, 0), {1, 0, 0}, 1e-15);
    // Transverse phase changes by -moment.
    const Magnetization q = apply_gradient_interval({1, 0, 0}, kNoRelax, 0.3, 0);
    CHECK(std::arg(q.transverse()) == Approx(-0.3));
}

TEST_CASE("precess/relax is a semigroup") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1), t(1e-4, 0.05);
    for (int i = 0; i < 100; ++i) {
        const RelaxationParams r{0.2 + 0.5 * (u(rng) + 1), 0.05 + 0.05 * (u(rng) + 1), 1.0};
        const Magnetization m{u(rng), u(rng), u(rng)};
        const double w = 300 * u(rng), a = t(rng), b = t(rng);
        const Magnetization two = apply_precess_relax(apply_precess_relax(m, r, w, a), r, w, b);
        const Magnetization one = apply_precess_relax(m, r, w, a + b);
        check_close(two, one, 1e-10);
    }
}

TEST_CASE("rotation-only operators preserve the norm") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 100; ++i) {
        const Magnetization m{u(rng), u(rng), u(rng)};
        const Magnetization r = apply_precess_relax(m, kNoRelax, 1e3 * u(rng), 0.01);
        CHECK(std::abs(r.norm() - m.norm()) <= 1e-12 * m.norm());
    }
}

TEST_CASE("operators agree with RK4 on the raw equation") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1), pos(0, 1);
    for (int i = 0; i < 30; ++i) {
        const RelaxationParams r{0.1 + pos(rng), 0.02 + 0.1 * pos(rng), 0.5 + pos(rng)};
        const Magnetization m{u(rng), u(rng), u(rng)};
        const double dt = 1e-3 + 9e-3 * pos(rng);
        const double dw = 2000 * u(rng);
        const oracle::BlochField f{kGamma, 0, 0, dw / kGamma, r.t1, r.t2, r.m0};
        const auto ref = oracle::rk4(f, st(m), dt, 4000);
        CHECK(oracle::rel_err(st(apply_precess_relax(m, r, dw, dt)), ref) <= 1e-6);
    }
}

TEST_CASE("shaped pulse composes to the hard pulse and checks sampling") {
    const std::vector<cplx> env(50, std::polar(1e-6, 0.4));
    const double dt = (kPi / 2) / (kGamma * 1e-6 * 50);
    const Magnetization a = apply_shaped_pulse({0, 0, 1}, kNoRelax, env, dt, 0.0, {});
    check_close(a, apply_hard_pulse({0, 0, 1}, {kPi / 2, 0.4}), 1e-9);
    check_close(apply_shaped_pulse({0.1, 0.2, 0.3}, kNoRelax, {}, dt, 0.0, {}), {0.1, 0.2, 0.3}, 0);
    CHECK_THROWS_AS(apply_shaped_pulse({0, 0, 1}, kNoRelax, env, dt, 0.0, {}, false), EnvelopeUndersampled);
}

TEST_CASE("shaped pulse rotates about the effective field") {
    // Constant B1 and offset: closed-form rotation about (B1 cos phi, B1 sin phi, delta/gamma).
    const double b1 = 2e-6, phi = 0.7, delta = 300.0;  // rad/s
    const double T = 2e-3;
    const Magnetization m0{0.2, -0.4, 0.8};
    const auto run = [&](int n) {
        const std::vector<cplx> env(n, std::polar(b1, phi));
        return apply_shaped_pulse(m0, kNoRelax, env, T / n, delta * T / n, {});
    };
    // Pulse-then-precess splitting is first order in 1/n; Richardson extrapolation removes that term.
    const Magnetization a = run(20000), b = run(40000);
    const Magnetization got{2 * b.mx - a.mx, 2 * b.my - a.my, 2 * b.mz - a.mz};
    // dM/dt = gamma M x B = -gamma B x M: rotation by angle gamma|B|T about -B (right-handed).
    const double bx = b1 * std::cos(phi), by = b1 * std::sin(phi), bz = delta / kGamma;
    const double bn = std::sqrt(bx * bx + by * by + bz * bz);
    const double ux = -bx / bn, uy = -by / bn, uz = -bz / bn, th = kGamma * bn * T;
    const double c = std::cos(th), s = std::sin(th);
    const double d = ux * m0.mx + uy * m0.my + uz * m0.mz;
    const double cx = uy * m0.mz - uz * m0.my, cy = uz * m0.mx - ux * m0.mz, cz = ux * m0.my - uy * m0.mx;
    const Magnetization want{m0.mx * c + cx * s + ux * d * (1 - c), m0.my * c + cy * s + uy * d * (1 - c),
                             m0.mz * c + cz * s + uz * d * (1 - c)};
    check_close(got, want, 1e-8);
}

TEST_CASE("small tip oracle") {
    const std::vector<cplx> zero(10, 0.0);
    CHECK(std::abs(small_tip_response(zero, 1e-5, 0, 0, 1e-4, 1.0)) == 0.0);
    // Constant envelope, bz = 0: j*m0z*alpha.
    const std::vector<cplx> c(101, 1e-7);
    const double dt = 1e-5;
    const double alpha = kGamma * 1e-7 * 100 * dt;
    const cplx r = small_tip_response(c, dt, 0, 0, 100 * dt, 1.0);
    CHECK(r.real() == Approx(0.0).epsilon(1e-12));
    CHECK(r.imag() == Approx(alpha).epsilon(1e-12));
}

TEST_CASE("small tip matches the shaped pulse for a windowed sinc") {
    for (double flip_deg : {10.0, 30.0}) {
        const int n = 400;
        const double T = 4e-3, dt = T / (n - 1);
        std::vector<cplx> env(n);
        double area = 0;
        for (int i = 0; i < n; ++i) {
            const double x = (i - (n - 1) / 2.0) / ((n - 1) / 2.0) * 3 * kPi;
            const double w = 0.54 + 0.46 * std::cos(x / 3);
            env[i] = (x == 0 ? 1.0 : std::sin(x) / x) * w;
            area += env[i].real();
        }
        const double scale = flip_deg * kDeg / (kGamma * area * dt);
        for (auto& e : env) e *= scale;
        const Magnetization m = apply_shaped_pulse({0, 0, 1}, kNoRelax, env, dt, 0.0, {});
        // The shaped pulse applies sample i at the start of interval i; the small-tip integral uses the
        // trapezoid rule and ends at the last sample.
        const cplx st = small_tip_response(env, dt, 0, 0, (n - 1) * dt, 1.0);
        const double dev = std::abs(m.transverse() - st) / std::abs(st);
        // The linear response replaces sin(alpha) by alpha, so it overshoots by alpha^2/6 to leading order.
        const double a = flip_deg * kDeg;
        CHECK(dev < a * a / 6 + 1e-3);
    }
}

TEST_CASE("relaxation parameter checks") {
    CHECK_THROWS_AS(check_relaxation({0, 1, 1}), InvalidParameter);
    CHECK_THROWS_AS(check_relaxation({1, -1, 1}), InvalidParameter);
    CHECK_THROWS_AS(check_relaxation({1, 1, -1}), InvalidParameter);
    std::vector<std::string> got;
    auto prev = set_warning_sink([&](const std::string& m) { got.push_back(m); });
    check_relaxation({0.1, 0.2, 1});
    check_relaxation({0.2, 0.1, 1});
    set_warning_sink(prev);
    CHECK(got.size() == 1);
}
