#pragma once

// Independent reference computations used by the unit and acceptance tests. None of these call into the
// library's physics; they integrate or sum the defining equations directly.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

struct State {
    double x, y, z;
};

// dM/dt = gamma M x B - (Mx/T2, My/T2, (Mz - M0)/T1), B = (b1 cos phi, b1 sin phi, bz).
struct BlochField {
    double gamma, b1, phi, bz, t1, t2, m0;
};

inline State deriv(const BlochField& f, const State& m) {
    const double bx = f.b1 * std::cos(f.phi), by = f.b1 * std::sin(f.phi), bz = f.bz;
    const double cx = m.y * bz - m.z * by;
    const double cy = m.z * bx - m.x * bz;
    const double cz = m.x * by - m.y * bx;
    return {f.gamma * cx - m.x / f.t2, f.gamma * cy - m.y / f.t2, f.gamma * cz - (m.z - f.m0) / f.t1};
}

// Classic RK4 with n equal steps over duration T.
inline State rk4(const BlochField& f, State m, double T, int n) {
    const double h = T / n;
    for (int i = 0; i < n; ++i) {
        const State k1 = deriv(f, m);
        const State a{m.x + 0.5 * h * k1.x, m.y + 0.5 * h * k1.y, m.z + 0.5 * h * k1.z};
        const State k2 = deriv(f, a);
        const State b{m.x + 0.5 * h * k2.x, m.y + 0.5 * h * k2.y, m.z + 0.5 * h * k2.z};
        const State k3 = deriv(f, b);
        const State c{m.x + h * k3.x, m.y + h * k3.y, m.z + h * k3.z};
        const State k4 = deriv(f, c);
        m = {m.x + h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x), m.y + h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y),
             m.z + h / 6 * (k1.z + 2 * k2.z + 2 * k3.z + k4.z)};
    }
    return m;
}

inline double rel_err(const State& a, const State& b) {
    const double d = std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
    const double n = std::sqrt(b.x * b.x + b.y * b.y + b.z * b.z);
    return d / std::max(n, 1e-300);
}

// Direct 2D DFT, same centering as the library (index n/2 is the origin). sign = +1 is the inverse direction.
inline std::vector<cplx> dft2_centered(const std::vector<cplx>& in, int nx, int ny, int sign, double scale) {
    std::vector<cplx> out(in.size());
    const double tp = 2.0 * std::numbers::pi;
    for (int py = 0; py < ny; ++py)
        for (int px = 0; px < nx; ++px) {
            cplx s{};
            for (int ky = 0; ky < ny; ++ky)
                for (int kx = 0; kx < nx; ++kx) {
                    const double ph = sign * tp *
                                      (double((kx - nx / 2) * (px - nx / 2)) / nx + double((ky - ny / 2) * (py - ny / 2)) / ny);
                    s += in[ky * nx + kx] * std::polar(1.0, ph);
                }
            out[py * nx + px] = s * scale;
        }
    return out;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// Legendre P_n by the explicit sum formula (independent of the library's recurrence).
inline double legendre_sum(int n, double x) {
    // P_n(x) = 2^-n sum_k (-1)^k C(n,k) C(2n-2k, n) x^(n-2k)
    auto binom = [](int a, int b) {
        double r = 1;
        for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
        return r;
    };
    double s = 0;
    for (int k = 0; k <= n / 2; ++k) s += (k % 2 ? -1.0 : 1.0) * binom(n, k) * binom(2 * n - 2 * k, n) * std::pow(x, n - 2 * k);
    return s / std::pow(2.0, n);
}

inline std::int64_t gcd(std::int64_t a, std::int64_t b) {
    while (b) {
        const auto t = a % b;
        a = b;
        b = t;
    }
    return a < 0 ? -a : a;
}

}  // namespace oracle
