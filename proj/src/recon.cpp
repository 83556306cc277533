#include "mrsim/recon.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>

#include "mrsim/errors.hpp"

namespace mrsim {

Trajectory parse_trajectory(const std::string& spec) {
    Trajectory t;
    if (spec == "se") t.kind = TrajectoryKind::se;
    else if (spec == "epi") t.kind = TrajectoryKind::epi;
    else if (spec == "tse-seq") t.kind = TrajectoryKind::tse_seq;
    else if (spec.rfind("table:", 0) == 0) {
        t.kind = TrajectoryKind::table;
        const std::string path = spec.substr(6);
        std::ifstream in(path);
        if (!in) throw IoError("cannot open trajectory table " + path);
        std::string line;
        int ln = 0;
        while (std::getline(in, line)) {
            ++ln;
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            std::istringstream ls(line);
            long long a, r;
            int rev;
            if (!(ls >> a)) continue;
            if (!(ls >> r >> rev) || a < 0) throw ParseError("expected 'acq row reversed'", ln, 1);
            t.table.push_back({static_cast<std::size_t>(a), static_cast<int>(r), rev != 0});
        }
    } else {
        throw InvalidParameter("unknown trajectory '" + spec + "' (se, epi, tse-seq, table:PATH)");
    }
    return t;
}

std::vector<EchoRecord> select_echo(const std::vector<EchoRecord>& echoes, int echo) {
    std::vector<EchoRecord> out;
    for (const auto& e : echoes)
        if (e.echo == echo) out.push_back(e);
    return out;
}

KSpaceMatrix assemble_kspace(const std::vector<EchoRecord>& echoes, const Trajectory& traj, int nx, int ny) {
    if (nx < 1 || ny < 1) throw InvalidParameter("matrix size must be positive");
    KSpaceMatrix k;
    k.nx = nx;
    k.ny = ny;
    k.data.assign(static_cast<std::size_t>(nx) * ny, cplx{});
    k.row_acquisition.assign(ny, -1);
    k.row_reversed.assign(ny, false);

    std::vector<TrajectoryEntry> plan;
    if (traj.kind == TrajectoryKind::table) {
        plan = traj.table;
    } else {
        if (echoes.size() != static_cast<std::size_t>(ny))
            throw TrajectoryMismatch(std::to_string(echoes.size()) + " acquisitions for " + std::to_string(ny) +
                                     " rows");
        for (std::size_t a = 0; a < echoes.size(); ++a) {
            const auto& e = echoes[a];
            const int idx = static_cast<int>(a);
            switch (traj.kind) {
                case TrajectoryKind::se: plan.push_back({a, e.row >= 0 ? e.row : idx, false}); break;
                case TrajectoryKind::epi:
                    plan.push_back({a, e.row >= 0 ? e.row : idx, e.row >= 0 ? e.reversed : (idx % 2 == 1)});
                    break;
                case TrajectoryKind::tse_seq: plan.push_back({a, idx, false}); break;
                case TrajectoryKind::table: break;
            }
        }
    }
    for (const auto& p : plan) {
        if (p.acquisition >= echoes.size())
            throw TrajectoryMismatch("trajectory names acquisition " + std::to_string(p.acquisition) + " of " +
                                     std::to_string(echoes.size()));
        if (p.row < 0 || p.row >= ny) throw TrajectoryMismatch("row " + std::to_string(p.row) + " outside the matrix");
        const auto& s = echoes[p.acquisition].samples;
        if (s.size() != static_cast<std::size_t>(nx))
            throw TrajectoryMismatch(std::to_string(s.size()) + " samples for " + std::to_string(nx) + " columns");
        if (k.row_acquisition[p.row] >= 0) throw TrajectoryMismatch("row " + std::to_string(p.row) + " filled twice");
        k.row_acquisition[p.row] = static_cast<int>(p.acquisition);
        k.row_reversed[p.row] = p.reversed;
        for (int i = 0; i < nx; ++i) k.at(i, p.row) = s[p.reversed ? nx - 1 - i : i];
    }
    return k;
}

namespace {

std::mutex g_fftw_plan_mutex;  // planner is not thread-safe

void roll(std::vector<cplx>& v, int nx, int ny, int sx, int sy) {
    std::vector<cplx> o(v.size());
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            o[static_cast<std::size_t>((y + sy) % ny) * nx + (x + sx) % nx] = v[static_cast<std::size_t>(y) * nx + x];
    v.swap(o);
}

}  // namespace

std::vector<cplx> centered_idft2(const std::vector<cplx>& k, int nx, int ny) {
    if (k.size() != static_cast<std::size_t>(nx) * ny) throw InvalidParameter("k-space size mismatch");
    // Index n/2 is the center on both sides: shift by ceil(n/2) before, floor(n/2) after.
    std::vector<cplx> buf = k;
    roll(buf, nx, ny, (nx + 1) / 2, (ny + 1) / 2);
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_plan plan;
    {
        std::lock_guard lk(g_fftw_plan_mutex);
        plan = fftw_plan_dft_2d(ny, nx, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lk(g_fftw_plan_mutex);
        fftw_destroy_plan(plan);
    }
    roll(buf, nx, ny, nx / 2, ny / 2);
    const double s = 1.0 / (static_cast<double>(nx) * ny);
    for (auto& v : buf) v *= s;
    return buf;
}

ImageVolume reconstruct(const KSpaceMatrix& k) {
    const auto img = centered_idft2(k.data, k.nx, k.ny);
    ImageVolume out;
    out.nx = k.nx;
    out.ny = k.ny;
    for (const auto& v : img) {
        out.magnitude.push_back(std::abs(v));
        double ph = std::arg(v);
        if (ph == -std::numbers::pi) ph = std::numbers::pi;
        out.phase.push_back(ph);
    }
    if (k.dk_x > 0) out.pixel_x = 2.0 * std::numbers::pi / (k.dk_x * k.nx);
    if (k.dk_y > 0) out.pixel_y = 2.0 * std::numbers::pi / (k.dk_y * k.ny);
    return out;
}

// ---------------------------------------------------------------------------------------------

FitResult cpmg_fit(const std::vector<double>& t, const std::vector<double>& I) {
    const std::size_t n = t.size();
    if (n < 2 || I.size() != n) throw InvalidParameter("fit needs at least two (t, I) pairs");
    const double tmax = *std::max_element(t.begin(), t.end());
    const double tmin = *std::min_element(t.begin(), t.end());
    if (!(tmax > tmin)) throw InvalidParameter("fit needs distinct sample times");

    // Seed: least squares on log I over the positive samples.
    double rho = *std::max_element(I.begin(), I.end()), r = 1.0 / (tmax - tmin);
    {
        double st = 0, sl = 0, stt = 0, stl = 0;
        std::size_t m = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(I[i] > 0)) continue;
            const double l = std::log(I[i]);
            st += t[i];
            sl += l;
            stt += t[i] * t[i];
            stl += t[i] * l;
            ++m;
        }
        const double den = m * stt - st * st;
        if (m >= 2 && den > 0) {
            const double slope = (m * stl - st * sl) / den;
            r = -slope;
            rho = std::exp((sl - slope * st) / m);
        }
    }
    const auto cost = [&](double p, double q) {
        double c = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = p * std::exp(-q * t[i]) - I[i];
            c += d * d;
        }
        return c;
    };
    // Decay over the window below 1e-4 is not observable.
    const auto check_range = [&](double q) {
        if (!(q * tmax > 1e-4) || !std::isfinite(q))
            throw FitDiverged("T2 outside the observable range of the series");
    };
    check_range(r);

    double lambda = 1e-3;
    double c = cost(rho, r);
    FitResult fr;
    for (int it = 1; it <= 100; ++it) {
        fr.iterations = it;
        double a11 = 0, a12 = 0, a22 = 0, g1 = 0, g2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::exp(-r * t[i]);
            const double res = rho * e - I[i];
            const double j1 = e, j2 = -rho * t[i] * e;
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            g1 += j1 * res;
            g2 += j2 * res;
        }
        bool accepted = false;
        double dp = 0, dq = 0;
        for (int tries = 0; tries < 30 && !accepted; ++tries) {
            const double b11 = a11 * (1 + lambda), b22 = a22 * (1 + lambda);
            const double det = b11 * b22 - a12 * a12;
            if (det == 0 || !std::isfinite(det)) {
                lambda *= 10;
                continue;
            }
            dp = -(b22 * g1 - a12 * g2) / det;
            dq = -(b11 * g2 - a12 * g1) / det;
            const double cn = cost(rho + dp, r + dq);
            if (cn <= c) {
                rho += dp;
                r += dq;
                c = cn;
                lambda = std::max(lambda / 10, 1e-12);
                accepted = true;
            } else {
                lambda *= 10;
            }
        }
        const double rel = std::max(std::abs(dp) / std::max(std::abs(rho), 1e-300), std::abs(dq) / std::max(std::abs(r), 1e-300));
        if (!accepted || rel < 1e-10) {
            check_range(r);
            fr.rho = rho;
            fr.t2 = 1.0 / r;
            fr.residual_norm = std::sqrt(c);
            return fr;
        }
    }
    throw FitDiverged("fit did not settle within 100 iterations");
}

// ---------------------------------------------------------------------------------------------

std::vector<unsigned char> window_to_8bit(const std::vector<double>& v, Window w) {
    if (!(w.hi > w.lo)) {
        w.lo = 0;
        w.hi = v.empty() ? 0 : *std::max_element(v.begin(), v.end());
    }
    std::vector<unsigned char> out(v.size(), 0);
    if (!(w.hi > w.lo)) return out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double s = std::clamp((v[i] - w.lo) / (w.hi - w.lo), 0.0, 1.0);
        out[i] = static_cast<unsigned char>(std::lround(255.0 * s));
    }
    return out;
}

namespace {

void put_f64(std::ostream& os, double v) {
    auto u = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    os.write(reinterpret_cast<const char*>(&u), 8);
}

double get_f64(std::istream& is) {
    std::uint64_t u = 0;
    if (!is.read(reinterpret_cast<char*>(&u), 8)) throw IoError("truncated raw grid");
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    return std::bit_cast<double>(u);
}

}  // namespace

Window export_image(const ImageVolume& img, const std::filesystem::path& pgm, Window w) {
    if (!(w.hi > w.lo)) {
        w.lo = 0;
        w.hi = img.magnitude.empty() ? 0 : *std::max_element(img.magnitude.begin(), img.magnitude.end());
    }
    const auto px = window_to_8bit(img.magnitude, w);
    {
        std::ofstream os(pgm, std::ios::binary);
        if (!os) throw IoError("cannot write " + pgm.string());
        os << "P5\n" << img.nx << " " << img.ny << "\n255\n";
        // PGM rows run top to bottom; row ny-1 (largest y) first.
        for (int y = img.ny - 1; y >= 0; --y)
            os.write(reinterpret_cast<const char*>(px.data() + static_cast<std::size_t>(y) * img.nx), img.nx);
    }
    std::filesystem::path raw = pgm;
    raw += ".raw";
    write_raw_grid(raw, img.nx, img.ny, img.magnitude);
    std::filesystem::path side = raw;
    side += ".txt";
    std::ofstream os(side);
    os.precision(17);
    os << "quantity magnitude\nnx " << img.nx << "\nny " << img.ny << "\npixel_x_m " << img.pixel_x << "\npixel_y_m "
       << img.pixel_y << "\nwindow_lo " << w.lo << "\nwindow_hi " << w.hi << "\n";
    return w;
}

void write_raw_grid(const std::filesystem::path& p, int nx, int ny, const std::vector<double>& v) {
    if (v.size() != static_cast<std::size_t>(nx) * ny) throw InvalidParameter("grid size mismatch");
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot write " + p.string());
    os << nx << " " << ny << " dtype=f64\n";
    for (double d : v) put_f64(os, d);
}

void write_raw_grid(const std::filesystem::path& p, int nx, int ny, const std::vector<cplx>& v) {
    if (v.size() != static_cast<std::size_t>(nx) * ny) throw InvalidParameter("grid size mismatch");
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot write " + p.string());
    os << nx << " " << ny << " dtype=c128\n";
    for (const auto& c : v) {
        put_f64(os, c.real());
        put_f64(os, c.imag());
    }
}

RawGrid read_raw_grid(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw IoError("cannot open " + p.string());
    std::string line;
    std::getline(is, line);
    std::istringstream hs(line);
    RawGrid g;
    std::string dt;
    if (!(hs >> g.nx >> g.ny >> dt) || g.nx < 0 || g.ny < 0) throw IoError("bad raw grid header in " + p.string());
    if (dt == "dtype=c128") g.complex = true;
    else if (dt != "dtype=f64") throw IoError("unknown dtype " + dt);
    const std::size_t n = static_cast<std::size_t>(g.nx) * g.ny;
    g.data.resize(n);
    for (auto& c : g.data) {
        const double re = get_f64(is);
        c = {re, g.complex ? get_f64(is) : 0.0};
    }
    return g;
}

}  // namespace mrsim
