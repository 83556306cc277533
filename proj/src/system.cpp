#include "mrsim/system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mrsim/errors.hpp"
#include "textfmt.hpp"

namespace mrsim {

namespace {

constexpr double kMu0 = 4e-7 * std::numbers::pi;

// Cell index and fractional offset along one axis; throws outside [0, n-1].
void locate(double x, double x0, double h, int n, int& i, double& t) {
    if (n == 1) {
        if (std::abs(x - x0) > 1e-9 * std::max(1.0, std::abs(h))) throw OutOfGrid("position outside the grid");
        i = 0;
        t = 0;
        return;
    }
    double u = (x - x0) / h;
    const double tol = 1e-9;
    if (u < -tol || u > (n - 1) + tol) throw OutOfGrid("position outside the grid");
    if (std::abs(u - std::round(u)) < tol) u = std::round(u);
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
    i = std::min(static_cast<int>(std::floor(u)), n - 2);
    t = u - i;
}

}  // namespace

void Grid3::sample(const Vec3& x, double* out) const {
    if (nx < 1 || ny < 1 || nz < 1 || values.size() != static_cast<std::size_t>(nx) * ny * nz * components)
        throw OutOfGrid("grid is empty or inconsistent");
    int i[3];
    double t[3];
    const int n[3] = {nx, ny, nz};
    for (int a = 0; a < 3; ++a) locate(x[a], origin[a], step[a], n[a], i[a], t[a]);
    for (int c = 0; c < components; ++c) out[c] = 0;
    for (int dz = 0; dz < (nz > 1 ? 2 : 1); ++dz)
        for (int dy = 0; dy < (ny > 1 ? 2 : 1); ++dy)
            for (int dx = 0; dx < (nx > 1 ? 2 : 1); ++dx) {
                const double w = (dx ? t[0] : 1 - t[0]) * (dy ? t[1] : 1 - t[1]) * (dz ? t[2] : 1 - t[2]);
                if (w == 0) continue;
                const std::size_t node =
                    (static_cast<std::size_t>(i[2] + dz) * ny + (i[1] + dy)) * nx + (i[0] + dx);
                for (int c = 0; c < components; ++c) out[c] += w * values[node * components + c];
            }
}

double Grid3::scalar(const Vec3& x) const {
    double v[3];
    sample(x, v);
    return v[0];
}

Vec3 Grid3::vector(const Vec3& x) const {
    if (components != 3) throw InvalidParameter("grid does not hold vectors");
    double v[3];
    sample(x, v);
    return {v[0], v[1], v[2]};
}

Grid3 load_grid(const std::filesystem::path& path, int components) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open grid file " + path.string());
    Grid3 g;
    g.components = components;
    if (!(in >> g.nx >> g.ny >> g.nz >> g.origin.x >> g.origin.y >> g.origin.z >> g.step.x >> g.step.y >> g.step.z))
        throw IoError("grid file " + path.string() + ": bad header");
    if (g.nx < 1 || g.ny < 1 || g.nz < 1) throw IoError("grid file " + path.string() + ": bad dimensions");
    const std::size_t n = static_cast<std::size_t>(g.nx) * g.ny * g.nz * components;
    g.values.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        if (!(in >> g.values[k])) throw IoError("grid file " + path.string() + ": too few values");
    return g;
}

void save_grid(const std::filesystem::path& path, const Grid3& g) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write grid file " + path.string());
    out << g.nx << ' ' << g.ny << ' ' << g.nz << ' ' << textfmt::format_double(g.origin.x) << ' '
        << textfmt::format_double(g.origin.y) << ' ' << textfmt::format_double(g.origin.z) << ' '
        << textfmt::format_double(g.step.x) << ' ' << textfmt::format_double(g.step.y) << ' '
        << textfmt::format_double(g.step.z) << '\n';
    for (std::size_t k = 0; k < g.values.size(); ++k)
        out << textfmt::format_double(g.values[k]) << ((k + 1) % g.components ? ' ' : '\n');
}

double legendre_p(int n, double x) {
    if (n == 0) return 1.0;
    double p0 = 1.0, p1 = x;
    for (int k = 1; k < n; ++k) {
        const double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

FrameContext SystemModel::frame(double gamma) const {
    return {omega_hf_set ? omega_hf : gamma * field.b0, gamma};
}

double delta_b0(const StaticField& f, const Vec3& x) {
    switch (f.kind) {
        case Inhomogeneity::none:
            return 0.0;
        case Inhomogeneity::legendre12: {
            const double r = norm(x);
            if (r == 0) return 0.0;
            const double q = r / f.r;
            const double q2 = q * q, q4 = q2 * q2, q8 = q4 * q4;
            return -f.c * (q8 * q4) * legendre_p(12, x.z / r);
        }
        case Inhomogeneity::grid:
            return f.grid.scalar(x);
    }
    return 0.0;
}

double spin_off_resonance(const StaticField& f, const Vec3& x, double object_delta_omega, const FrameContext& ctx) {
    return (ctx.gamma * f.b0 - ctx.omega_hf) + ctx.gamma * delta_b0(f, x) + object_delta_omega;
}

Vec3 loop_field(const Vec3& center, const Vec3& normal, double diameter, const Vec3& x, int n_quad) {
    const Vec3 n = normal / norm(normal);
    // any vector not parallel to n
    const Vec3 helper = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    Vec3 e1 = cross(n, helper);
    e1 = e1 / norm(e1);
    const Vec3 e2 = cross(n, e1);
    const double r = 0.5 * diameter;
    const double dphi = 2.0 * std::numbers::pi / n_quad;
    Vec3 b{};
    for (int k = 0; k < n_quad; ++k) {
        const double phi = (k + 0.5) * dphi;
        const double c = std::cos(phi), s = std::sin(phi);
        const Vec3 l = center + (e1 * c + e2 * s) * r;
        const Vec3 dl = (e2 * c - e1 * s) * (r * dphi);
        const Vec3 d = x - l;
        const double dn = norm(d);
        b += cross(dl, d) / (dn * dn * dn);
    }
    return b * (kMu0 / (4.0 * std::numbers::pi));
}

Vec3 loop_field_converged(const Vec3& center, const Vec3& normal, double diameter, const Vec3& x, double rel_tol) {
    int n = 64;
    Vec3 prev = loop_field(center, normal, diameter, x, n);
    for (int it = 0; it < 14; ++it) {
        n *= 2;
        Vec3 cur = loop_field(center, normal, diameter, x, n);
        if (norm(cur - prev) <= rel_tol * norm(cur)) return cur;
        prev = cur;
    }
    return prev;
}

Vec3 coil_weight(const ReceiveSensitivity& s, const Vec3& x) {
    switch (s.model) {
        case CoilModel::uniform:
            return {s.s, 0.0, 0.0};
        case CoilModel::grid:
            return s.grid.vector(x);
        case CoilModel::loop:
            return loop_field_converged(s.center, s.normal, s.diameter, x, 1e-10);
    }
    return {};
}

cplx receive_weight(const ReceiveSensitivity& s, const Vec3& x) {
    const Vec3 w = coil_weight(s, x);
    return {w.x, -w.y};
}

double max_field_gradient(const StaticField& f, const Vec3& lo, const Vec3& hi, int n) {
    if (f.kind == Inhomogeneity::none) return 0.0;
    double best = 0.0;
    Vec3 h;
    int cnt[3];
    for (int a = 0; a < 3; ++a) {
        const double ext = hi[a] - lo[a];
        cnt[a] = ext > 0 ? n : 1;
        h[a] = ext > 0 ? 1e-4 * ext : 1e-6;
    }
    for (int k = 0; k < cnt[2]; ++k)
        for (int j = 0; j < cnt[1]; ++j)
            for (int i = 0; i < cnt[0]; ++i) {
                const int idx[3] = {i, j, k};
                Vec3 x;
                for (int a = 0; a < 3; ++a)
                    x[a] = cnt[a] > 1 ? lo[a] + (hi[a] - lo[a]) * idx[a] / (cnt[a] - 1) : lo[a];
                Vec3 g;
                for (int a = 0; a < 3; ++a) {
                    Vec3 xp = x, xm = x;
                    xp[a] += h[a];
                    xm[a] -= h[a];
                    try {
                        g[a] = (delta_b0(f, xp) - delta_b0(f, xm)) / (2 * h[a]);
                    } catch (const OutOfGrid&) {
                        g[a] = 0.0;  // one-sided lattice edge of a sampled map
                    }
                }
                best = std::max(best, norm(g));
            }
    return best;
}

// ---------------------------------------------------------------------------------------------

SystemModel parse_system_file(std::string_view text, const std::filesystem::path& base) {
    using namespace textfmt;
    SystemModel sys;
    const auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_relative() ? base / path : path;
    };
    for (const auto& b : parse_blocks(text)) {
        if (b.name == "static_field") {
            for (const auto& en : b.entries) {
                if (en.key == "b0_T") {
                    sys.field.b0 = to_double(en.value, en.line, en.value_col);
                } else if (en.key == "omega_hf_rad_s") {
                    sys.omega_hf = to_double(en.value, en.line, en.value_col);
                    sys.omega_hf_set = true;
                } else if (en.key == "inhomogeneity") {
                    const Options o = split_options(en);
                    if (o.head == "none") {
                        sys.field.kind = Inhomogeneity::none;
                    } else if (o.head == "legendre12") {
                        sys.field.kind = Inhomogeneity::legendre12;
                        bool c = false, r = false;
                        for (const auto& op : o.opts) {
                            if (op.key == "C_uT") {
                                sys.field.c = to_double(op.value, op.line, op.value_col) * 1e-6;
                                c = true;
                            } else if (op.key == "R_m") {
                                sys.field.r = to_double(op.value, op.line, op.value_col);
                                r = true;
                            } else {
                                unknown_key(op, {"C_uT", "R_m"});
                            }
                        }
                        if (!c || !r) throw ParseError("legendre12 needs C_uT and R_m", en.line, en.value_col);
                        if (sys.field.c < 0 || !(sys.field.r > 0))
                            throw ParseError("legendre12 needs C >= 0 and R > 0", en.line, en.value_col);
                    } else if (o.head == "grid") {
                        sys.field.kind = Inhomogeneity::grid;
                        if (o.opts.size() != 1 || o.opts[0].key != "file")
                            throw ParseError("grid inhomogeneity needs file=<path>", en.line, en.value_col);
                        sys.field.grid = load_grid(resolve(o.opts[0].value), 1);
                    } else {
                        throw ParseError("inhomogeneity must be none, legendre12 or grid", en.line, en.value_col);
                    }
                } else {
                    unknown_key(en, {"b0_T", "omega_hf_rad_s", "inhomogeneity"});
                }
            }
        } else if (b.name == "receive") {
            for (const auto& en : b.entries) {
                if (en.key != "model") unknown_key(en, {"model"});
                const Options o = split_options(en);
                auto& r = sys.receive;
                if (o.head == "uniform") {
                    r.model = CoilModel::uniform;
                    for (const auto& op : o.opts) {
                        if (op.key == "S") r.s = to_double(op.value, op.line, op.value_col);
                        else throw ParseError("unknown uniform option '" + op.key + "'", op.line, op.key_col);
                    }
                } else if (o.head == "loop") {
                    r.model = CoilModel::loop;
                    for (const auto& op : o.opts) {
                        if (op.key == "center_m") r.center = to_vec3(op.value, op.line, op.value_col);
                        else if (op.key == "normal") r.normal = to_vec3(op.value, op.line, op.value_col);
                        else if (op.key == "diameter_m") r.diameter = to_double(op.value, op.line, op.value_col);
                        else unknown_key(op, {"center_m", "normal", "diameter_m"});
                    }
                    if (!(r.diameter > 0) || norm(r.normal) == 0)
                        throw ParseError("loop needs a positive diameter and a nonzero normal", en.line, en.value_col);
                } else if (o.head == "grid") {
                    r.model = CoilModel::grid;
                    if (o.opts.size() != 1 || o.opts[0].key != "file")
                        throw ParseError("grid receive model needs file=<path>", en.line, en.value_col);
                    r.grid = load_grid(resolve(o.opts[0].value), 3);
                } else {
                    throw ParseError("receive model must be uniform, loop or grid", en.line, en.value_col);
                }
            }
        } else {
            throw ParseError("unknown block [" + b.name + "]", b.line, 1);
        }
    }
    return sys;
}

SystemModel load_system(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open system file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_system_file(ss.str(), path.parent_path());
}

}  // namespace mrsim
