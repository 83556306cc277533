#include "mrsim/kt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "mrsim/errors.hpp"

namespace mrsim {

namespace {

Order neg(const Order& o) { return {-o[0], -o[1], -o[2]}; }
Order add(const Order& a, const Order& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
bool is_origin(const Order& o) { return o[0] == 0 && o[1] == 0 && o[2] == 0; }

struct RfMatrix {
    cplx r11, r12, r13, r31, r32, r33;
};

// Acts on (a_i, conj(a_{-i}), b_i); rows 1 and 3 suffice, row 2 is the conjugate mirror of row 1.
RfMatrix rf_matrix(const HardPulse& p) {
    const double ch = std::cos(0.5 * p.alpha), sh = std::sin(0.5 * p.alpha);
    const double sa = std::sin(p.alpha), ca = std::cos(p.alpha);
    const cplx j{0.0, 1.0};
    RfMatrix m;
    m.r11 = ch * ch;
    m.r12 = sh * sh * std::polar(1.0, 2.0 * p.phi);
    m.r13 = j * sa * std::polar(1.0, p.phi);
    m.r31 = 0.5 * j * sa * std::polar(1.0, -p.phi);
    m.r32 = std::conj(m.r31);
    m.r33 = ca;
    return m;
}

bool rational_approx(double r, std::int64_t max_den, double tol, std::int64_t& p, std::int64_t& q) {
    std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double x = r;
    for (int it = 0; it < 64; ++it) {
        const double a = std::floor(x);
        if (a > 9e15) break;
        const auto ai = static_cast<std::int64_t>(a);
        const std::int64_t h2 = ai * h1 + h0, k2 = ai * k1 + k0;
        if (k2 > max_den) break;
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        if (std::abs(r - static_cast<double>(h1) / k1) <= tol * r) {
            p = h1;
            q = k1;
            return true;
        }
        const double frac = x - a;
        if (frac < 1e-300) break;
        x = 1.0 / frac;
    }
    return false;
}

constexpr std::int64_t kMaxDen = 1'000'000;
constexpr double kUnitTol = 1e-9;

double unit_for_axis(const std::vector<double>& vals) {
    double vmax = 0;
    for (double v : vals) vmax = std::max(vmax, std::abs(v));
    if (vmax == 0) return 0.0;
    std::vector<double> nz;
    for (double v : vals)
        if (std::abs(v) > 1e-12 * vmax) nz.push_back(std::abs(v));
    const double base = *std::min_element(nz.begin(), nz.end());
    std::int64_t lcm = 1;
    std::vector<std::pair<std::int64_t, std::int64_t>> fr;
    for (double v : nz) {
        std::int64_t p = 0, q = 0;
        if (!rational_approx(v / base, kMaxDen, kUnitTol, p, q))
            throw IncommensurateMoments("gradient moments have no common measure; use the spin engine");
        fr.emplace_back(p, q);
        lcm = std::lcm(lcm, q);
        if (lcm > kMaxDen) throw IncommensurateMoments("common measure needs a denominator above 1e6");
    }
    std::int64_t g = 0;
    for (auto [p, q] : fr) g = std::gcd(g, p * (lcm / q));
    return base * static_cast<double>(g) / static_cast<double>(lcm);
}

}  // namespace

ConfigurationSet ConfigurationSet::equilibrium(const Vec3& dk, double m0, double prune_rel) {
    ConfigurationSet s;
    s.dk = dk;
    s.m0 = m0;
    s.prune_abs = prune_rel * m0;
    s.longitudinal[{0, 0, 0}] = m0;
    return s;
}

std::vector<Configuration> ConfigurationSet::configurations() const {
    std::vector<Configuration> out;
    for (const auto& [o, a] : transverse) out.push_back({ConfigKind::transversal, o, a, k_of(o)});
    for (const auto& [o, b] : longitudinal) out.push_back({ConfigKind::longitudinal, o, b, k_of(o)});
    return out;
}

Vec3 derive_unit_k(const std::vector<Vec3>& moments) {
    Vec3 dk;
    for (int a = 0; a < 3; ++a) {
        std::vector<double> v;
        for (const auto& m : moments) v.push_back(m[a]);
        dk[a] = unit_for_axis(v);
    }
    return dk;
}

Vec3 derive_unit_k(const Sequence& seq, double gamma) {
    std::vector<Vec3> m;
    for (const auto& e : seq.elements) m.push_back(e.k_moment(gamma));
    return derive_unit_k(m);
}

Vec3 derive_unit_k_or_fallback(const Sequence& seq, bool& exact, double gamma) {
    try {
        exact = true;
        return derive_unit_k(seq, gamma);
    } catch (const IncommensurateMoments&) {
        exact = false;
    }
    Vec3 dk;
    for (int a = 0; a < 3; ++a) {
        double mn = 0;
        for (const auto& e : seq.elements) {
            const double v = std::abs(e.k_moment(gamma)[a]);
            if (v > 0 && (mn == 0 || v < mn)) mn = v;
        }
        dk[a] = mn / 1024.0;
    }
    return dk;
}

Order moment_in_units(const Vec3& moment, const Vec3& dk) {
    Order q{};
    for (int a = 0; a < 3; ++a) {
        if (dk[a] == 0) {
            q[a] = 0;
            continue;
        }
        q[a] = std::llround(moment[a] / dk[a]);
    }
    return q;
}

ConfigurationSet apply_rf_split(const ConfigurationSet& set, const HardPulse& p) {
    if (std::fmod(p.alpha, 2.0 * std::numbers::pi) == 0.0) return set;
    const RfMatrix m = rf_matrix(p);
    std::set<Order> keys;
    for (const auto& [o, a] : set.transverse) {
        keys.insert(o);
        keys.insert(neg(o));
    }
    for (const auto& [o, b] : set.longitudinal) {
        keys.insert(o);
        keys.insert(neg(o));
    }
    ConfigurationSet out;
    out.dk = set.dk;
    out.m0 = set.m0;
    out.prune_abs = set.prune_abs;
    const auto get = [](const std::map<Order, cplx>& mp, const Order& o) {
        auto it = mp.find(o);
        return it == mp.end() ? cplx{} : it->second;
    };
    for (const Order& o : keys) {
        const cplx a = get(set.transverse, o);
        const cplx ac = std::conj(get(set.transverse, neg(o)));
        const cplx b = get(set.longitudinal, o);
        const cplx an = m.r11 * a + m.r12 * ac + m.r13 * b;
        cplx bn = m.r31 * a + m.r32 * ac + m.r33 * b;
        if (is_origin(o)) bn = {bn.real(), 0.0};  // Mz at order 0 is real by construction
        if (std::abs(an) >= set.prune_abs) out.transverse[o] = an;
        if (std::abs(bn) >= set.prune_abs) out.longitudinal[o] = bn;
    }
    return out;
}

ConfigurationSet apply_relax_interval(const ConfigurationSet& set, const RelaxationParams& r, double dt,
                                      double domega) {
    if (dt == 0.0) return set;
    ConfigurationSet out = set;
    const double e1 = std::exp(-dt / r.t1), e2 = std::exp(-dt / r.t2);
    const cplx ft = e2 * std::polar(1.0, -domega * dt);
    for (auto it = out.transverse.begin(); it != out.transverse.end();) {
        it->second *= ft;
        it = std::abs(it->second) < out.prune_abs ? out.transverse.erase(it) : std::next(it);
    }
    for (auto it = out.longitudinal.begin(); it != out.longitudinal.end();) {
        it->second *= e1;
        if (is_origin(it->first)) it->second += r.m0 * (1.0 - e1);
        it = std::abs(it->second) < out.prune_abs ? out.longitudinal.erase(it) : std::next(it);
    }
    if (!out.longitudinal.count({0, 0, 0}) && r.m0 * (1.0 - e1) >= out.prune_abs)
        out.longitudinal[{0, 0, 0}] = r.m0 * (1.0 - e1);
    return out;
}

ConfigurationSet apply_gradient_shift(const ConfigurationSet& set, const Order& q) {
    if (is_origin(q)) return set;
    ConfigurationSet out;
    out.dk = set.dk;
    out.m0 = set.m0;
    out.prune_abs = set.prune_abs;
    out.longitudinal = set.longitudinal;
    for (const auto& [o, a] : set.transverse) out.transverse[add(o, q)] += a;
    return out;
}

cplx synthesize_echo(const ConfigurationSet& set, const Spectrum& spectrum, const Vec3& k_extra) {
    cplx s{};
    for (const auto& [o, a] : set.transverse) s += a * spectrum(set.k_of(o) + k_extra);
    return s;
}

Spectrum lattice_spectrum(std::vector<Vec3> positions) {
    return [pos = std::move(positions)](const Vec3& k) {
        cplx s{};
        for (const auto& x : pos) s += std::polar(1.0, -dot(k, x));
        return s / static_cast<double>(pos.size());
    };
}

Spectrum box_spectrum(const Vec3& center, const Vec3& size) {
    return [center, size](const Vec3& k) {
        double mag = 1.0;
        for (int a = 0; a < 3; ++a) {
            const double u = 0.5 * k[a] * size[a];
            mag *= u == 0.0 ? 1.0 : std::sin(u) / u;
        }
        return std::polar(mag, -dot(k, center));
    };
}

namespace {

void trace_set(std::vector<TraceRow>& tr, double t, const ConfigurationSet& s, const Vec3& k_extra) {
    for (const auto& [o, a] : s.transverse) tr.push_back({t, ConfigKind::transversal, o, s.k_of(o) + k_extra, a});
    for (const auto& [o, b] : s.longitudinal) tr.push_back({t, ConfigKind::longitudinal, o, s.k_of(o), b});
}

}  // namespace

KtResult run_kt(const Sequence& seq, const RelaxationParams& tissue, const Spectrum& spectrum, const KtRunOptions& opt,
                double gamma) {
    KtResult res;
    bool exact = true;
    res.dk = derive_unit_k_or_fallback(seq, exact, gamma);
    ConfigurationSet set = ConfigurationSet::equilibrium(res.dk, tissue.m0, opt.prune_rel);
    double t = 0;
    if (opt.record_trace) trace_set(res.trace, t, set, {});
    for (const auto& e : seq.elements) {
        if (e.has_pulse()) {
            set = apply_rf_split(set, e.pulse());
            if (opt.record_trace) trace_set(res.trace, t, set, {});
        }
        if (e.acquisition.enabled) {
            std::vector<cplx> samples(e.acquisition.n_samples);
            for (int i = 0; i < e.acquisition.n_samples; ++i) {
                const double ti = e.acquisition.sample_time(i, e.duration_s);
                const Vec3 kx = e.k_moment_until(ti, gamma);
                const cplx f = std::exp(-ti / tissue.t2) * std::polar(1.0, -opt.domega * ti);
                samples[i] = f * synthesize_echo(set, spectrum, kx);
                if (opt.record_trace && opt.trace_samples) {
                    for (const auto& [o, a] : set.transverse)
                        res.trace.push_back({t + ti, ConfigKind::transversal, o, set.k_of(o) + kx, a * f});
                }
            }
            res.echoes.push_back(std::move(samples));
        }
        const Vec3 mom = e.k_moment(gamma);
        const Order q = moment_in_units(mom, res.dk);
        set = apply_gradient_shift(set, q);
        set = apply_relax_interval(set, tissue, e.duration_s, opt.domega);
        t += e.duration_s;
        if (opt.record_trace && (e.duration_s > 0 || !is_origin(q))) trace_set(res.trace, t, set, {});
    }
    res.final_state = std::move(set);
    return res;
}

// ---------------------------------------------------------------------------------------------

namespace {

struct Age {
    double young = 0;  // youngest contributing pathway, for lifetime cutoffs
    double old = 0;    // oldest contributing pathway, for the off-resonance margin
};

void merge(std::map<Order, Age>& m, const Order& o, const Age& a) {
    auto [it, inserted] = m.try_emplace(o, a);
    if (!inserted) {
        it->second.young = std::min(it->second.young, a.young);
        it->second.old = std::max(it->second.old, a.old);
    }
}

}  // namespace

QualitativeResult trace_qualitative(const Sequence& seq, const QualitativeOptions& opt, double gamma) {
    QualitativeResult res;
    bool exact = true;
    res.dk = derive_unit_k_or_fallback(seq, exact, gamma);
    const Vec3 dk = res.dk;
    const auto k_of = [&](const Order& o) { return Vec3{o[0] * dk.x, o[1] * dk.y, o[2] * dk.z}; };
    std::map<Order, Age> T, L;
    L[{0, 0, 0}] = {};
    double t = 0;
    const auto trace = [&](double time, const Vec3& extra) {
        if (!opt.record_trace) return;
        for (const auto& [o, a] : T) res.trace.push_back({time, ConfigKind::transversal, o, k_of(o) + extra, 1.0});
        for (const auto& [o, a] : L) res.trace.push_back({time, ConfigKind::longitudinal, o, k_of(o), 1.0});
    };
    trace(0, {});
    constexpr double eps = 1e-12;
    for (const auto& e : seq.elements) {
        if (e.has_pulse()) {
            const RfMatrix m = rf_matrix(e.pulse());
            const bool n11 = std::abs(m.r11) > eps, n12 = std::abs(m.r12) > eps, n13 = std::abs(m.r13) > eps;
            const bool n31 = std::abs(m.r31) > eps, n33 = std::abs(m.r33) > eps;
            std::map<Order, Age> T2, L2;
            for (const auto& [o, a] : T) {
                if (n11) merge(T2, o, a);
                if (n12) merge(T2, neg(o), a);
                if (n31) {
                    merge(L2, o, {0, 0});
                    merge(L2, neg(o), {0, 0});
                }
            }
            for (const auto& [o, a] : L) {
                if (n13) merge(T2, o, {0, 0});
                if (n33) merge(L2, o, a);
            }
            T.swap(T2);
            L.swap(L2);
            res.transverse_count_after_pulse.push_back(T.size());
            res.max_transverse_count = std::max(res.max_transverse_count, T.size());
            trace(t, {});
        }
        // k excursion during the element
        std::vector<double> probe{0.0, e.duration_s};
        if (!e.gradient.is_monotone())
            for (int i = 1; i < 64; ++i) probe.push_back(e.duration_s * i / 64.0);
        if (e.acquisition.enabled)
            for (int i = 0; i < e.acquisition.n_samples; ++i) probe.push_back(e.acquisition.sample_time(i, e.duration_s));
        for (double tp : probe) {
            const Vec3 extra = e.k_moment_until(tp, gamma);
            for (const auto& [o, a] : T) {
                const Vec3 k = k_of(o) + extra;
                for (int ax = 0; ax < 3; ++ax) res.k_max[ax] = std::max(res.k_max[ax], std::abs(k[ax]));
            }
        }
        const Order q = moment_in_units(e.k_moment(gamma), dk);
        if (!is_origin(q)) {
            std::map<Order, Age> T2;
            for (const auto& [o, a] : T) merge(T2, add(o, q), a);
            T.swap(T2);
        }
        const double dt = e.duration_s;
        if (dt > 0) {
            for (auto it = T.begin(); it != T.end();) {
                it->second.young += dt;
                it->second.old += dt;
                res.max_transverse_age = std::max(res.max_transverse_age, it->second.old);
                it = it->second.young > opt.transverse_lifetime ? T.erase(it) : std::next(it);
            }
            for (auto it = L.begin(); it != L.end();) {
                it->second.young += dt;
                it->second.old += dt;
                const bool drop = !is_origin(it->first) && it->second.young > opt.longitudinal_lifetime;
                it = drop ? L.erase(it) : std::next(it);
            }
            L.try_emplace({0, 0, 0}, Age{});  // recovery regrows Z0
        }
        t += dt;
        if (dt > 0 || !is_origin(q)) trace(t, {});
    }
    return res;
}

Vec3 max_k_excursion(const Sequence& seq, const Vec3& margins, double gamma) {
    return trace_qualitative(seq, {}, gamma).k_max + margins;
}

void export_kt_diagram(std::ostream& os, const std::vector<TraceRow>& trace) {
    os << "time_s,kind,order_i,kx_rad_per_m,pop_re,pop_im\n";
    char buf[256];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "%.12g,%s,%lld,%.12g,%.12g,%.12g\n", r.time_s,
                      r.kind == ConfigKind::transversal ? "transversal" : "longitudinal",
                      static_cast<long long>(r.order[0]), r.k.x, r.population.real(), r.population.imag());
        os << buf;
    }
}

ConfigurationSet prune_for_grayscale(const ConfigurationSet& set, double delta_rho) {
    ConfigurationSet out = set;
    if (set.transverse.empty()) return out;
    std::vector<std::pair<double, Order>> by_k;
    double ref = 0;
    for (const auto& [o, a] : set.transverse) {
        by_k.emplace_back(norm(set.k_of(o)), o);
        ref = std::max(ref, std::abs(a));
    }
    std::sort(by_k.begin(), by_k.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double acc = 0;
    for (const auto& [kn, o] : by_k) {
        acc += std::abs(set.transverse.at(o));
        if (acc > 0.5 * delta_rho * ref) break;
        out.transverse.erase(o);
    }
    return out;
}

}  // namespace mrsim
