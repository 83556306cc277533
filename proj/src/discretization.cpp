#include "mrsim/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "mrsim/errors.hpp"

namespace mrsim {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(double v) {
    if (std::isinf(v)) return "inf";
    char b[64];
    std::snprintf(b, sizeof b, "%.9g", v);
    return b;
}

}  // namespace

SpacingReport max_spacing(const Sequence& seq, const SystemModel& sys, const SpacingOptions& opt) {
    if (!(opt.safety > 0 && opt.safety <= 1)) throw InvalidParameter("safety factor must be in (0, 1]");
    if (opt.readout_axis < 0 || opt.readout_axis > 2) throw InvalidParameter("readout axis must be 0, 1 or 2");
    const double total = seq.total_duration();
    if (!std::isfinite(total)) throw InvalidParameter("sequence duration must be finite");

    SpacingReport r;
    r.safety = opt.safety;
    bool exact = true;
    derive_unit_k_or_fallback(seq, exact, opt.gamma);
    r.exact_k = exact;
    const QualitativeResult q = trace_qualitative(seq, {}, opt.gamma);
    r.k_max = q.k_max;
    r.max_transverse_age = q.max_transverse_age;

    double grad = 0;  // T/m
    if (opt.phantom && sys.field.kind != Inhomogeneity::none) {
        auto [lo, hi] = opt.phantom->bounds();
        grad = max_field_gradient(sys.field, lo, hi);
    }
    r.margin[opt.readout_axis] = (opt.gamma * grad + opt.object_delta_omega_gradient) * q.max_transverse_age;

    for (int a = 0; a < 3; ++a) {
        const double k = r.k_max[a] + r.margin[a];
        r.dx_max[a] = k > 0 ? kPi / k : kUnbounded;
        r.spacing[a] = k > 0 ? opt.safety * r.dx_max[a] : kUnbounded;
    }
    if (opt.phantom) r.predicted_spins = count_spins(*opt.phantom, r.spacing);
    return r;
}

std::string SpacingReport::to_text() const {
    std::ostringstream os;
    const char* ax = "xyz";
    os << "K-t excursion " << (exact_k ? "(exact unit)" : "(fallback unit)") << "\n";
    for (int a = 0; a < 3; ++a) {
        os << "  " << ax[a] << ": K_max " << fmt(k_max[a]) << " rad/m, margin " << fmt(margin[a]) << " rad/m, ";
        if (std::isinf(dx_max[a]))
            os << "no k motion, one spin per axis suffices\n";
        else
            os << "dx_max " << fmt(dx_max[a]) << " m, spacing " << fmt(spacing[a]) << " m\n";
    }
    os << "  longest transverse lifetime " << fmt(max_transverse_age) << " s\n";
    if (predicted_spins) os << "  predicted spins " << predicted_spins << "\n";
    if (!pruned.empty()) os << "  pruned configurations " << pruned.size() << "\n";
    return os.str();
}

std::string SpacingReport::to_key_values() const {
    std::ostringstream os;
    const char* ax = "xyz";
    for (int a = 0; a < 3; ++a) {
        os << "k_max_" << ax[a] << "=" << fmt(k_max[a]) << "\n";
        os << "margin_" << ax[a] << "=" << fmt(margin[a]) << "\n";
        os << "dx_max_" << ax[a] << "=" << fmt(dx_max[a]) << "\n";
        os << "spacing_" << ax[a] << "=" << fmt(spacing[a]) << "\n";
    }
    os << "safety=" << fmt(safety) << "\n";
    os << "exact_k=" << (exact_k ? 1 : 0) << "\n";
    os << "max_transverse_age_s=" << fmt(max_transverse_age) << "\n";
    os << "predicted_spins=" << predicted_spins << "\n";
    os << "pruned_count=" << pruned.size() << "\n";
    return os.str();
}

PruneResult steady_state_prune(const std::vector<TraceRow>& trace, int grayscale_levels, int axis) {
    if (grayscale_levels < 1) throw InvalidParameter("grayscale levels must be >= 1");
    const double drho = 1.0 / grayscale_levels;
    std::map<double, std::vector<const TraceRow*>> by_time;
    for (const auto& row : trace)
        if (row.kind == ConfigKind::transversal) by_time[row.time_s].push_back(&row);
    PruneResult res;
    std::set<Order> dropped;
    for (auto& [t, rows] : by_time) {
        double amax = 0;
        for (const auto* r : rows) {
            amax = std::max(amax, std::abs(r->population));
            res.k_unpruned = std::max(res.k_unpruned, std::abs(r->k[axis]));
        }
        std::sort(rows.begin(), rows.end(),
                  [axis](const TraceRow* a, const TraceRow* b) { return std::abs(a->k[axis]) > std::abs(b->k[axis]); });
        // Drop from the outside in while the dropped sum stays within the bound; ties in |k| go together.
        const double bound = 0.5 * drho * amax;
        double acc = 0;
        std::size_t keep_from = 0;
        std::size_t i = 0;
        while (i < rows.size()) {
            std::size_t j = i;
            double group = 0;
            const double kk = std::abs(rows[i]->k[axis]);
            while (j < rows.size() && std::abs(rows[j]->k[axis]) == kk) group += std::abs(rows[j++]->population);
            if (acc + group > bound) break;
            acc += group;
            i = j;
            keep_from = j;
        }
        for (std::size_t d = 0; d < keep_from; ++d) dropped.insert(rows[d]->order);
        if (keep_from < rows.size()) res.k_pruned = std::max(res.k_pruned, std::abs(rows[keep_from]->k[axis]));
    }
    res.dropped.assign(dropped.begin(), dropped.end());
    return res;
}

AcqParams acquisition_params(AcqParams p, double gamma) {
    if (p.n < 2) throw InvalidParameter("a readout needs at least 2 samples");
    const int missing = (p.fov_m == 0) + (p.dt_s == 0) + (p.gradient_T_per_m == 0);
    if (missing != 1) throw InvalidParameter("exactly one of fov, dt, gradient must be 0");
    if (p.fov_m < 0 || p.dt_s < 0 || p.gradient_T_per_m < 0) throw InvalidParameter("values must be positive");
    const double span = 2.0 * kPi * (p.n - 1);  // gamma*G*dt*FOV
    if (p.fov_m == 0) p.fov_m = span / (gamma * p.gradient_T_per_m * p.dt_s);
    else if (p.dt_s == 0) p.dt_s = span / (gamma * p.gradient_T_per_m * p.fov_m);
    else p.gradient_T_per_m = span / (gamma * p.dt_s * p.fov_m);
    return p;
}

RfSamplingReport rf_sampling_check(std::span<const cplx> envelope, double per_sample_dt, double gz, double fov,
                                   double gamma, double bw_override) {
    if (!(per_sample_dt > 0)) throw InvalidParameter("per-sample dt must be positive");
    if (!(fov > 0)) throw InvalidParameter("fov must be positive");
    if (envelope.empty()) throw InvalidParameter("empty envelope");
    RfSamplingReport r;
    r.omega_max = gamma * std::abs(gz) * fov / 2.0;
    if (bw_override > 0) {
        r.bandwidth_rad_s = bw_override;
    } else {
        // Zero-padded direct DFT; smallest symmetric band holding 99% of the energy.
        const std::size_t n = envelope.size();
        const std::size_t m = 8 * n;
        std::vector<double> p(m);
        double tot = 0;
        for (std::size_t k = 0; k < m; ++k) {
            cplx s{};
            for (std::size_t i = 0; i < n; ++i) s += envelope[i] * std::polar(1.0, -2.0 * kPi * double(k * i % m) / m);
            p[k] = std::norm(s);
            tot += p[k];
        }
        if (tot == 0) {
            r.bandwidth_rad_s = 0;
        } else {
            double acc = p[0];
            std::size_t h = 0;
            while (acc < 0.99 * tot && h < m / 2) {
                ++h;
                acc += p[h] + (m - h != h ? p[m - h] : 0.0);
            }
            r.bandwidth_rad_s = 2.0 * (2.0 * kPi * h / (m * per_sample_dt));
        }
    }
    const double denom = r.omega_max + r.bandwidth_rad_s / 2.0;
    const double duration = per_sample_dt * envelope.size();
    if (denom == 0) {
        r.max_sample_dt = kUnbounded;
        r.pass = true;
        r.required_n = 1;
        return r;
    }
    r.max_sample_dt = kPi / denom;
    r.pass = per_sample_dt <= r.max_sample_dt * (1 + 1e-12);
    r.required_n = std::max(1, static_cast<int>(std::ceil(duration / r.max_sample_dt * (1 - 1e-12))));
    return r;
}

}  // namespace mrsim
