#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <vector>

#include "mrsim/bloch.hpp"
#include "mrsim/sequence.hpp"
#include "mrsim/vec3.hpp"

namespace mrsim {

using Order = std::array<std::int64_t, 3>;

enum class ConfigKind { transversal, longitudinal };

struct Configuration {
    ConfigKind kind;
    Order order;
    cplx population;
    Vec3 k_position;  // rad/m
};

// Transverse E_i and longitudinal Z_i populations of Mxy(x) = sum a_i exp(-j k_i.x), Mz(x) = sum b_i exp(-j k_i.x)
// with k_i = i*dk. Both signs of longitudinal orders are stored; b_{-i} = conj(b_i).
struct ConfigurationSet {
    Vec3 dk{};          // rad/m per unit order; 0 on axes without gradient moments
    double m0 = 1.0;
    double prune_abs = 1e-12;  // populations below this are dropped
    std::map<Order, cplx> transverse;
    std::map<Order, cplx> longitudinal;

    static ConfigurationSet equilibrium(const Vec3& dk, double m0, double prune_rel = 1e-12);
    Vec3 k_of(const Order& o) const { return {o[0] * dk.x, o[1] * dk.y, o[2] * dk.z}; }
    std::vector<Configuration> configurations() const;
};

// Per-axis common measure of all nonzero element moments. Axes without moments get 0.
// Throws IncommensurateMoments when no measure with denominator <= 1e6 fits within 1e-9.
Vec3 derive_unit_k(const Sequence& seq, double gamma = kGamma);
Vec3 derive_unit_k(const std::vector<Vec3>& moments);
// Falls back to min|moment|/1024 per axis when the moments are incommensurate. exact reports which path was used.
Vec3 derive_unit_k_or_fallback(const Sequence& seq, bool& exact, double gamma = kGamma);
// Moment in units of dk, rounded.
Order moment_in_units(const Vec3& moment, const Vec3& dk);

ConfigurationSet apply_rf_split(const ConfigurationSet& set, const HardPulse& p);
// Relaxation over dt; domega applies a uniform off-resonance rotation to all transverse populations.
ConfigurationSet apply_relax_interval(const ConfigurationSet& set, const RelaxationParams& r, double dt,
                                      double domega = 0.0);
ConfigurationSet apply_gradient_shift(const ConfigurationSet& set, const Order& q);

using Spectrum = std::function<cplx(const Vec3& k)>;
// sum_i a_i S(k_i + k_extra)
cplx synthesize_echo(const ConfigurationSet& set, const Spectrum& spectrum, const Vec3& k_extra = {});

// Spectrum of a spin lattice with the spin engine's normalization: mean of exp(-j k.x).
Spectrum lattice_spectrum(std::vector<Vec3> positions);
// Analytic spectrum of a uniform box of unit density normalized to S(0) = 1.
Spectrum box_spectrum(const Vec3& center, const Vec3& size);

struct TraceRow {
    double time_s;
    ConfigKind kind;
    Order order;
    Vec3 k;
    cplx population;
};

struct KtRunOptions {
    double prune_rel = 1e-12;
    double domega = 0.0;
    bool record_trace = false;
    // Acquisition sample times are also recorded when tracing.
    bool trace_samples = false;
};

struct KtResult {
    Vec3 dk{};
    std::vector<std::vector<cplx>> echoes;  // per acquisition
    std::vector<TraceRow> trace;
    ConfigurationSet final_state;
};

KtResult run_kt(const Sequence& seq, const RelaxationParams& tissue, const Spectrum& spectrum,
                const KtRunOptions& opt = {}, double gamma = kGamma);

// Reachable configurations when every nonzero matrix coefficient is taken to split.
struct QualitativeOptions {
    double transverse_lifetime = 1e300;    // drop transverse pathways older than this
    double longitudinal_lifetime = 1e300;  // drop stored (i != 0) pathways older than this
    bool record_trace = false;
};

struct QualitativeResult {
    Vec3 dk{};
    Vec3 k_max{};                 // per-axis max |k| over all transverse configurations and times
    double max_transverse_age = 0;  // longest continuous transverse lifetime seen
    std::size_t max_transverse_count = 0;
    std::vector<std::size_t> transverse_count_after_pulse;  // per element with a pulse
    std::vector<TraceRow> trace;  // population = 1 placeholder
};

QualitativeResult trace_qualitative(const Sequence& seq, const QualitativeOptions& opt = {}, double gamma = kGamma);

// Per-axis K_max from the qualitative tracker; margins (rad/m) are added per axis.
Vec3 max_k_excursion(const Sequence& seq, const Vec3& margins = {}, double gamma = kGamma);

// CSV with header time_s,kind,order_i,kx_rad_per_m,pop_re,pop_im.
void export_kt_diagram(std::ostream& os, const std::vector<TraceRow>& trace);

// Removes configurations whose summed |population| stays within the grayscale bound (delta_rho/2 of the
// largest). Returns the pruned set.
ConfigurationSet prune_for_grayscale(const ConfigurationSet& set, double delta_rho = 1.0 / 256.0);

}  // namespace mrsim
