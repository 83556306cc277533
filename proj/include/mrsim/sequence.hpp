#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mrsim/bloch.hpp"
#include "mrsim/vec3.hpp"

namespace mrsim {

enum class GradShape { constant, trapezoid, sampled };

// Amplitudes in mT/m (file units). Trapezoid: ramp up, flat top, ramp down, zero for the rest.
// Sampled: piecewise linear through samples spread uniformly over [0, duration].
struct GradientWaveform {
    GradShape shape = GradShape::constant;
    Vec3 amp_mT_per_m{};
    double ramp_s = 0;
    double flat_s = 0;
    std::vector<Vec3> samples_mT_per_m;

    // Integral of G over [0, t] in T*s/m; t is clamped to [0, duration].
    Vec3 integral(double t, double duration) const;
    bool is_zero() const;
    // True when each axis keeps one sign over the interval, so |k| is extremal at the ends.
    bool is_monotone() const;

    bool operator==(const GradientWaveform&) const = default;
};

struct AcquisitionSpec {
    bool enabled = false;
    int n_samples = 0;
    int row = -1;   // k-space row, -1 when unassigned
    int echo = 0;   // echo index within its shot
    bool reversed = false;

    // Samples at i*duration/(N-1); a single sample sits at t = 0.
    double sample_time(int i, double duration) const;

    bool operator==(const AcquisitionSpec&) const = default;
};

struct ElementarySequence {
    double rf_flip_deg = 0;
    double rf_phase_deg = 0;
    GradientWaveform gradient;
    double duration_s = 0;
    AcquisitionSpec acquisition;

    HardPulse pulse() const;
    bool has_pulse() const { return rf_flip_deg != 0.0; }
    // gamma * int G dt over the whole element, rad/m.
    Vec3 k_moment(double gamma = kGamma) const;
    Vec3 k_moment_until(double t, double gamma = kGamma) const;

    bool operator==(const ElementarySequence&) const = default;
};

struct Sequence {
    std::string name;
    std::vector<ElementarySequence> elements;
    int repetitions = 1;

    double total_duration() const;
    std::vector<std::size_t> acquisition_elements() const;
    std::size_t acquisition_count() const { return acquisition_elements().size(); }

    bool operator==(const Sequence&) const = default;
};

// T/m for N samples across FOV in a constant readout of length dt.
double readout_gradient(double fov, int n, double dt, double gamma = kGamma);

struct ImagingParams {
    double fov_m = 0.5;
    int nx = 64;
    int ny = 64;
    double te_s = 0.05;
    double tr_s = 1.0;
    double readout_mT_per_m = 0;  // when > 0 the readout duration follows from it
    double readout_s = 0;         // used when readout_mT_per_m == 0
    double excitation_phase_deg = 0;
    double refocus_phase_deg = 0;
    double lobe_s = 1e-3;         // dephase, phase-encode and rewinder lobes
    double blip_s = 0.1e-3;       // EPI phase-encode blips

    double readout_duration(double gamma = kGamma) const;
    double readout_amplitude_mT_per_m(double gamma = kGamma) const;
    double dk_x() const;
    double dk_y() const;
};

Sequence build_spin_echo(const ImagingParams& p);
// echo_times_s.size() is the turbo factor; echo e of shot s fills row s*TF + e.
Sequence build_tse(const ImagingParams& p, const std::vector<double>& echo_times_s);
// n_echoes lines per shot, readout sign alternates, odd lines reversed. interleaves = 0 gives contiguous row
// segments (as many shots as needed); interleaves = S gives S shots, shot s taking rows s, s + S, ...
Sequence build_gradient_epi(const ImagingParams& p, int n_echoes, int interleaves = 0);
// Echoes at (e+1)*echo_spacing, all with the row's phase encode; one shot per row.
Sequence build_cpmg(const ImagingParams& p, int n_echoes, double echo_spacing_s);
// Pulse train with a constant gradient interval after each pulse, no acquisition.
Sequence build_pulse_train(const std::vector<HardPulse>& pulses, double interval_s, const Vec3& grad_mT_per_m);
// Phases of the Frank polyphase code of length m*m.
std::vector<double> frank_phases(int m);

std::string serialize_sequence(const Sequence& s);
// base_dir resolves [rf_shaped] sample files.
Sequence parse_sequence_file(std::string_view text, const std::filesystem::path& base_dir = {});
Sequence load_sequence(const std::filesystem::path& path);

}  // namespace mrsim
