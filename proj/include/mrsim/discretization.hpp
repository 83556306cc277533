#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mrsim/kt.hpp"
#include "mrsim/object.hpp"
#include "mrsim/sequence.hpp"
#include "mrsim/system.hpp"

namespace mrsim {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct SpacingReport {
    Vec3 k_max{};           // rad/m, qualitative excursion without margin
    Vec3 margin{};          // rad/m, off-resonance margin
    Vec3 dx_max{};          // m, pi/(k_max + margin); kUnbounded on axes without k motion
    Vec3 spacing{};         // m, safety * dx_max
    double safety = 0.8;
    bool exact_k = true;    // false when the moments were incommensurate and the fallback unit was used
    double max_transverse_age = 0;  // s
    std::size_t predicted_spins = 0;  // 0 when no phantom was given
    std::vector<Order> pruned;       // steady-state mode only

    std::string to_text() const;
    std::string to_key_values() const;
};

struct SpacingOptions {
    double safety = 0.8;
    int readout_axis = 0;
    // Bound on |grad delta_omega| of the object itself, rad/(s*m).
    double object_delta_omega_gradient = 0;
    const Phantom* phantom = nullptr;  // gives the box for |grad dB0| and the spin count
    double gamma = kGamma;
};

SpacingReport max_spacing(const Sequence& seq, const SystemModel& sys, const SpacingOptions& opt = {});

struct PruneResult {
    double k_pruned = 0;    // rad/m on the chosen axis
    double k_unpruned = 0;
    std::vector<Order> dropped;  // orders dropped at any time
};

// Quantitative trace (run_kt with record_trace) in, reduced K out. delta_rho = 1/levels.
PruneResult steady_state_prune(const std::vector<TraceRow>& trace, int grayscale_levels, int axis = 0);

// gamma*G*dt = 2pi(N-1)/FOV; exactly one of fov, dt, gradient may be 0 and is solved for.
struct AcqParams {
    double fov_m = 0;
    int n = 0;
    double dt_s = 0;
    double gradient_T_per_m = 0;
};
AcqParams acquisition_params(AcqParams p, double gamma = kGamma);

struct RfSamplingReport {
    bool pass = false;
    int required_n = 0;          // smallest sample count over the same pulse duration that passes
    double max_sample_dt = 0;    // s
    double bandwidth_rad_s = 0;  // full width holding 99% of the envelope energy
    double omega_max = 0;        // gamma*gz*fov/2
};

// per_sample_dt <= pi/(omega_max + bandwidth/2). bandwidth_override_rad_s > 0 replaces the estimate.
RfSamplingReport rf_sampling_check(std::span<const cplx> envelope, double per_sample_dt, double gz_T_per_m,
                                   double fov_m, double gamma = kGamma, double bandwidth_override_rad_s = 0);

}  // namespace mrsim
