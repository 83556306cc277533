#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mrsim/bloch.hpp"
#include "mrsim/object.hpp"
#include "mrsim/sequence.hpp"
#include "mrsim/simd.hpp"
#include "mrsim/system.hpp"

namespace mrsim {

// Spin-independent data per elementary sequence.
struct ElementTable {
    bool has_pulse = false;
    std::size_t matrix = 0;  // index into SequenceTables::matrices
    double duration = 0;
    // Sub-steps: one for a plain interval, N+1 for an acquisition (start -> t_0 -> ... -> t_{N-1} -> end).
    std::vector<double> step_dt;
    std::vector<Vec3> step_moment;  // gamma * int G over each step, rad/m
    bool acquire = false;
    std::size_t sample_offset = 0;  // into the flat sample array
    std::size_t acquisition = 0;
};

struct SequenceTables {
    std::vector<PulseMatrix> matrices;
    std::vector<ElementTable> elements;
    std::size_t pulse_memo_hits = 0;  // pulses that reused an earlier (alpha, phi) evaluation
    std::size_t total_samples = 0;
    std::size_t total_steps = 0;
};

SequenceTables precompute_sequence_tables(const Sequence& seq, const FrameContext& ctx = {});

// Relaxation factors for one (T1, T2, M0), flat over all steps of all elements.
struct TissueTable {
    std::vector<double> e1, e2, rec;
};
TissueTable make_tissue_table(const SequenceTables& t, const RelaxationParams& r);

// Reference path built directly on the bloch-core operators, no tables. Returns w*(Mx + j My) at every sample of
// every acquisition, flat. domega and weight are the spin's total off-resonance and receive weight.
std::vector<cplx> simulate_spin(const SpinSample& spin, const Sequence& seq, double domega, cplx weight,
                                double gamma = kGamma);

struct EchoRecord {
    std::size_t acquisition = 0;
    int row = -1;
    int echo = 0;
    bool reversed = false;
    std::vector<cplx> samples;  // normalized by the total spin count
    std::vector<double> times_s;
};

struct RunMetrics {
    double wall_s = 0;
    std::size_t spins = 0;
    double throughput = 0;  // spins per second
    int workers = 0;
    std::size_t blocks = 0;
    std::vector<double> busy_fraction;
    std::string kernels;
    std::size_t tissue_memo_hits = 0;
    std::size_t pulse_memo_hits = 0;
};

struct Snapshot {
    double t_s = 0;  // actual boundary time
    std::vector<Magnetization> m;
};

struct RunOptions {
    int workers = 1;
    std::size_t blocks = 0;  // 0 means 4 * workers
    bool deterministic = true;
    std::vector<double> snapshot_times;
    const SimdKernels* kernels = nullptr;  // nullptr picks active_kernels()
    // Called by a worker before processing a block; an exception becomes WorkerPanic for that block.
    std::function<void(std::size_t block)> fault_hook;
};

struct RunResult {
    std::vector<EchoRecord> echoes;
    RunMetrics metrics;
    std::vector<Snapshot> snapshots;
};

RunResult run(const Sequence& seq, const std::vector<SpinSample>& spins, const SystemModel& sys,
              const RunOptions& opt = {}, double gamma = kGamma);

// Rasterizes at the given spacing, warns when it is coarser than the discretization bound, then runs.
RunResult run_experiment(const Sequence& seq, const Phantom& ph, const SystemModel& sys, const Vec3& spacing,
                         const RunOptions& opt = {}, std::size_t spin_cap = kDefaultSpinBudget);

struct CompareResult {
    double delta_e_db = 0;
    std::size_t exceedances = 0;
    std::size_t compared = 0;
};
inline constexpr double kIdenticalDb = -400.0;

// 10*log10(sum|ref - test|^2 / sum|ref|^2); identical data gives kIdenticalDb. Samples where both magnitudes are
// below eps_scale * DBL_EPSILON * max|ref| are not counted for the relative error.
CompareResult compare_results(const std::vector<cplx>& ref, const std::vector<cplx>& test, double rel_threshold = 1e-6,
                              double eps_scale = 1.0);
CompareResult compare_results(const std::vector<EchoRecord>& ref, const std::vector<EchoRecord>& test,
                              double rel_threshold = 1e-6);
CompareResult compare_snapshots(const Snapshot& ref, const Snapshot& test, double rel_threshold = 1e-6);

// Echo file: text line "MRSIM1 n_acq n_samples" then little-endian f64 (re, im) pairs. Manifest is a text
// sidecar with per-acquisition row, echo, reversal and timestamps plus the run metrics.
void write_echoes(const std::filesystem::path& file, const std::vector<EchoRecord>& echoes);
std::vector<EchoRecord> read_echoes(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const std::vector<EchoRecord>& echoes, const RunMetrics& m);
// Fills row/echo/reversed/times from a manifest written by write_manifest.
void read_manifest(const std::filesystem::path& file, std::vector<EchoRecord>& echoes);

// Snapshot file: text line "n_spins t_s" then f64 triples.
void write_snapshot(const std::filesystem::path& file, const Snapshot& s);
Snapshot read_snapshot(const std::filesystem::path& file);

// Concatenated samples of all records.
std::vector<cplx> flatten(const std::vector<EchoRecord>& echoes);

}  // namespace mrsim
