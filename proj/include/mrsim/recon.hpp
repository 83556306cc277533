#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mrsim/engine.hpp"

namespace mrsim {

// ny rows of nx samples, x fastest. Row r holds ky = (r - ny/2)*dk_y.
struct KSpaceMatrix {
    int nx = 0, ny = 0;
    std::vector<cplx> data;
    std::vector<int> row_acquisition;  // -1 marks a missing row
    std::vector<bool> row_reversed;
    double dk_x = 0, dk_y = 0;          // rad/m, 0 when unknown

    cplx& at(int ix, int iy) { return data[static_cast<std::size_t>(iy) * nx + ix]; }
    const cplx& at(int ix, int iy) const { return data[static_cast<std::size_t>(iy) * nx + ix]; }
};

enum class TrajectoryKind { se, epi, tse_seq, table };

struct TrajectoryEntry {
    std::size_t acquisition;
    int row;
    bool reversed;
};

struct Trajectory {
    TrajectoryKind kind = TrajectoryKind::se;
    std::vector<TrajectoryEntry> table;
};

// "se", "epi", "tse-seq" or "table:PATH" (lines "acq row reversed", '#' comments).
Trajectory parse_trajectory(const std::string& spec);

// se: recorded row (acquisition index when unassigned). epi: recorded row and reversal flag (odd index reversed
// when unassigned). tse-seq: row = acquisition index. table: rows not listed stay missing.
KSpaceMatrix assemble_kspace(const std::vector<EchoRecord>& echoes, const Trajectory& traj, int nx, int ny);

// Records with the given echo index, in acquisition order.
std::vector<EchoRecord> select_echo(const std::vector<EchoRecord>& echoes, int echo);

struct ImageVolume {
    int nx = 0, ny = 0;
    std::vector<double> magnitude, phase;
    double pixel_x = 0, pixel_y = 0;  // m, 0 when unknown
    double window_lo = 0, window_hi = 0;

    double mag(int ix, int iy) const { return magnitude[static_cast<std::size_t>(iy) * nx + ix]; }
    double ph(int ix, int iy) const { return phase[static_cast<std::size_t>(iy) * nx + ix]; }
};

// Centered inverse DFT (k center and image center at index n/2), normalized by 1/(nx*ny).
std::vector<cplx> centered_idft2(const std::vector<cplx>& k, int nx, int ny);
ImageVolume reconstruct(const KSpaceMatrix& k);

struct FitResult {
    double rho = 0, t2 = 0;
    double residual_norm = 0;
    int iterations = 0;
};

// I(t) = rho*exp(-t/T2). Log-linear seed, then damped Gauss-Newton. Throws FitDiverged when T2 is outside the
// observable range of the series or the iteration does not settle.
FitResult cpmg_fit(const std::vector<double>& t, const std::vector<double>& intensity);

struct Window {
    double lo = 0, hi = 0;  // hi <= lo means [0, max]
};

// 8-bit P5 after linear windowing, plus PATH.raw (f64 magnitude) and PATH.raw.txt sidecar. Returns the window used.
Window export_image(const ImageVolume& img, const std::filesystem::path& pgm, Window w = {});
std::vector<unsigned char> window_to_8bit(const std::vector<double>& v, Window w);

// Raw grid: text line "nx ny dtype=c128|f64", then little-endian payload, row-major, x fastest.
void write_raw_grid(const std::filesystem::path& p, int nx, int ny, const std::vector<double>& v);
void write_raw_grid(const std::filesystem::path& p, int nx, int ny, const std::vector<cplx>& v);
struct RawGrid {
    int nx = 0, ny = 0;
    bool complex = false;
    std::vector<cplx> data;  // real grids have zero imaginary parts
};
RawGrid read_raw_grid(const std::filesystem::path& p);

}  // namespace mrsim
