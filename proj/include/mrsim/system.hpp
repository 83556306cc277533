#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "mrsim/bloch.hpp"
#include "mrsim/vec3.hpp"

namespace mrsim {

// Regular grid, x fastest, trilinear interpolation. Scalar or 3-vector nodes.
struct Grid3 {
    int nx = 0, ny = 0, nz = 0;
    Vec3 origin{}, step{};
    int components = 1;
    std::vector<double> values;

    // Throws OutOfGrid outside the node hull.
    void sample(const Vec3& x, double* out) const;
    double scalar(const Vec3& x) const;
    Vec3 vector(const Vec3& x) const;
};

// Header "nx ny nz x0 y0 z0 dx dy dz" followed by values.
Grid3 load_grid(const std::filesystem::path& path, int components);
void save_grid(const std::filesystem::path& path, const Grid3& g);

double legendre_p(int n, double x);

enum class Inhomogeneity { none, legendre12, grid };

struct StaticField {
    double b0 = 1.5;  // T
    Inhomogeneity kind = Inhomogeneity::none;
    double c = 0;     // legendre12, T
    double r = 1;     // legendre12, m
    Grid3 grid;       // tesla
};

enum class CoilModel { uniform, grid, loop };

struct ReceiveSensitivity {
    CoilModel model = CoilModel::uniform;
    double s = 1.0;
    Grid3 grid;
    Vec3 center{}, normal{0, 0, 1};
    double diameter = 0.15;
};

struct SystemModel {
    StaticField field;
    ReceiveSensitivity receive;
    double omega_hf = 0;     // rad/s, rotating frame carrier
    bool omega_hf_set = false;  // default carrier is gamma*b0

    FrameContext frame(double gamma = kGamma) const;
};

double delta_b0(const StaticField& f, const Vec3& x);

// gamma*(b0 + dB0(x)) - omega_hf + object offset. Positive values rotate (Mx, My) clockwise seen from +z.
double spin_off_resonance(const StaticField& f, const Vec3& x, double object_delta_omega, const FrameContext& ctx);

// Unit-current Biot-Savart field of a circular loop, n_quad midpoint segments.
Vec3 loop_field(const Vec3& center, const Vec3& normal, double diameter, const Vec3& x, int n_quad);
// Doubles n_quad until the change is below rel_tol.
Vec3 loop_field_converged(const Vec3& center, const Vec3& normal, double diameter, const Vec3& x,
                          double rel_tol = 1e-12);

Vec3 coil_weight(const ReceiveSensitivity& s, const Vec3& x);
// Complex receive weight Sx - j*Sy applied to Mx + j*My.
cplx receive_weight(const ReceiveSensitivity& s, const Vec3& x);

// Largest |grad dB0| over a box, by central differences on a coarse lattice. T/m.
double max_field_gradient(const StaticField& f, const Vec3& lo, const Vec3& hi, int n = 9);

SystemModel parse_system_file(std::string_view text, const std::filesystem::path& base_dir = {});
SystemModel load_system(const std::filesystem::path& path);

}  // namespace mrsim
