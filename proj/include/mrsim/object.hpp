#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "mrsim/bloch.hpp"
#include "mrsim/vec3.hpp"

namespace mrsim {

// c + g . x
struct Affine {
    double c = 0;
    Vec3 g{};
    double operator()(const Vec3& x) const { return c + dot(g, x); }
    bool operator==(const Affine&) const = default;
};

struct Tissue {
    double m0 = 0, t1 = 1, t2 = 1, delta_omega = 0;
};

struct PhantomBox {
    Vec3 origin{};  // min corner, m
    Vec3 size{};    // m; a zero component is a single layer along that axis
    Affine m0{1.0, {}}, t1{1.0, {}}, t2{0.1, {}}, delta_omega{0.0, {}};
    // Overrides the affine properties when set; nullopt means no spin at this point.
    std::function<std::optional<Tissue>(const Vec3&)> evaluator;

    std::optional<Tissue> properties(const Vec3& x) const;
};

struct Phantom {
    std::vector<PhantomBox> boxes;

    // Bounding box as (min, max).
    std::pair<Vec3, Vec3> bounds() const;
};

struct SpinSample {
    Vec3 position{};
    Magnetization m{};
    RelaxationParams relax{};
    double delta_omega = 0;  // rad/s, object contribution
};

inline constexpr std::size_t kDefaultSpinBudget = 50'000'000;

// Lattice centered in each box; ordering is box, then z, y, x. Spins start at (0, 0, M0).
std::vector<SpinSample> rasterize(const Phantom& ph, const Vec3& spacing, std::size_t spin_cap = kDefaultSpinBudget);
std::size_t count_spins(const Phantom& ph, const Vec3& spacing);

struct Ellipse {
    double cx, cy, a, b, angle_deg, m0;
};
// Classic ten-ellipse geometry in units of the half width, M0 per ellipse a..j.
const std::vector<Ellipse>& shepp_logan_ellipses();
// Tissue of the last (innermost listed) ellipse containing (x, y); nullopt outside.
std::optional<Tissue> shepp_logan_tissue(double x, double y, double scale);
// Planar phantom covering [-scale, scale]^2 at z = 0.
Phantom shepp_logan(double scale);

Phantom parse_object_file(std::string_view text);
Phantom load_object(const std::filesystem::path& path);

}  // namespace mrsim
