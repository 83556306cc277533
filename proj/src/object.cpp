#include "mrsim/object.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mrsim/errors.hpp"
#include "mrsim/log.hpp"
#include "textfmt.hpp"

namespace mrsim {

std::optional<Tissue> PhantomBox::properties(const Vec3& x) const {
    if (evaluator) return evaluator(x);
    return Tissue{m0(x), t1(x), t2(x), delta_omega(x)};
}

std::pair<Vec3, Vec3> Phantom::bounds() const {
    if (boxes.empty()) throw InvalidParameter("phantom has no boxes");
    Vec3 lo = boxes[0].origin, hi = boxes[0].origin + boxes[0].size;
    for (const auto& b : boxes) {
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], b.origin[a]);
            hi[a] = std::max(hi[a], b.origin[a] + b.size[a]);
        }
    }
    return {lo, hi};
}

namespace {

int lattice_count(double size, double spacing) {
    if (size <= 0) return 1;
    const double n = std::floor(size / spacing * (1.0 + 1e-9));
    return std::max(1, static_cast<int>(n));
}

void check_box(const PhantomBox& b) {
    for (int a = 0; a < 3; ++a)
        if (!(b.size[a] >= 0) || !std::isfinite(b.origin[a]))
            throw InvalidParameter("box size must be non-negative and origin finite");
}

}  // namespace

std::size_t count_spins(const Phantom& ph, const Vec3& spacing) {
    std::size_t total = 0;
    for (const auto& b : ph.boxes) {
        std::size_t n = 1;
        for (int a = 0; a < 3; ++a) n *= static_cast<std::size_t>(lattice_count(b.size[a], spacing[a]));
        total += n;
    }
    return total;
}

std::vector<SpinSample> rasterize(const Phantom& ph, const Vec3& spacing, std::size_t cap) {
    for (int a = 0; a < 3; ++a)
        if (!(spacing[a] > 0)) throw InvalidParameter("spacing must be positive");
    if (ph.boxes.empty()) throw InvalidParameter("phantom has no boxes");
    std::vector<SpinSample> spins;
    for (const auto& b : ph.boxes) {
        check_box(b);
        int n[3];
        Vec3 start;
        for (int a = 0; a < 3; ++a) {
            n[a] = lattice_count(b.size[a], spacing[a]);
            start[a] = b.origin[a] + 0.5 * b.size[a] - (n[a] > 1 ? 0.5 * (n[a] - 1) * spacing[a] : 0.0);
        }
        bool warned = false;
        for (int k = 0; k < n[2]; ++k)
            for (int j = 0; j < n[1]; ++j)
                for (int i = 0; i < n[0]; ++i) {
                    const Vec3 x{i ? start.x + i * spacing.x : start.x, j ? start.y + j * spacing.y : start.y,
                                 k ? start.z + k * spacing.z : start.z};
                    auto t = b.properties(x);
                    if (!t) continue;
                    if (!(t->t1 > 0) || !(t->t2 > 0) || !(t->m0 >= 0))
                        throw InvalidParameter("box properties must give T1, T2 > 0 and M0 >= 0");
                    if (!warned && t->t2 > t->t1) {
                        warn("T2 exceeds T1 inside a phantom box");
                        warned = true;
                    }
                    if (spins.size() >= cap)
                        throw SpinBudgetExceeded("spin count exceeds the cap of " + std::to_string(cap) +
                                                 "; coarsen the spacing or raise the cap");
                    spins.push_back({x, {0.0, 0.0, t->m0}, {t->t1, t->t2, t->m0}, t->delta_omega});
                }
    }
    return spins;
}

const std::vector<Ellipse>& shepp_logan_ellipses() {
    static const std::vector<Ellipse> e = {
        {0.0, 0.0, 0.69, 0.92, 0.0, 1.00},         // a
        {0.0, -0.0184, 0.6624, 0.874, 0.0, 0.51},  // b
        {0.22, 0.0, 0.11, 0.31, -18.0, 0.40},      // c
        {-0.22, 0.0, 0.16, 0.41, 18.0, 0.40},      // d
        {0.0, 0.35, 0.21, 0.25, 0.0, 0.60},        // e
        {0.0, 0.1, 0.046, 0.046, 0.0, 0.80},       // f
        {0.0, -0.1, 0.046, 0.046, 0.0, 0.80},      // g
        {-0.08, -0.605, 0.046, 0.023, 0.0, 0.70},  // h
        {0.0, -0.605, 0.023, 0.023, 0.0, 0.70},    // i
        {0.06, -0.605, 0.023, 0.046, 0.0, 0.70},   // j
    };
    return e;
}

std::optional<Tissue> shepp_logan_tissue(double x, double y, double scale) {
    const double u = x / scale, v = y / scale;
    std::optional<Tissue> out;
    for (const auto& e : shepp_logan_ellipses()) {
        const double th = e.angle_deg * std::numbers::pi / 180.0;
        const double dx = u - e.cx, dy = v - e.cy;
        const double xr = dx * std::cos(th) + dy * std::sin(th);
        const double yr = -dx * std::sin(th) + dy * std::cos(th);
        if ((xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0) out = Tissue{e.m0, 1.0, 0.2, 0.0};
    }
    return out;
}

Phantom shepp_logan(double scale) {
    if (!(scale > 0)) throw InvalidParameter("scale must be positive");
    PhantomBox b;
    b.origin = {-scale, -scale, 0.0};
    b.size = {2 * scale, 2 * scale, 0.0};
    b.evaluator = [scale](const Vec3& x) { return shepp_logan_tissue(x.x, x.y, scale); };
    return Phantom{{b}};
}

// ---------------------------------------------------------------------------------------------

namespace {

// "affine: c + gx*x + gy*y + gz*z" with any subset of terms, or a plain number.
Affine parse_affine(const textfmt::Entry& en) {
    const std::string& v = en.value;
    const std::string prefix = "affine:";
    if (v.compare(0, prefix.size(), prefix) != 0) return {textfmt::to_double(v, en.line, en.value_col), {}};
    Affine a;
    std::size_t i = prefix.size();
    const auto skip = [&] { while (i < v.size() && std::isspace(static_cast<unsigned char>(v[i]))) ++i; };
    const auto fail = [&](const std::string& what) {
        throw ParseError("affine expression: " + what, en.line, en.value_col + static_cast<int>(i));
    };
    bool first = true;
    skip();
    while (i < v.size()) {
        double sign = 1.0;
        if (!first) {
            if (v[i] == '+') sign = 1.0;
            else if (v[i] == '-') sign = -1.0;
            else fail("expected + or -");
            ++i;
            skip();
        }
        std::size_t j = i;
        while (j < v.size() && v[j] != '*' && !(j > i && (v[j] == '+' || v[j] == '-') && v[j - 1] != 'e' &&
                                                 v[j - 1] != 'E') && !std::isspace(static_cast<unsigned char>(v[j])))
            ++j;
        const double num = sign * textfmt::to_double(v.substr(i, j - i), en.line, en.value_col + static_cast<int>(i));
        i = j;
        skip();
        if (i < v.size() && v[i] == '*') {
            ++i;
            skip();
            if (i >= v.size()) fail("missing variable");
            const char c = v[i++];
            if (c == 'x') a.g.x += num;
            else if (c == 'y') a.g.y += num;
            else if (c == 'z') a.g.z += num;
            else fail("variable must be x, y or z");
        } else {
            a.c += num;
        }
        first = false;
        skip();
    }
    if (first) fail("empty");
    return a;
}

const std::vector<std::string> kBoxKeys = {"origin_m", "size_m", "m0", "t1_s", "t2_s", "delta_omega_rad_s"};

}  // namespace

Phantom parse_object_file(std::string_view text) {
    using namespace textfmt;
    Phantom ph;
    for (const auto& b : parse_blocks(text)) {
        if (b.name == "box") {
            PhantomBox box;
            bool origin = false, size = false;
            for (const auto& en : b.entries) {
                if (en.key == "origin_m") {
                    box.origin = to_vec3(en.value, en.line, en.value_col);
                    origin = true;
                } else if (en.key == "size_m") {
                    box.size = to_vec3(en.value, en.line, en.value_col);
                    for (int a = 0; a < 3; ++a)
                        if (box.size[a] < 0) throw ParseError("size must be non-negative", en.line, en.value_col);
                    size = true;
                } else if (en.key == "m0") {
                    box.m0 = parse_affine(en);
                } else if (en.key == "t1_s") {
                    box.t1 = parse_affine(en);
                } else if (en.key == "t2_s") {
                    box.t2 = parse_affine(en);
                } else if (en.key == "delta_omega_rad_s") {
                    box.delta_omega = parse_affine(en);
                } else {
                    unknown_key(en, kBoxKeys);
                }
            }
            if (!origin || !size) throw ParseError("box needs origin_m and size_m", b.line, 1);
            ph.boxes.push_back(box);
        } else if (b.name == "shepp_logan") {
            double scale = -1;
            for (const auto& en : b.entries) {
                if (en.key == "scale_m") scale = to_double(en.value, en.line, en.value_col);
                else unknown_key(en, {"scale_m"});
            }
            if (!(scale > 0)) throw ParseError("shepp_logan needs a positive scale_m", b.line, 1);
            auto sl = shepp_logan(scale);
            ph.boxes.insert(ph.boxes.end(), sl.boxes.begin(), sl.boxes.end());
        } else {
            throw ParseError("unknown block [" + b.name + "]", b.line, 1);
        }
    }
    if (ph.boxes.empty()) throw ParseError("object file has no boxes", 1, 1);
    return ph;
}

Phantom load_object(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open object file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_object_file(ss.str());
}

}  // namespace mrsim
