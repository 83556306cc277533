#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "mrsim/errors.hpp"
#include "mrsim/object.hpp"

using namespace mrsim;
using doctest::Approx;

namespace {

PhantomBox box1d(double len) {
    PhantomBox b;
    b.origin = {0, 0, 0};
    b.size = {len, 0, 0};
    return b;
}

}  // namespace

TEST_CASE("1D box lattice") {
    const Phantom ph{{box1d(0.1)}};
    const auto s = rasterize(ph, {0.01, 1, 1});
    REQUIRE(s.size() == 10);
    CHECK(count_spins(ph, {0.01, 1, 1}) == 10);
    // centred: first spin half a step in from the edge
    CHECK(s.front().position.x == Approx(0.005));
    CHECK(s.back().position.x == Approx(0.095));
    for (const auto& sp : s) {
        CHECK(sp.m.mx == 0.0);
        CHECK(sp.m.my == 0.0);
        CHECK(sp.m.mz == 1.0);
    }
}

TEST_CASE("single layer axes sit at the box centre") {
    PhantomBox b;
    b.origin = {-1, -1, 0.3};
    b.size = {2, 2, 0};
    const auto s = rasterize(Phantom{{b}}, {0.5, 0.5, 1e300});
    CHECK(s.size() == 16);
    for (const auto& sp : s) {
        CHECK(std::isfinite(sp.position.z));
        CHECK(sp.position.z == 0.3);
    }
}

TEST_CASE("overlapping boxes emit independent populations") {
    PhantomBox a = box1d(0.1), b = box1d(0.1);
    a.t2 = {0.05, {}};
    b.t2 = {0.2, {}};
    const auto s = rasterize(Phantom{{a, b}}, {0.01, 1, 1});
    REQUIRE(s.size() == 20);
    for (int i = 0; i < 10; ++i) {
        CHECK(s[i].relax.t2 == 0.05);
        CHECK(s[10 + i].relax.t2 == 0.2);
        CHECK(s[i].position.x == s[10 + i].position.x);
    }
}

TEST_CASE("affine properties and ordering") {
    PhantomBox b;
    b.origin = {0, 0, 0};
    b.size = {0.02, 0.02, 0.02};
    b.m0 = {1.0, {10, 0, 0}};
    b.delta_omega = {0, {0, 0, 1000}};
    const auto s = rasterize(Phantom{{b}}, {0.01, 0.01, 0.01});
    REQUIRE(s.size() == 8);
    // x fastest, then y, then z
    CHECK(s[1].position.x > s[0].position.x);
    CHECK(s[2].position.y > s[0].position.y);
    CHECK(s[4].position.z > s[0].position.z);
    for (const auto& sp : s) {
        CHECK(sp.relax.m0 == Approx(1 + 10 * sp.position.x));
        CHECK(sp.m.mz == sp.relax.m0);
        CHECK(sp.delta_omega == Approx(1000 * sp.position.z));
    }
}

TEST_CASE("rasterize is deterministic") {
    const Phantom ph = shepp_logan(0.1);
    const auto a = rasterize(ph, {0.004, 0.004, 1});
    const auto b = rasterize(ph, {0.004, 0.004, 1});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].position == b[i].position);
        CHECK(a[i].relax.m0 == b[i].relax.m0);
    }
}

TEST_CASE("equilibrium magnetization per volume is spacing independent") {
    PhantomBox b;
    b.origin = {0, 0, 0};
    b.size = {0.1, 0.1, 0};
    b.m0 = {0.7, {}};
    for (double d : {0.01, 0.005, 0.0025}) {
        const auto s = rasterize(Phantom{{b}}, {d, d, 1});
        double sum = 0;
        for (const auto& sp : s) sum += sp.m.mz;
        CHECK(sum == Approx(0.7 * static_cast<double>(s.size())));
        CHECK(sum * d * d == Approx(0.7 * 0.01).epsilon(1e-9));
    }
}

TEST_CASE("spin budget and bad input") {
    const Phantom ph{{box1d(0.1)}};
    CHECK_THROWS_AS(rasterize(ph, {0.01, 1, 1}, 5), SpinBudgetExceeded);
    CHECK_THROWS_AS(rasterize(ph, {0, 1, 1}), InvalidParameter);
    CHECK_THROWS_AS(rasterize(Phantom{}, {1, 1, 1}), InvalidParameter);
    PhantomBox bad = box1d(0.1);
    bad.t2 = {-1, {}};
    CHECK_THROWS_AS(rasterize(Phantom{{bad}}, {0.01, 1, 1}), InvalidParameter);
}

TEST_CASE("shepp-logan tissue values") {
    const double s = 0.1;
    // inside ellipse a but outside b: the rim
    auto rim = shepp_logan_tissue(0, 0.9 * s, s);
    REQUIRE(rim);
    CHECK(rim->m0 == 1.00);
    CHECK(rim->t1 == 1.0);
    CHECK(rim->t2 == 0.2);
    CHECK_FALSE(shepp_logan_tissue(0.95 * s, 0.95 * s, s));
    // b overrides a, f overrides b
    CHECK(shepp_logan_tissue(0, -0.3 * s, s)->m0 == 0.51);
    CHECK(shepp_logan_tissue(0, 0.1 * s, s)->m0 == 0.80);
    CHECK(shepp_logan_tissue(0.22 * s, 0, s)->m0 == 0.40);
    CHECK(shepp_logan_tissue(0, 0.35 * s, s)->m0 == 0.60);
    CHECK(shepp_logan_tissue(0, -0.605 * s, s)->m0 == 0.70);
    CHECK(shepp_logan_ellipses().size() == 10);
}

TEST_CASE("shepp-logan at 64x64 has about 2120 spins") {
    const double scale = 0.064;
    const double d = 2 * scale / 64;
    const auto n = rasterize(shepp_logan(scale), {d, d, 1}).size();
    MESSAGE("spins: " << n);
    CHECK(std::abs(static_cast<double>(n) - 2120.0) <= 212.0);
}

TEST_CASE("object file") {
    const char* text = R"(
[box]
origin_m = 0, 0, 0
size_m = 0.1, 0.05, 0
m0 = 0.9
t1_s = 0.8
t2_s = affine: 0.05 + 1*x
delta_omega_rad_s = affine: 10 + 200*y

[shepp_logan]
scale_m = 0.1
)";
    const Phantom ph = parse_object_file(text);
    REQUIRE(ph.boxes.size() == 2);
    const auto t = ph.boxes[0].properties({0.02, 0.01, 0});
    REQUIRE(t);
    CHECK(t->m0 == 0.9);
    CHECK(t->t2 == Approx(0.07));
    CHECK(t->delta_omega == Approx(12.0));
    const auto [lo, hi] = ph.bounds();
    CHECK(lo.x == Approx(-0.1));
    CHECK(hi.x == Approx(0.1));
    CHECK_THROWS_AS(parse_object_file("[box]\nsize_m = 1, 1, 1\n"), ParseError);
    CHECK_THROWS_AS(parse_object_file("[box]\norigin_m = 0,0,0\nsize_m = 1,1,1\nt1 = 1\n"), UnitError);
    CHECK_THROWS_AS(parse_object_file("[shepp_logan]\nscale_m = -1\n"), ParseError);
}
