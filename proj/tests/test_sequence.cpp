#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "mrsim/errors.hpp"
#include "mrsim/sequence.hpp"

using namespace mrsim;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

struct EchoPoint {
    double t;  // since the last excitation
    Vec3 k;    // at the centre sample
    int row;
    bool reversed;
};

// Walks the timeline; 90 deg pulses restart k at the origin, 180 deg pulses mirror it.
std::vector<EchoPoint> echo_points(const Sequence& s) {
    std::vector<EchoPoint> out;
    Vec3 k{};
    double t = 0;
    for (const auto& e : s.elements) {
        if (e.rf_flip_deg == 90) {
            k = {};
            t = 0;
        } else if (e.rf_flip_deg == 180) {
            k = k * -1.0;
        }
        if (e.acquisition.enabled) {
            const int c = e.acquisition.n_samples / 2;
            const double tc = e.acquisition.sample_time(c, e.duration_s);
            out.push_back({t + tc, k + e.k_moment_until(tc), e.acquisition.row, e.acquisition.reversed});
        }
        k += e.k_moment();
        t += e.duration_s;
    }
    return out;
}

ImagingParams small_params(int n) {
    ImagingParams p;
    p.fov_m = 0.128;
    p.nx = p.ny = n;
    p.te_s = 0.03;
    p.tr_s = 0.5;
    p.readout_mT_per_m = 2.349;
    return p;
}

}  // namespace

TEST_CASE("readout gradient examples") {
    // Duration that yields 0.239 mT/m over 0.5 m with 256 samples, solved by hand from G*gamma*FOV*dt = 2*pi*(N-1).
    const double dt = 2 * kPi * 255 / (kGamma * 0.5 * 0.239e-3);
    CHECK(readout_gradient(0.5, 256, dt) == Approx(0.239e-3).epsilon(1e-12));
    CHECK(readout_gradient(0.2, 2, 1e-3) == Approx(2 * kPi / (kGamma * 0.2 * 1e-3)).epsilon(1e-14));

    const double dt2 = 2 * kPi * 63 / (kGamma * 0.128 * 2.349e-3);
    CHECK(readout_gradient(0.128, 64, dt2) == Approx(2.349e-3).epsilon(1e-12));
    CHECK(small_params(64).readout_duration() == Approx(dt2).epsilon(1e-12));

    CHECK_THROWS_AS(readout_gradient(0, 64, 1e-3), InvalidParameter);
    CHECK_THROWS_AS(readout_gradient(0.1, 1, 1e-3), InvalidParameter);
    CHECK_THROWS_AS(readout_gradient(0.1, 64, -1e-3), InvalidParameter);
}

TEST_CASE("gradient integrals") {
    GradientWaveform g;
    g.amp_mT_per_m = {2, -1, 0};
    CHECK(g.integral(0.5, 1.0).x == Approx(1e-3));
    CHECK(g.integral(5.0, 1.0).y == Approx(-1e-3));

    g.shape = GradShape::trapezoid;
    g.ramp_s = 0.1;
    g.flat_s = 0.3;
    // area = amp * (ramp + flat)
    CHECK(g.integral(1.0, 1.0).x == Approx(2e-3 * 0.4).epsilon(1e-14));
    CHECK(g.integral(0.05, 1.0).x == Approx(2e-3 * 0.05 * 0.05 / 0.2).epsilon(1e-14));

    GradientWaveform s;
    s.shape = GradShape::sampled;
    s.samples_mT_per_m = {{0, 0, 0}, {1, 0, 0}, {1, 0, 0}, {0, 0, 0}};
    // triangle + plateau + triangle, h = 1/3
    CHECK(s.integral(1.0, 1.0).x == Approx(1e-3 * (2.0 / 3)).epsilon(1e-14));
    CHECK(s.is_monotone());
    s.samples_mT_per_m[2].x = -1;
    CHECK_FALSE(s.is_monotone());
}

TEST_CASE("acquisition samples include both endpoints") {
    AcquisitionSpec a{true, 5};
    CHECK(a.sample_time(0, 2.0) == 0.0);
    CHECK(a.sample_time(4, 2.0) == 2.0);
    CHECK(a.sample_time(2, 2.0) == 1.0);
    AcquisitionSpec one{true, 1};
    CHECK(one.sample_time(0, 2.0) == 0.0);
}

TEST_CASE("spin echo builder") {
    const ImagingParams p = small_params(64);
    const Sequence s = build_spin_echo(p);
    CHECK(s.acquisition_count() == 64);
    for (auto i : s.acquisition_elements()) CHECK(s.elements[i].acquisition.n_samples == 64);
    CHECK(s.total_duration() == Approx(64 * p.tr_s).epsilon(1e-12));

    const auto pts = echo_points(s);
    REQUIRE(pts.size() == 64);
    for (std::size_t r = 0; r < pts.size(); ++r) {
        CHECK(pts[r].row == static_cast<int>(r));
        CHECK(pts[r].t == Approx(p.te_s).epsilon(1e-12));
        CHECK(std::abs(pts[r].k.x) < 1e-6 * p.dk_x());
        CHECK(pts[r].k.y == Approx((static_cast<int>(r) - 32) * p.dk_y()).epsilon(1e-12));
    }
    // Dephaser carries the readout moment up to its centre sample.
    const auto& ro = s.elements[s.acquisition_elements()[0]];
    const double tc = ro.acquisition.sample_time(32, ro.duration_s);
    CHECK(s.elements[0].k_moment().x == Approx(ro.k_moment_until(tc).x).epsilon(1e-12));
    CHECK(s.elements[0].k_moment().x == Approx(32 * p.dk_x()).epsilon(1e-12));

    ImagingParams bad = p;
    bad.te_s = 0.004;
    CHECK_THROWS_AS(build_spin_echo(bad), TimingInfeasible);
}

TEST_CASE("tse echoes at their echo times") {
    ImagingParams p = small_params(32);
    p.tr_s = 1.0;
    const Sequence s = build_tse(p, {0.03, 0.06});
    const auto pts = echo_points(s);
    REQUIRE(pts.size() == 32);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(pts[i].t == Approx(i % 2 == 0 ? 0.03 : 0.06).epsilon(1e-12));
        CHECK(pts[i].row == static_cast<int>(i));
        CHECK(std::abs(pts[i].k.x) < 1e-6 * p.dk_x());
        CHECK(pts[i].k.y == Approx((static_cast<int>(i) - 16) * p.dk_y()).epsilon(1e-12));
    }
    CHECK_THROWS_AS(build_tse(p, {0.03, 0.06, 0.09}), InvalidParameter);
}

TEST_CASE("cpmg echoes every 20 ms up to 240 ms") {
    ImagingParams p = small_params(16);
    p.tr_s = 1.0;
    const Sequence s = build_cpmg(p, 12, 0.02);
    const auto pts = echo_points(s);
    REQUIRE(pts.size() == 16 * 12);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const int e = static_cast<int>(i % 12);
        CHECK(pts[i].t == Approx(0.02 * (e + 1)).epsilon(1e-12));
        CHECK(pts[i].row == static_cast<int>(i / 12));
        CHECK(std::abs(pts[i].k.x) < 1e-6 * p.dk_x());
        CHECK(pts[i].k.y == Approx((pts[i].row - 8) * p.dk_y()).epsilon(1e-12));
    }
    CHECK(pts.back().t == Approx(0.24));
}

TEST_CASE("interleaved epi with 63 echoes per shot") {
    ImagingParams p;
    p.fov_m = 0.25;
    p.nx = 64;
    p.ny = 256;
    p.readout_s = 0.5e-3;
    p.blip_s = 0.05e-3;
    p.te_s = 0.05;
    p.tr_s = 0.2;
    const Sequence s = build_gradient_epi(p, 63, 4);
    const auto acq = s.acquisition_elements();
    CHECK(acq.size() == 252);
    std::set<int> rows;
    int shots = 0;
    for (const auto& e : s.elements) shots += e.rf_flip_deg == 90;
    CHECK(shots == 4);
    for (std::size_t i = 0; i < acq.size(); ++i) {
        const auto& a = s.elements[acq[i]];
        rows.insert(a.acquisition.row);
        // readout polarity alternates within a shot
        CHECK(a.acquisition.reversed == (a.acquisition.echo % 2 == 1));
        CHECK((a.gradient.amp_mT_per_m.x < 0) == a.acquisition.reversed);
    }
    CHECK(rows.size() == 252);

    // Sample k positions follow the row grid; reversed lines traverse kx downward.
    const auto pts = echo_points(s);
    for (const auto& q : pts) {
        CHECK(q.k.y == Approx((q.row - 128) * p.dk_y()).epsilon(1e-9));
        if (!q.reversed) CHECK(std::abs(q.k.x) < 1e-6 * p.dk_x());
    }
    // The line nearest ky = 0 is centred at TE.
    const auto mid = std::find_if(pts.begin(), pts.end(), [](const EchoPoint& q) { return q.row == 128; });
    REQUIRE(mid != pts.end());
    CHECK(mid->t == Approx(p.te_s).epsilon(1e-12));
}

TEST_CASE("contiguous epi covers all rows") {
    ImagingParams p = small_params(16);
    p.te_s = 0.05;
    p.tr_s = 0.3;
    p.readout_mT_per_m = 20;
    const Sequence s = build_gradient_epi(p, 8);
    std::set<int> rows;
    for (auto i : s.acquisition_elements()) rows.insert(s.elements[i].acquisition.row);
    CHECK(rows.size() == 16);
    CHECK_THROWS_AS(build_gradient_epi(p, 0), InvalidParameter);
}

TEST_CASE("pulse train and frank code") {
    const auto ph = frank_phases(3);
    REQUIRE(ph.size() == 9);
    CHECK(ph[4] == Approx(2 * kPi / 3));
    CHECK(ph[5] == Approx(4 * kPi / 3));
    CHECK(ph[8] == Approx(2 * kPi / 3));
    const Sequence s = build_pulse_train({{0.5, 0}, {0.5, 1}}, 1e-3, {1, 0, 0});
    CHECK(s.elements.size() == 2);
    CHECK(s.elements[1].pulse().phi == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("parse sequence file") {
    const char* text = R"(# two pulses
[sequence]
name = two-pulse

[elementary]
duration_s = 0.01
rf_flip_deg = 90
grad_x_mT_per_m = 1

[elementary]
duration_s = 0.02
rf_flip_deg = 60
rf_phase_deg = 90
grad_x_mT_per_m = 1
acquire = 64
)";
    const Sequence s = parse_sequence_file(text);
    REQUIRE(s.elements.size() == 2);
    CHECK(s.name == "two-pulse");
    CHECK(s.elements[1].acquisition.enabled);
    CHECK(s.elements[1].acquisition.n_samples == 64);
    CHECK(s.elements[0].gradient.amp_mT_per_m.x == 1.0);
    CHECK(s.total_duration() == Approx(0.03));
}

TEST_CASE("parse errors carry positions") {
    try {
        parse_sequence_file("[elementary]\nduration_s = 0.01\nrf_flip_deg = ninety\n");
        FAIL("expected ParseError");
    } catch (const UnitError&) {
        FAIL("wrong error type");
    } catch (const ParseError& e) {
        CHECK(e.line == 3);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_sequence_file("[elementary]\nduration = 0.01\n"), UnitError);
    CHECK_THROWS_AS(parse_sequence_file("[elementary]\nduration_s = 0.01\ngrad_x = 1\n"), UnitError);
    CHECK_THROWS_AS(parse_sequence_file("[elementary]\nrf_flip_deg = 90\n"), ParseError);
    CHECK_THROWS_AS(parse_sequence_file("# nothing\n"), ParseError);
    CHECK_THROWS_AS(parse_sequence_file("[bogus]\n"), ParseError);
    CHECK_THROWS_AS(parse_sequence_file("[elementary]\nduration_s = 0\nacquire = 4\n"), ParseError);
}

TEST_CASE("builders round-trip through the text format") {
    ImagingParams p = small_params(16);
    p.excitation_phase_deg = 90;
    p.tr_s = 1.0;
    ImagingParams pe = p;
    pe.te_s = 0.05;
    pe.readout_mT_per_m = 20;
    std::vector<Sequence> all{build_spin_echo(p), build_tse(p, {0.03, 0.06}), build_cpmg(p, 4, 0.02),
                              build_gradient_epi(pe, 8), build_gradient_epi(pe, 4, 4),
                              build_pulse_train({{0.3, 0.1}, {1.2, -2}}, 2e-3, {0.5, 0, -0.25})};
    Sequence trap;
    trap.name = "trap";
    ElementarySequence e;
    e.duration_s = 0.01;
    e.gradient.shape = GradShape::trapezoid;
    e.gradient.amp_mT_per_m = {3, 0, 0};
    e.gradient.ramp_s = 1e-3;
    e.gradient.flat_s = 5e-3;
    trap.elements.push_back(e);
    e.gradient = {};
    e.gradient.shape = GradShape::sampled;
    e.gradient.samples_mT_per_m = {{0, 1, 0}, {0.1, 2, -3}};
    e.acquisition = {true, 7, 3, 1, true};
    trap.elements.push_back(e);
    all.push_back(trap);
    for (const auto& s : all) CHECK(parse_sequence_file(serialize_sequence(s)) == s);
}
