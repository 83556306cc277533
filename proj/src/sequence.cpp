#include "mrsim/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mrsim/errors.hpp"
#include "textfmt.hpp"

namespace mrsim {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMilli = 1e-3;

double trapezoid_integral(double a, double ramp, double flat, double t) {
    if (ramp <= 0) return a * std::min(t, flat);
    if (t <= ramp) return a * t * t / (2 * ramp);
    if (t <= ramp + flat) return a * (ramp / 2 + (t - ramp));
    double u = std::min(t - ramp - flat, ramp);
    return a * (ramp / 2 + flat + u - u * u / (2 * ramp));
}

}  // namespace

Vec3 GradientWaveform::integral(double t, double duration) const {
    t = std::clamp(t, 0.0, duration);
    Vec3 out;
    switch (shape) {
        case GradShape::constant:
            out = amp_mT_per_m * t;
            break;
        case GradShape::trapezoid:
            for (int a = 0; a < 3; ++a) out[a] = trapezoid_integral(amp_mT_per_m[a], ramp_s, flat_s, t);
            break;
        case GradShape::sampled: {
            const auto& s = samples_mT_per_m;
            if (s.empty()) break;
            if (s.size() == 1 || duration <= 0) {
                out = s[0] * t;
                break;
            }
            const double h = duration / static_cast<double>(s.size() - 1);
            for (std::size_t i = 0; i + 1 < s.size(); ++i) {
                const double t0 = h * static_cast<double>(i);
                if (t <= t0) break;
                const double w = std::min(t - t0, h);
                // linear piece from s[i] to s[i+1], integrated over [0, w]
                out += s[i] * w + (s[i + 1] - s[i]) * (w * w / (2 * h));
            }
            break;
        }
    }
    return out * kMilli;
}

bool GradientWaveform::is_zero() const {
    switch (shape) {
        case GradShape::constant:
            return amp_mT_per_m == Vec3{};
        case GradShape::trapezoid:
            return amp_mT_per_m == Vec3{} || (ramp_s <= 0 && flat_s <= 0);
        case GradShape::sampled:
            for (const auto& v : samples_mT_per_m)
                if (!(v == Vec3{})) return false;
            return true;
    }
    return true;
}

bool GradientWaveform::is_monotone() const {
    if (shape != GradShape::sampled) return true;
    for (int a = 0; a < 3; ++a) {
        bool pos = false, neg = false;
        for (const auto& v : samples_mT_per_m) {
            pos |= v[a] > 0;
            neg |= v[a] < 0;
        }
        if (pos && neg) return false;
    }
    return true;
}

double AcquisitionSpec::sample_time(int i, double duration) const {
    if (n_samples <= 1) return 0.0;
    return static_cast<double>(i) * duration / static_cast<double>(n_samples - 1);
}

HardPulse ElementarySequence::pulse() const { return {rf_flip_deg * kDeg, rf_phase_deg * kDeg}; }

Vec3 ElementarySequence::k_moment(double gamma) const { return gradient.integral(duration_s, duration_s) * gamma; }

Vec3 ElementarySequence::k_moment_until(double t, double gamma) const {
    return gradient.integral(t, duration_s) * gamma;
}

double Sequence::total_duration() const {
    double t = 0;
    for (const auto& e : elements) t += e.duration_s;
    return t;
}

std::vector<std::size_t> Sequence::acquisition_elements() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < elements.size(); ++i)
        if (elements[i].acquisition.enabled) idx.push_back(i);
    return idx;
}

double readout_gradient(double fov, int n, double dt, double gamma) {
    if (!(fov > 0) || n < 2 || !(dt > 0) || !(gamma > 0))
        throw InvalidParameter("readout_gradient needs fov > 0, n >= 2, dt > 0");
    return 2.0 * std::numbers::pi * (n - 1) / (gamma * fov * dt);
}

double ImagingParams::readout_duration(double gamma) const {
    if (readout_mT_per_m > 0) return 2.0 * std::numbers::pi * (nx - 1) / (gamma * fov_m * readout_mT_per_m * kMilli);
    if (readout_s > 0) return readout_s;
    throw InvalidParameter("imaging parameters need a readout gradient or duration");
}

double ImagingParams::readout_amplitude_mT_per_m(double gamma) const {
    if (readout_mT_per_m > 0) return readout_mT_per_m;
    return readout_gradient(fov_m, nx, readout_duration(gamma), gamma) / kMilli;
}

double ImagingParams::dk_x() const { return 2.0 * std::numbers::pi / fov_m; }
double ImagingParams::dk_y() const { return 2.0 * std::numbers::pi / fov_m; }

namespace {

void check_params(const ImagingParams& p) {
    if (!(p.fov_m > 0) || p.nx < 2 || p.ny < 1 || !(p.lobe_s > 0))
        throw InvalidParameter("imaging parameters out of range");
}

ElementarySequence pulse_el(double flip_deg, double phase_deg) {
    ElementarySequence e;
    e.rf_flip_deg = flip_deg;
    e.rf_phase_deg = phase_deg;
    return e;
}

// Constant lobe producing the given k moment (rad/m) over dur.
ElementarySequence lobe(ElementarySequence e, const Vec3& k, double dur) {
    e.duration_s = dur;
    e.gradient.amp_mT_per_m = k / (kGamma * dur * kMilli);
    return e;
}

void filler(Sequence& s, double dur, const char* what) {
    if (dur < -1e-12) throw TimingInfeasible(std::string("negative interval before ") + what);
    if (dur > 1e-12) {
        ElementarySequence e;
        e.duration_s = dur;
        s.elements.push_back(e);
    }
}

ElementarySequence readout(const ImagingParams& p, double sign, int row, int echo) {
    ElementarySequence e;
    e.duration_s = p.readout_duration();
    e.gradient.amp_mT_per_m = {sign * p.readout_amplitude_mT_per_m(), 0, 0};
    e.acquisition = {true, p.nx, row, echo, sign < 0};
    return e;
}

double ky_of_row(const ImagingParams& p, int row) { return (row - p.ny / 2) * p.dk_y(); }

// Time from readout start to the k = 0 sample.
double center_offset(const ImagingParams& p) {
    return p.readout_duration() * (p.nx / 2) / static_cast<double>(p.nx - 1);
}

}  // namespace

Sequence build_spin_echo(const ImagingParams& p) {
    check_params(p);
    Sequence s;
    s.name = "spin-echo";
    const double kx0 = (p.nx / 2) * p.dk_x();
    const double t_ro = p.readout_duration();
    const double t_acq = p.te_s - center_offset(p);
    for (int row = 0; row < p.ny; ++row) {
        double t = 0;
        // the 180 mirrors the lobe: +kx0 lands on -kx0, -ky on +ky
        s.elements.push_back(lobe(pulse_el(90, p.excitation_phase_deg), {kx0, -ky_of_row(p, row), 0}, p.lobe_s));
        t += p.lobe_s;
        filler(s, p.te_s / 2 - t, "refocusing pulse");
        t = p.te_s / 2;
        auto refocus = pulse_el(180, p.refocus_phase_deg);
        refocus.duration_s = t_acq - t;
        if (refocus.duration_s < -1e-12) throw TimingInfeasible("readout starts before the refocusing pulse");
        s.elements.push_back(refocus);
        s.elements.push_back(readout(p, 1.0, row, 0));
        filler(s, p.tr_s - (t_acq + t_ro), "next repetition");
    }
    return s;
}

Sequence build_tse(const ImagingParams& p, const std::vector<double>& te) {
    check_params(p);
    const int tf = static_cast<int>(te.size());
    if (tf < 1 || p.ny % tf != 0) throw InvalidParameter("turbo factor must divide the row count");
    Sequence s;
    s.name = "tse";
    const double kx0 = (p.nx / 2) * p.dk_x();
    const double t_ro = p.readout_duration();
    for (int shot = 0; shot < p.ny / tf; ++shot) {
        s.elements.push_back(lobe(pulse_el(90, p.excitation_phase_deg), {kx0, 0, 0}, p.lobe_s));
        double t = p.lobe_s;
        double prev_te = 0;
        for (int e = 0; e < tf; ++e) {
            const int row = shot * tf + e;
            const double t180 = 0.5 * (prev_te + te[e]);
            filler(s, t180 - t, "refocusing pulse");
            s.elements.push_back(lobe(pulse_el(180, p.refocus_phase_deg), {0, ky_of_row(p, row), 0}, p.lobe_s));
            t = t180 + p.lobe_s;
            const double t_acq = te[e] - center_offset(p);
            filler(s, t_acq - t, "readout");
            s.elements.push_back(readout(p, 1.0, row, e));
            t = t_acq + t_ro;
            // back to +kx0 and ky = 0 before the next refocusing pulse
            s.elements.push_back(lobe(ElementarySequence{}, {p.dk_x(), -ky_of_row(p, row), 0}, p.lobe_s));
            t += p.lobe_s;
            prev_te = te[e];
        }
        filler(s, p.tr_s - t, "next shot");
    }
    return s;
}

Sequence build_cpmg(const ImagingParams& p, int n_echoes, double esp) {
    check_params(p);
    if (n_echoes < 1 || !(esp > 0)) throw InvalidParameter("cpmg needs n_echoes >= 1 and a positive spacing");
    Sequence s;
    s.name = "cpmg";
    const double kx0 = (p.nx / 2) * p.dk_x();
    const double t_ro = p.readout_duration();
    for (int row = 0; row < p.ny; ++row) {
        s.elements.push_back(lobe(pulse_el(90, p.excitation_phase_deg), {kx0, 0, 0}, p.lobe_s));
        double t = p.lobe_s;
        for (int e = 0; e < n_echoes; ++e) {
            const double te = esp * (e + 1);
            const double t180 = te - esp / 2;
            filler(s, t180 - t, "refocusing pulse");
            s.elements.push_back(lobe(pulse_el(180, p.refocus_phase_deg), {0, ky_of_row(p, row), 0}, p.lobe_s));
            t = t180 + p.lobe_s;
            const double t_acq = te - center_offset(p);
            filler(s, t_acq - t, "readout");
            s.elements.push_back(readout(p, 1.0, row, e));
            t = t_acq + t_ro;
            s.elements.push_back(lobe(ElementarySequence{}, {p.dk_x(), -ky_of_row(p, row), 0}, p.lobe_s));
            t += p.lobe_s;
        }
        filler(s, p.tr_s - t, "next shot");
    }
    return s;
}

Sequence build_gradient_epi(const ImagingParams& p, int n_echoes, int interleaves) {
    check_params(p);
    if (n_echoes < 1 || n_echoes > p.ny) throw InvalidParameter("echo count must be in [1, ny]");
    if (interleaves < 0) throw InvalidParameter("interleave count must be >= 0");
    // Row lists per shot: contiguous segments, or rows s, s + S, s + 2S, ... when interleaved.
    std::vector<std::vector<int>> shots;
    if (interleaves == 0) {
        for (int r0 = 0; r0 < p.ny; r0 += n_echoes) {
            shots.emplace_back();
            for (int r = r0; r < std::min(p.ny, r0 + n_echoes); ++r) shots.back().push_back(r);
        }
    } else {
        for (int sh = 0; sh < interleaves; ++sh) {
            shots.emplace_back();
            for (int e = 0; e < n_echoes && sh + e * interleaves < p.ny; ++e) shots.back().push_back(sh + e * interleaves);
        }
    }
    Sequence s;
    s.name = "gradient-epi";
    const double kx0 = (p.nx / 2) * p.dk_x();
    const double t_ro = p.readout_duration();
    for (const auto& rows : shots) {
        if (rows.empty()) continue;
        const int ne = static_cast<int>(rows.size());
        // the line nearest ky = 0 crosses k = 0 at TE
        int ec = 0;
        for (int e = 1; e < ne; ++e)
            if (std::abs(rows[e] - p.ny / 2) < std::abs(rows[ec] - p.ny / 2)) ec = e;
        const double t_first = p.te_s - ec * (t_ro + p.blip_s) - center_offset(p);
        s.elements.push_back(lobe(pulse_el(90, p.excitation_phase_deg), {-kx0, ky_of_row(p, rows[0]), 0}, p.lobe_s));
        filler(s, t_first - p.lobe_s, "first readout line");
        double t = t_first;
        for (int e = 0; e < ne; ++e) {
            const double sign = (e % 2 == 0) ? 1.0 : -1.0;
            s.elements.push_back(readout(p, sign, rows[e], e));
            t += t_ro;
            if (e + 1 < ne) {
                s.elements.push_back(lobe(ElementarySequence{}, {0, (rows[e + 1] - rows[e]) * p.dk_y(), 0}, p.blip_s));
                t += p.blip_s;
            }
        }
        filler(s, p.tr_s - t, "next shot");
    }
    return s;
}

Sequence build_pulse_train(const std::vector<HardPulse>& pulses, double interval_s, const Vec3& grad) {
    if (!(interval_s > 0)) throw InvalidParameter("pulse interval must be positive");
    Sequence s;
    s.name = "pulse-train";
    for (const auto& hp : pulses) {
        ElementarySequence e = pulse_el(hp.alpha / kDeg, hp.phi / kDeg);
        e.duration_s = interval_s;
        e.gradient.amp_mT_per_m = grad;
        s.elements.push_back(e);
    }
    return s;
}

std::vector<double> frank_phases(int m) {
    std::vector<double> ph;
    ph.reserve(static_cast<std::size_t>(m) * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) ph.push_back(2.0 * std::numbers::pi * ((i * j) % m) / m);
    return ph;
}

// ---------------------------------------------------------------------------------------------

std::string serialize_sequence(const Sequence& s) {
    using textfmt::format_double;
    std::ostringstream os;
    os << "[sequence]\nname = " << (s.name.empty() ? "unnamed" : s.name) << "\nrepetitions = " << s.repetitions << "\n";
    for (const auto& e : s.elements) {
        os << "\n[elementary]\nduration_s = " << format_double(e.duration_s) << "\n";
        if (e.rf_flip_deg != 0 || e.rf_phase_deg != 0)
            os << "rf_flip_deg = " << format_double(e.rf_flip_deg) << "\nrf_phase_deg = "
               << format_double(e.rf_phase_deg) << "\n";
        const auto& g = e.gradient;
        if (g.shape == GradShape::sampled) {
            os << "grad_shape = sampled\ngrad_samples_mT_per_m = ";
            for (std::size_t i = 0; i < g.samples_mT_per_m.size(); ++i)
                os << (i ? "; " : "") << textfmt::format_vec3(g.samples_mT_per_m[i]);
            os << "\n";
        } else {
            const char* ax[3] = {"x", "y", "z"};
            for (int a = 0; a < 3; ++a)
                if (g.amp_mT_per_m[a] != 0)
                    os << "grad_" << ax[a] << "_mT_per_m = " << format_double(g.amp_mT_per_m[a]) << "\n";
            if (g.shape == GradShape::trapezoid)
                os << "grad_shape = trapezoid\nramp_s = " << format_double(g.ramp_s)
                   << "\nflat_s = " << format_double(g.flat_s) << "\n";
        }
        const auto& a = e.acquisition;
        if (a.enabled) {
            os << "acquire = " << a.n_samples << "\n";
            if (a.row >= 0) os << "acquire_row = " << a.row << "\n";
            if (a.echo != 0) os << "acquire_echo = " << a.echo << "\n";
            if (a.reversed) os << "acquire_reversed = 1\n";
        }
    }
    return os.str();
}

namespace {

const std::vector<std::string> kElementaryKeys = {
    "duration_s", "rf_flip_deg", "rf_phase_deg", "grad_x_mT_per_m", "grad_y_mT_per_m", "grad_z_mT_per_m",
    "grad_shape", "ramp_s", "flat_s", "grad_samples_mT_per_m", "acquire", "acquire_row", "acquire_echo",
    "acquire_reversed"};
const std::vector<std::string> kShapedKeys = {"samples", "sample_dt_s", "grad_x_mT_per_m", "grad_y_mT_per_m",
                                              "grad_z_mT_per_m"};

std::vector<cplx> read_envelope_uT(const std::filesystem::path& path, int line, int col) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open RF sample file '" + path.string() + "'", line, col);
    std::vector<cplx> env;
    std::string l;
    int ln = 0;
    while (std::getline(in, l)) {
        ++ln;
        if (auto h = l.find('#'); h != std::string::npos) l.resize(h);
        std::istringstream is(l);
        double re, im;
        if (!(is >> re)) continue;
        if (!(is >> im)) throw ParseError("RF sample file '" + path.string() + "' line " + std::to_string(ln) +
                                              ": expected two columns", line, col);
        env.emplace_back(re * 1e-6, im * 1e-6);
    }
    return env;
}

ElementarySequence parse_elementary(const textfmt::Block& b) {
    using namespace textfmt;
    ElementarySequence e;
    bool have_duration = false;
    bool trapezoid = false, sampled = false;
    for (const auto& en : b.entries) {
        const auto num = [&] { return to_double(en.value, en.line, en.value_col); };
        const auto integer = [&] { return to_int(en.value, en.line, en.value_col); };
        if (en.key == "duration_s") {
            e.duration_s = num();
            if (e.duration_s < 0) throw ParseError("duration must be non-negative", en.line, en.value_col);
            have_duration = true;
        } else if (en.key == "rf_flip_deg") {
            e.rf_flip_deg = num();
        } else if (en.key == "rf_phase_deg") {
            e.rf_phase_deg = num();
        } else if (en.key == "grad_x_mT_per_m") {
            e.gradient.amp_mT_per_m.x = num();
        } else if (en.key == "grad_y_mT_per_m") {
            e.gradient.amp_mT_per_m.y = num();
        } else if (en.key == "grad_z_mT_per_m") {
            e.gradient.amp_mT_per_m.z = num();
        } else if (en.key == "grad_shape") {
            if (en.value == "trapezoid") trapezoid = true;
            else if (en.value == "sampled") sampled = true;
            else if (en.value != "constant")
                throw ParseError("grad_shape must be constant, trapezoid or sampled", en.line, en.value_col);
        } else if (en.key == "ramp_s") {
            e.gradient.ramp_s = num();
        } else if (en.key == "flat_s") {
            e.gradient.flat_s = num();
        } else if (en.key == "grad_samples_mT_per_m") {
            std::size_t start = 0;
            while (start <= en.value.size()) {
                std::size_t semi = en.value.find(';', start);
                std::string part = en.value.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
                auto first = part.find_first_not_of(' ');
                auto last = part.find_last_not_of(' ');
                if (first == std::string::npos) throw ParseError("empty gradient sample", en.line, en.value_col);
                e.gradient.samples_mT_per_m.push_back(to_vec3(part.substr(first, last - first + 1), en.line,
                                                              en.value_col + static_cast<int>(start + first)));
                if (semi == std::string::npos) break;
                start = semi + 1;
            }
        } else if (en.key == "acquire") {
            e.acquisition.enabled = true;
            e.acquisition.n_samples = integer();
            if (e.acquisition.n_samples < 1) throw ParseError("acquire needs N >= 1", en.line, en.value_col);
        } else if (en.key == "acquire_row") {
            e.acquisition.row = integer();
        } else if (en.key == "acquire_echo") {
            e.acquisition.echo = integer();
        } else if (en.key == "acquire_reversed") {
            e.acquisition.reversed = integer() != 0;
        } else {
            unknown_key(en, kElementaryKeys);
        }
    }
    if (!have_duration) throw ParseError("elementary block without duration_s", b.line, 1);
    if (trapezoid && sampled) throw ParseError("conflicting grad_shape", b.line, 1);
    if (trapezoid) {
        e.gradient.shape = GradShape::trapezoid;
        if (2 * e.gradient.ramp_s + e.gradient.flat_s > e.duration_s * (1 + 1e-12))
            throw ParseError("trapezoid longer than its elementary sequence", b.line, 1);
    }
    if (sampled) {
        e.gradient.shape = GradShape::sampled;
        if (e.gradient.samples_mT_per_m.empty()) throw ParseError("sampled gradient without samples", b.line, 1);
    }
    if (e.acquisition.enabled && !(e.duration_s > 0))
        throw ParseError("acquisition needs a positive duration", b.line, 1);
    return e;
}

void parse_shaped(const textfmt::Block& b, const std::filesystem::path& base, Sequence& s) {
    using namespace textfmt;
    std::vector<cplx> env;
    double dt = -1;
    Vec3 g{};
    bool have_samples = false;
    for (const auto& en : b.entries) {
        if (en.key == "samples") {
            std::filesystem::path p(en.value);
            if (p.is_relative()) p = base / p;
            env = read_envelope_uT(p, en.line, en.value_col);
            have_samples = true;
        } else if (en.key == "sample_dt_s") {
            dt = to_double(en.value, en.line, en.value_col);
            if (!(dt > 0)) throw ParseError("sample_dt_s must be positive", en.line, en.value_col);
        } else if (en.key == "grad_x_mT_per_m") {
            g.x = to_double(en.value, en.line, en.value_col);
        } else if (en.key == "grad_y_mT_per_m") {
            g.y = to_double(en.value, en.line, en.value_col);
        } else if (en.key == "grad_z_mT_per_m") {
            g.z = to_double(en.value, en.line, en.value_col);
        } else {
            unknown_key(en, kShapedKeys);
        }
    }
    if (!have_samples || dt <= 0) throw ParseError("rf_shaped needs samples and sample_dt_s", b.line, 1);
    for (const cplx& b1 : env) {
        ElementarySequence e;
        e.rf_flip_deg = kGamma * std::abs(b1) * dt / kDeg;
        e.rf_phase_deg = std::arg(b1) / kDeg;
        e.duration_s = dt;
        e.gradient.amp_mT_per_m = g;
        s.elements.push_back(e);
    }
}

}  // namespace

Sequence parse_sequence_file(std::string_view text, const std::filesystem::path& base_dir) {
    using namespace textfmt;
    Sequence s;
    for (const auto& b : parse_blocks(text)) {
        if (b.name == "elementary") {
            s.elements.push_back(parse_elementary(b));
        } else if (b.name == "rf_shaped") {
            parse_shaped(b, base_dir, s);
        } else if (b.name == "sequence") {
            for (const auto& en : b.entries) {
                if (en.key == "name") s.name = en.value;
                else if (en.key == "repetitions") s.repetitions = to_int(en.value, en.line, en.value_col);
                else throw ParseError("unknown key '" + en.key + "'", en.line, en.key_col);
            }
        } else {
            throw ParseError("unknown block [" + b.name + "]", b.line, 1);
        }
    }
    if (s.elements.empty()) throw ParseError("sequence has no elementary blocks", 1, 1);
    return s;
}

Sequence load_sequence(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sequence file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_sequence_file(ss.str(), path.parent_path());
}

}  // namespace mrsim
