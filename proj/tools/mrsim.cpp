#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mrsim/discretization.hpp"
#include "mrsim/engine.hpp"
#include "mrsim/errors.hpp"
#include "mrsim/kt.hpp"
#include "mrsim/recon.hpp"

namespace fs = std::filesystem;
using namespace mrsim;

namespace {

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw InvalidParameter("bad number '" + item + "'");
        out.push_back(v);
    }
    return out;
}

fs::path manifest_for(const fs::path& echoes) {
    fs::path m = echoes;
    m.replace_extension(".manifest");
    return m;
}

bool is_echo_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::string magic(6, '\0');
    in.read(magic.data(), 6);
    return in && magic == "MRSIM1";
}

int cmd_simulate(const std::string& seq_f, const std::string& obj_f, const std::string& sys_f, int workers,
                 bool deterministic, std::size_t blocks, const std::string& spacing_s, const std::string& snaps_s,
                 const std::string& out_dir) {
    const Sequence seq = load_sequence(seq_f);
    const Phantom ph = load_object(obj_f);
    const SystemModel sys = sys_f.empty() ? SystemModel{} : load_system(sys_f);
    Vec3 spacing;
    if (!spacing_s.empty()) {
        const auto v = parse_list(spacing_s);
        if (v.size() != 3) throw InvalidParameter("--spacing-override needs dx,dy,dz");
        spacing = {v[0], v[1], v[2]};
    } else {
        SpacingOptions so;
        so.phantom = &ph;
        spacing = max_spacing(seq, sys, so).spacing;
    }
    RunOptions opt;
    opt.workers = workers;
    opt.blocks = blocks;
    opt.deterministic = deterministic;
    if (!snaps_s.empty()) opt.snapshot_times = parse_list(snaps_s);
    const RunResult r = run_experiment(seq, ph, sys, spacing, opt);
    fs::create_directories(out_dir);
    const fs::path ef = fs::path(out_dir) / "echoes.bin";
    write_echoes(ef, r.echoes);
    write_manifest(manifest_for(ef), r.echoes, r.metrics);
    for (std::size_t k = 0; k < r.snapshots.size(); ++k)
        write_snapshot(fs::path(out_dir) / ("snapshot_" + std::to_string(k) + ".bin"), r.snapshots[k]);
    std::cout << "spins=" << r.metrics.spins << "\nacquisitions=" << r.echoes.size() << "\nwall_s=" << r.metrics.wall_s
              << "\nthroughput_per_s=" << r.metrics.throughput << "\nkernels=" << r.metrics.kernels << "\n";
    return 0;
}

int cmd_compare(const std::string& a, const std::string& b, double thr) {
    CompareResult c;
    if (is_echo_file(a)) c = compare_results(read_echoes(a), read_echoes(b), thr);
    else c = compare_snapshots(read_snapshot(a), read_snapshot(b), thr);
    std::cout << "delta_e_db=" << c.delta_e_db << "\nexceedances=" << c.exceedances << "\ncompared=" << c.compared
              << "\n";
    return 0;
}

int cmd_recon(const std::string& echoes_f, const std::string& traj_s, const std::vector<int>& size, int echo,
              const std::string& window_s, const std::string& out) {
    auto echoes = read_echoes(echoes_f);
    const fs::path man = manifest_for(echoes_f);
    if (fs::exists(man)) read_manifest(man, echoes);
    if (echo >= 0) echoes = select_echo(echoes, echo);
    const KSpaceMatrix k = assemble_kspace(echoes, parse_trajectory(traj_s), size.at(0), size.at(1));
    const ImageVolume img = reconstruct(k);
    Window w;
    if (!window_s.empty()) {
        const auto v = parse_list(window_s);
        if (v.size() != 2) throw InvalidParameter("--window needs lo,hi");
        w = {v[0], v[1]};
    }
    w = export_image(img, out, w);
    fs::path ph = out;
    ph += ".phase.raw";
    write_raw_grid(ph, img.nx, img.ny, img.phase);
    fs::path kr = out;
    kr += ".kspace.raw";
    write_raw_grid(kr, k.nx, k.ny, k.data);
    std::cout << "image=" << out << "\nwindow_lo=" << w.lo << "\nwindow_hi=" << w.hi << "\n";
    return 0;
}

int cmd_kt(const std::string& seq_f, const std::string& tissue_s, bool qualitative, const std::string& out) {
    const Sequence seq = load_sequence(seq_f);
    std::ofstream os(out);
    if (!os) throw IoError("cannot write " + out);
    if (qualitative) {
        QualitativeOptions o;
        o.record_trace = true;
        const auto q = trace_qualitative(seq, o);
        export_kt_diagram(os, q.trace);
        std::cout << "rows=" << q.trace.size() << "\nk_max_x=" << q.k_max.x << "\n";
        return 0;
    }
    const auto v = parse_list(tissue_s);
    if (v.size() != 2) throw InvalidParameter("--tissue needs t1,t2");
    const RelaxationParams r{v[0], v[1], 1.0};
    check_relaxation(r);
    KtRunOptions o;
    o.record_trace = true;
    const auto res = run_kt(seq, r, box_spectrum({}, {}), o);
    export_kt_diagram(os, res.trace);
    std::cout << "rows=" << res.trace.size() << "\ndk_x=" << res.dk.x << "\n";
    return 0;
}

int cmd_fit(const std::string& series_f) {
    std::ifstream in(series_f);
    if (!in) throw IoError("cannot open " + series_f);
    std::vector<double> t, I;
    std::string line;
    while (std::getline(in, line)) {
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ls(line);
        double a, b;
        if (ls >> a >> b) {
            t.push_back(a);
            I.push_back(b);
        }
    }
    const FitResult f = cpmg_fit(t, I);
    std::cout.precision(12);
    std::cout << "rho=" << f.rho << "\nt2_s=" << f.t2 << "\nresidual_norm=" << f.residual_norm
              << "\niterations=" << f.iterations << "\n";
    return 0;
}

int cmd_spacing(const std::string& seq_f, const std::string& sys_f, const std::string& obj_f, double safety,
                double obj_grad, int levels, const std::string& tissue_s) {
    const Sequence seq = load_sequence(seq_f);
    const SystemModel sys = sys_f.empty() ? SystemModel{} : load_system(sys_f);
    Phantom ph;
    SpacingOptions so;
    so.safety = safety;
    so.object_delta_omega_gradient = obj_grad;
    if (!obj_f.empty()) {
        ph = load_object(obj_f);
        so.phantom = &ph;
    }
    SpacingReport rep = max_spacing(seq, sys, so);
    if (levels > 0) {
        const auto v = parse_list(tissue_s);
        if (v.size() != 2) throw InvalidParameter("steady-state pruning needs --tissue t1,t2");
        KtRunOptions o;
        o.record_trace = true;
        const auto res = run_kt(seq, {v[0], v[1], 1.0}, box_spectrum({}, {}), o);
        const PruneResult pr = steady_state_prune(res.trace, levels);
        rep.pruned = pr.dropped;
        std::cout << "k_pruned_x=" << pr.k_pruned << "\nk_unpruned_x=" << pr.k_unpruned << "\n";
    }
    std::cout << rep.to_text() << rep.to_key_values();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spin-based MR imaging simulator"};
    app.require_subcommand(1);

    std::string seq_f, obj_f, sys_f, out, spacing_s, snaps_s, ref_f, test_f, echoes_f, traj_s, window_s, tissue_s,
        series_f;
    int workers = 1, echo = -1, levels = 0;
    std::size_t blocks = 0;
    bool deterministic = false, qualitative = false;
    double thr = 1e-6, safety = 0.8, obj_grad = 0;
    std::vector<int> size;

    auto* sim = app.add_subcommand("simulate", "run the spin engine");
    sim->add_option("--sequence", seq_f)->required();
    sim->add_option("--object", obj_f)->required();
    sim->add_option("--system", sys_f);
    sim->add_option("--workers", workers)->check(CLI::PositiveNumber);
    sim->add_option("--blocks", blocks);
    sim->add_flag("--deterministic", deterministic);
    sim->add_option("--spacing-override", spacing_s, "dx,dy,dz in m");
    sim->add_option("--snapshot", snaps_s, "t1,t2,... in s");
    sim->add_option("--out", out)->required();

    auto* cmp = app.add_subcommand("compare", "energy of the difference between two runs");
    cmp->add_option("--ref", ref_f)->required();
    cmp->add_option("--test", test_f)->required();
    cmp->add_option("--rel-threshold", thr);

    auto* rec = app.add_subcommand("recon", "assemble k-space and reconstruct");
    rec->add_option("--echoes", echoes_f)->required();
    rec->add_option("--trajectory", traj_s)->required();
    rec->add_option("--size", size)->expected(2)->required();
    rec->add_option("--echo", echo, "use only acquisitions with this echo index");
    rec->add_option("--window", window_s, "lo,hi");
    rec->add_option("--out", out)->default_val("image.pgm");

    auto* kt = app.add_subcommand("kt-diagram", "K-t configuration trace as CSV");
    kt->add_option("--sequence", seq_f)->required();
    kt->add_option("--tissue", tissue_s, "t1,t2 in s");
    kt->add_flag("--qualitative", qualitative);
    kt->add_option("--out", out)->required();

    auto* fit = app.add_subcommand("fit-t2", "mono-exponential fit of 't I' lines");
    fit->add_option("--series", series_f)->required();

    auto* sp = app.add_subcommand("spacing", "spin spacing bound for a sequence");
    sp->add_option("--sequence", seq_f)->required();
    sp->add_option("--system", sys_f);
    sp->add_option("--object", obj_f);
    sp->add_option("--safety", safety);
    sp->add_option("--delta-omega-gradient", obj_grad, "object off-resonance gradient bound, rad/(s*m)");
    sp->add_option("--levels", levels, "gray levels for steady-state pruning");
    sp->add_option("--tissue", tissue_s, "t1,t2 in s");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim) return cmd_simulate(seq_f, obj_f, sys_f, workers, deterministic, blocks, spacing_s, snaps_s, out);
        if (*cmp) return cmd_compare(ref_f, test_f, thr);
        if (*rec) return cmd_recon(echoes_f, traj_s, size, echo, window_s, out);
        if (*kt) return cmd_kt(seq_f, tissue_s, qualitative, out);
        if (*fit) return cmd_fit(series_f);
        if (*sp) return cmd_spacing(seq_f, sys_f, obj_f, safety, obj_grad, levels, tissue_s);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
