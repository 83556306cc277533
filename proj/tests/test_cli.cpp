#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "mrsim/recon.hpp"
#include "mrsim/sequence.hpp"

namespace fs = std::filesystem;
using namespace mrsim;

namespace {

struct Out {
    int status = -1;
    std::map<std::string, std::string> kv;
    std::string text;
};

std::string cli() {
    const char* p = std::getenv("MRSIM_CLI");
    return p ? p : "";
}

Out sh(const std::string& args) {
    Out o;
    const std::string cmd = cli() + " " + args + " 2>&1";
    FILE* f = popen(cmd.c_str(), "r");
    REQUIRE(f);
    char buf[512];
    while (std::fgets(buf, sizeof buf, f)) o.text += buf;
    const int st = pclose(f);
    o.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    std::istringstream is(o.text);
    std::string line;
    while (std::getline(is, line))
        if (auto eq = line.find('='); eq != std::string::npos) o.kv[line.substr(0, eq)] = line.substr(eq + 1);
    return o;
}

struct Workdir {
    fs::path dir;
    Workdir() {
        dir = fs::temp_directory_path() / ("mrsim_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Workdir() { fs::remove_all(dir); }
    std::string file(const std::string& name, const std::string& text) const {
        const fs::path p = dir / name;
        std::ofstream(p) << text;
        return p.string();
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

ImagingParams params() {
    ImagingParams p;
    p.fov_m = 0.128;
    p.nx = 16;
    p.ny = 16;
    p.te_s = 0.03;
    p.tr_s = 0.5;
    p.readout_mT_per_m = 2.349;
    return p;
}

const char* kBox = R"([box]
origin_m = -0.02, -0.03, 0
size_m = 0.04, 0.06, 0
m0 = 1
t1_s = 1
t2_s = 0.1
)";

}  // namespace

TEST_CASE("simulate, compare and recon from the command line") {
    if (cli().empty()) {
        MESSAGE("MRSIM_CLI not set; skipping");
        return;
    }
    Workdir w;
    const auto seq = w.file("se.seq", serialize_sequence(build_spin_echo(params())));
    const auto obj = w.file("box.obj", kBox);
    const std::string common = " --sequence " + seq + " --object " + obj + " --spacing-override 0.002,0.002,1";

    const Out a = sh("simulate" + common + " --workers 1 --deterministic --out " + w.path("a") + " --snapshot 0.01");
    REQUIRE(a.status == 0);
    CHECK(a.kv.at("acquisitions") == "16");
    CHECK(std::stoul(a.kv.at("spins")) == 20 * 30);
    CHECK(fs::exists(w.path("a/echoes.bin")));
    CHECK(fs::exists(w.path("a/echoes.manifest")));
    CHECK(fs::exists(w.path("a/snapshot_0.bin")));

    const Out b = sh("simulate" + common + " --workers 4 --blocks 16 --deterministic --out " + w.path("b"));
    REQUIRE(b.status == 0);
    const Out c = sh("compare --ref " + w.path("a/echoes.bin") + " --test " + w.path("b/echoes.bin"));
    REQUIRE(c.status == 0);
    CHECK(std::stod(c.kv.at("delta_e_db")) <= -200.0);
    CHECK(c.kv.at("compared") != "0");

    const Out s = sh("compare --ref " + w.path("a/snapshot_0.bin") + " --test " + w.path("a/snapshot_0.bin"));
    CHECK(s.status == 0);
    CHECK(std::stod(s.kv.at("delta_e_db")) == -400.0);

    const std::string img = w.path("img.pgm");
    const Out r = sh("recon --echoes " + w.path("a/echoes.bin") + " --trajectory se --size 16 16 --out " + img);
    REQUIRE(r.status == 0);
    CHECK(fs::exists(img));
    CHECK(fs::exists(img + ".raw"));
    CHECK(fs::exists(img + ".phase.raw"));
    const RawGrid g = read_raw_grid(img + ".raw");
    REQUIRE(g.nx == 16);
    // box of 5 x 7.5 pixels centred near the middle: centre bright, corner dark
    CHECK(g.data[8 * 16 + 8].real() > 10 * g.data[0].real());

    const Out bad = sh("recon --echoes " + w.path("a/echoes.bin") + " --trajectory se --size 16 8 --out " + img);
    CHECK(bad.status == 1);
    CHECK(bad.text.find("error:") != std::string::npos);
}

TEST_CASE("kt-diagram, fit-t2 and spacing") {
    if (cli().empty()) {
        MESSAGE("MRSIM_CLI not set; skipping");
        return;
    }
    Workdir w;
    const auto seq = w.file("se.seq", serialize_sequence(build_spin_echo(params())));

    const Out q = sh("kt-diagram --sequence " + seq + " --qualitative --out " + w.path("q.csv"));
    REQUIRE(q.status == 0);
    CHECK(std::stoul(q.kv.at("rows")) > 0);
    std::ifstream csv(w.path("q.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(!header.empty());

    const Out k = sh("kt-diagram --sequence " + seq + " --tissue 1,0.1 --out " + w.path("k.csv"));
    CHECK(k.status == 0);
    const Out kbad = sh("kt-diagram --sequence " + seq + " --tissue 1 --out " + w.path("k.csv"));
    CHECK(kbad.status == 1);

    std::string series;
    for (int i = 1; i <= 10; ++i) {
        const double t = 0.02 * i;
        char line[64];
        std::snprintf(line, sizeof line, "%.17g %.17g\n", t, 0.8 * std::exp(-t / 0.2));
        series += line;
    }
    const Out f = sh("fit-t2 --series " + w.file("s.txt", "# t I\n" + series));
    REQUIRE(f.status == 0);
    CHECK(std::abs(std::stod(f.kv.at("t2_s")) - 0.2) < 1e-8);
    CHECK(std::abs(std::stod(f.kv.at("rho")) - 0.8) < 1e-8);
    const Out flat = sh("fit-t2 --series " + w.file("c.txt", "0.1 1\n0.2 1\n0.3 1\n"));
    CHECK(flat.status == 1);

    const Out sp = sh("spacing --sequence " + seq);
    REQUIRE(sp.status == 0);
    CHECK(!sp.text.empty());

    CHECK(sh("").status != 0);
    CHECK(sh("simulate --sequence " + seq).status != 0);
}
