#include "mrsim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <tuple>

#include "mrsim/discretization.hpp"
#include "mrsim/errors.hpp"
#include "mrsim/log.hpp"

namespace mrsim {

SequenceTables precompute_sequence_tables(const Sequence& seq, const FrameContext& ctx) {
    SequenceTables t;
    std::map<std::pair<double, double>, std::size_t> memo;
    std::size_t acq = 0;
    for (const auto& e : seq.elements) {
        ElementTable et;
        et.duration = e.duration_s;
        if (e.has_pulse()) {
            const HardPulse p = e.pulse();
            auto [it, fresh] = memo.try_emplace({p.alpha, p.phi}, t.matrices.size());
            if (fresh) t.matrices.push_back(hard_pulse_matrix(p));
            else ++t.pulse_memo_hits;
            et.has_pulse = true;
            et.matrix = it->second;
        }
        if (e.acquisition.enabled) {
            et.acquire = true;
            et.acquisition = acq++;
            et.sample_offset = t.total_samples;
            double prev = 0;
            Vec3 mprev = e.k_moment_until(0.0, ctx.gamma);
            for (int i = 0; i < e.acquisition.n_samples; ++i) {
                const double ti = e.acquisition.sample_time(i, e.duration_s);
                const Vec3 mi = e.k_moment_until(ti, ctx.gamma);
                et.step_dt.push_back(ti - prev);
                et.step_moment.push_back(mi - mprev);
                prev = ti;
                mprev = mi;
            }
            et.step_dt.push_back(e.duration_s - prev);
            et.step_moment.push_back(e.k_moment(ctx.gamma) - mprev);
            t.total_samples += static_cast<std::size_t>(e.acquisition.n_samples);
        } else {
            et.step_dt.push_back(e.duration_s);
            et.step_moment.push_back(e.k_moment(ctx.gamma));
        }
        t.total_steps += et.step_dt.size();
        t.elements.push_back(std::move(et));
    }
    return t;
}

TissueTable make_tissue_table(const SequenceTables& t, const RelaxationParams& r) {
    TissueTable tt;
    tt.e1.reserve(t.total_steps);
    tt.e2.reserve(t.total_steps);
    tt.rec.reserve(t.total_steps);
    for (const auto& e : t.elements) {
        for (double dt : e.step_dt) {
            const double e1 = std::exp(-dt / r.t1);
            tt.e1.push_back(e1);
            tt.e2.push_back(std::exp(-dt / r.t2));
            tt.rec.push_back(r.m0 * (1.0 - e1));
        }
    }
    return tt;
}

std::vector<cplx> simulate_spin(const SpinSample& spin, const Sequence& seq, double domega, cplx weight,
                                double gamma) {
    std::vector<cplx> out;
    Magnetization m = spin.m;
    const Vec3& x = spin.position;
    for (const auto& e : seq.elements) {
        if (e.has_pulse()) m = apply_hard_pulse(m, e.pulse());
        if (!e.acquisition.enabled) {
            const double theta = dot(e.k_moment(gamma), x) + domega * e.duration_s;
            m = apply_gradient_interval(m, spin.relax, theta, e.duration_s);
            continue;
        }
        double prev = 0;
        Vec3 mprev = e.k_moment_until(0.0, gamma);
        for (int i = 0; i < e.acquisition.n_samples; ++i) {
            const double ti = e.acquisition.sample_time(i, e.duration_s);
            const Vec3 mi = e.k_moment_until(ti, gamma);
            const double dt = ti - prev;
            m = apply_gradient_interval(m, spin.relax, dot(mi - mprev, x) + domega * dt, dt);
            out.push_back(weight * m.transverse());
            prev = ti;
            mprev = mi;
        }
        const double dt = e.duration_s - prev;
        m = apply_gradient_interval(m, spin.relax, dot(e.k_moment(gamma) - mprev, x) + domega * dt, dt);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------

namespace {

template <class T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t cap) : cap_(cap) {}

    void push(T v) {
        std::unique_lock lk(mu_);
        not_full_.wait(lk, [&] { return q_.size() < cap_ || closed_; });
        q_.push_back(std::move(v));
        not_empty_.notify_one();
    }

    std::optional<T> pop() {
        std::unique_lock lk(mu_);
        not_empty_.wait(lk, [&] { return !q_.empty() || closed_; });
        if (q_.empty()) return std::nullopt;
        T v = std::move(q_.front());
        q_.pop_front();
        not_full_.notify_one();
        return v;
    }

    void close() {
        std::lock_guard lk(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

private:
    std::size_t cap_;
    std::deque<T> q_;
    bool closed_ = false;
    std::mutex mu_;
    std::condition_variable not_empty_, not_full_;
};

struct Buffer {
    std::vector<double> re, im;
};

struct Job {
    std::size_t block;
    std::size_t begin, end;
    std::unique_ptr<Buffer> buf;
};

struct Done {
    std::size_t block;
    std::unique_ptr<Buffer> buf;
    std::string error;  // nonempty on failure
};

struct TissueKey {
    double t1, t2, m0;
    auto operator<=>(const TissueKey&) const = default;
};

// Per-worker state; nothing here is shared between workers.
class BlockWorker {
public:
    BlockWorker(const Sequence& seq, const SequenceTables& tables, const std::vector<SpinSample>& spins,
                const SystemModel& sys, const SimdKernels& k, const std::vector<std::size_t>& snap_boundary,
                std::vector<Snapshot>& snaps, double gamma)
        : seq_(seq), tables_(tables), spins_(spins), sys_(sys), k_(k), snap_boundary_(snap_boundary),
          snaps_(snaps), gamma_(gamma) {}

    std::size_t memo_hits = 0;

    void process(std::size_t begin, std::size_t end, Buffer& out) {
        const std::size_t n = end - begin;
        resize(n);
        const FrameContext ctx = sys_.frame(gamma_);
        bool uniform_tissue = true;
        for (std::size_t i = 0; i < n; ++i) {
            const SpinSample& s = spins_[begin + i];
            x_[i] = s.position.x;
            y_[i] = s.position.y;
            z_[i] = s.position.z;
            mx_[i] = s.m.mx;
            my_[i] = s.m.my;
            mz_[i] = s.m.mz;
            dw_[i] = spin_off_resonance(sys_.field, s.position, s.delta_omega, ctx);
            const cplx w = receive_weight(sys_.receive, s.position);
            wr_[i] = w.real();
            wi_[i] = w.imag();
            tissue_[i] = lookup({s.relax.t1, s.relax.t2, s.relax.m0});
            if (tissue_[i] != tissue_[0]) uniform_tissue = false;
        }
        std::size_t boundary = 0;
        snapshot(0, begin, n);
        std::size_t step = 0;
        for (const auto& e : tables_.elements) {
            if (e.has_pulse) k_.hard_pulse(n, mx_.data(), my_.data(), mz_.data(), tables_.matrices[e.matrix].m);
            for (std::size_t st = 0; st < e.step_dt.size(); ++st, ++step) {
                const double dt = e.step_dt[st];
                const Vec3& mom = e.step_moment[st];
                for (std::size_t i = 0; i < n; ++i) {
                    const double theta = dot(mom, Vec3{x_[i], y_[i], z_[i]}) + dw_[i] * dt;
                    c_[i] = std::cos(theta);
                    s_[i] = std::sin(theta);
                }
                if (uniform_tissue) {
                    const TissueTable& t = *tissue_[0];
                    std::fill_n(e1_.begin(), n, t.e1[step]);
                    std::fill_n(e2_.begin(), n, t.e2[step]);
                    std::fill_n(rec_.begin(), n, t.rec[step]);
                } else {
                    for (std::size_t i = 0; i < n; ++i) {
                        e1_[i] = tissue_[i]->e1[step];
                        e2_[i] = tissue_[i]->e2[step];
                        rec_[i] = tissue_[i]->rec[step];
                    }
                }
                k_.rotate_relax(n, mx_.data(), my_.data(), mz_.data(), c_.data(), s_.data(), e2_.data(), e1_.data(),
                                rec_.data());
                if (e.acquire && st + 1 < e.step_dt.size()) {
                    const std::size_t o = e.sample_offset + st;
                    k_.accumulate(n, mx_.data(), my_.data(), wr_.data(), wi_.data(), &out.re[o], &out.im[o]);
                }
            }
            snapshot(++boundary, begin, n);
        }
        (void)seq_;
    }

private:
    void resize(std::size_t n) {
        for (auto* v : {&x_, &y_, &z_, &mx_, &my_, &mz_, &dw_, &wr_, &wi_, &c_, &s_, &e1_, &e2_, &rec_}) v->resize(n);
        tissue_.resize(n);
    }

    const TissueTable* lookup(const TissueKey& key) {
        auto it = cache_.find(key);
        if (it != cache_.end()) {
            ++memo_hits;
            return it->second.get();
        }
        if (cache_.size() >= 4096) cache_.clear();  // affine T1/T2 can give one tissue per spin
        auto tt = std::make_unique<TissueTable>(make_tissue_table(tables_, {key.t1, key.t2, key.m0}));
        const TissueTable* p = tt.get();
        cache_.emplace(key, std::move(tt));
        return p;
    }

    void snapshot(std::size_t boundary, std::size_t begin, std::size_t n) {
        for (std::size_t k = 0; k < snap_boundary_.size(); ++k) {
            if (snap_boundary_[k] != boundary) continue;
            for (std::size_t i = 0; i < n; ++i) snaps_[k].m[begin + i] = {mx_[i], my_[i], mz_[i]};
        }
    }

    const Sequence& seq_;
    const SequenceTables& tables_;
    const std::vector<SpinSample>& spins_;
    const SystemModel& sys_;
    const SimdKernels& k_;
    const std::vector<std::size_t>& snap_boundary_;
    std::vector<Snapshot>& snaps_;
    double gamma_;
    std::vector<double> x_, y_, z_, mx_, my_, mz_, dw_, wr_, wi_, c_, s_, e1_, e2_, rec_;
    std::vector<const TissueTable*> tissue_;
    std::map<TissueKey, std::unique_ptr<TissueTable>> cache_;
};

}  // namespace

RunResult run(const Sequence& seq, const std::vector<SpinSample>& spins, const SystemModel& sys, const RunOptions& opt,
              double gamma) {
    if (opt.workers < 1) throw InvalidParameter("need at least one worker");
    if (spins.empty()) throw InvalidParameter("no spins to simulate");
    const auto t0 = std::chrono::steady_clock::now();
    const SimdKernels& kern = opt.kernels ? *opt.kernels : active_kernels();
    const SequenceTables tables = precompute_sequence_tables(seq, sys.frame(gamma));
    const std::size_t W = static_cast<std::size_t>(opt.workers);
    const std::size_t B = std::clamp<std::size_t>(opt.blocks ? opt.blocks : 4 * W, 1, spins.size());

    // Snapshot k is taken at boundary b (after b elements), the first boundary at or after the requested time.
    RunResult res;
    std::vector<std::size_t> snap_boundary;
    {
        std::vector<double> ends{0.0};
        for (const auto& e : seq.elements) ends.push_back(ends.back() + e.duration_s);
        for (double t : opt.snapshot_times) {
            auto it = std::lower_bound(ends.begin(), ends.end(), t - 1e-15);
            if (it == ends.end()) --it;
            snap_boundary.push_back(static_cast<std::size_t>(it - ends.begin()));
            res.snapshots.push_back({*it, std::vector<Magnetization>(spins.size())});
        }
    }

    const std::size_t S = tables.total_samples;
    std::vector<double> tot_re(S, 0.0), tot_im(S, 0.0);
    const std::size_t n_buffers = 2 * W + 2;
    BoundedQueue<std::unique_ptr<Buffer>> free_q(n_buffers);
    for (std::size_t i = 0; i < n_buffers; ++i) {
        auto b = std::make_unique<Buffer>();
        b->re.assign(S, 0.0);
        b->im.assign(S, 0.0);
        free_q.push(std::move(b));
    }
    BoundedQueue<Job> work_q(W);
    BoundedQueue<Done> done_q(n_buffers);
    std::atomic<bool> abort{false};
    std::optional<WorkerPanic> panic;
    std::vector<double> busy(W, 0.0);
    std::vector<std::size_t> hits(W, 0);

    std::thread reducer([&] {
        std::map<std::size_t, Done> pending;
        std::size_t next = 0;
        const auto fold = [&](Done& d) {
            for (std::size_t k = 0; k < S; ++k) {
                tot_re[k] += d.buf->re[k];
                tot_im[k] += d.buf->im[k];
            }
        };
        const auto ack = [&](Done& d) {
            std::fill(d.buf->re.begin(), d.buf->re.end(), 0.0);
            std::fill(d.buf->im.begin(), d.buf->im.end(), 0.0);
            free_q.push(std::move(d.buf));
        };
        while (auto d = done_q.pop()) {
            if (!d->error.empty()) {
                if (!panic) panic.emplace(d->block, d->error);
                abort = true;
                ack(*d);
                continue;
            }
            if (!opt.deterministic) {
                fold(*d);
                ack(*d);
                continue;
            }
            pending.emplace(d->block, std::move(*d));
            for (auto it = pending.find(next); it != pending.end(); it = pending.find(next)) {
                fold(it->second);
                ack(it->second);
                pending.erase(it);
                ++next;
            }
        }
        for (auto& [k, d] : pending) ack(d);
    });

    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < W; ++w) {
        workers.emplace_back([&, w] {
            BlockWorker bw(seq, tables, spins, sys, kern, snap_boundary, res.snapshots, gamma);
            while (auto job = work_q.pop()) {
                const auto a = std::chrono::steady_clock::now();
                Done d{job->block, std::move(job->buf), {}};
                try {
                    if (abort) throw Error("run aborted");
                    if (opt.fault_hook) opt.fault_hook(job->block);
                    bw.process(job->begin, job->end, *d.buf);
                } catch (const std::exception& ex) {
                    d.error = ex.what();
                } catch (...) {
                    d.error = "unknown exception";
                }
                busy[w] += std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count();
                done_q.push(std::move(d));
            }
            hits[w] = bw.memo_hits;
        });
    }

    // Partitioner: contiguous blocks in ascending index, one free buffer per block in flight.
    for (std::size_t b = 0; b < B && !abort; ++b) {
        auto buf = free_q.pop();
        if (!buf) break;
        const std::size_t begin = spins.size() * b / B, end = spins.size() * (b + 1) / B;
        work_q.push({b, begin, end, std::move(*buf)});
    }
    work_q.close();
    for (auto& t : workers) t.join();
    done_q.close();
    reducer.join();
    if (panic) throw *panic;

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double norm = 1.0 / static_cast<double>(spins.size());
    double t_elem = 0;
    for (std::size_t i = 0; i < seq.elements.size(); ++i) {
        const auto& e = seq.elements[i];
        const auto& et = tables.elements[i];
        if (et.acquire) {
            EchoRecord r;
            r.acquisition = et.acquisition;
            r.row = e.acquisition.row;
            r.echo = e.acquisition.echo;
            r.reversed = e.acquisition.reversed;
            for (int k = 0; k < e.acquisition.n_samples; ++k) {
                const std::size_t o = et.sample_offset + static_cast<std::size_t>(k);
                r.samples.emplace_back(tot_re[o] * norm, tot_im[o] * norm);
                r.times_s.push_back(t_elem + e.acquisition.sample_time(k, e.duration_s));
            }
            res.echoes.push_back(std::move(r));
        }
        t_elem += e.duration_s;
    }
    auto& m = res.metrics;
    m.wall_s = wall;
    m.spins = spins.size();
    m.throughput = wall > 0 ? static_cast<double>(spins.size()) / wall : 0.0;
    m.workers = opt.workers;
    m.blocks = B;
    for (double b : busy) m.busy_fraction.push_back(wall > 0 ? b / wall : 0.0);
    m.kernels = kern.name;
    for (auto h : hits) m.tissue_memo_hits += h;
    m.pulse_memo_hits = tables.pulse_memo_hits;
    return res;
}

RunResult run_experiment(const Sequence& seq, const Phantom& ph, const SystemModel& sys, const Vec3& spacing,
                         const RunOptions& opt, std::size_t cap) {
    SpacingOptions so;
    so.phantom = &ph;
    try {
        const SpacingReport rep = max_spacing(seq, sys, so);
        for (int a = 0; a < 3; ++a) {
            if (spacing[a] >= rep.dx_max[a]) {
                warn("spacing " + std::to_string(spacing[a]) + " m on axis " + std::string(1, "xyz"[a]) +
                     " is not below the bound " + std::to_string(rep.dx_max[a]) + " m; expect aliased echoes");
            }
        }
    } catch (const Error& ex) {
        warn(std::string("spacing check skipped: ") + ex.what());
    }
    return run(seq, rasterize(ph, spacing, cap), sys, opt);
}

// ---------------------------------------------------------------------------------------------

CompareResult compare_results(const std::vector<cplx>& ref, const std::vector<cplx>& test, double thr,
                              double eps_scale) {
    if (ref.size() != test.size()) throw InvalidParameter("compared data sets differ in shape");
    CompareResult r;
    double ed = 0, er = 0, amax = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        ed += std::norm(ref[i] - test[i]);
        er += std::norm(ref[i]);
        amax = std::max(amax, std::abs(ref[i]));
    }
    if (ed == 0) r.delta_e_db = kIdenticalDb;
    else if (er == 0) r.delta_e_db = std::numeric_limits<double>::infinity();
    else r.delta_e_db = 10.0 * std::log10(ed / er);
    const double floor = eps_scale * std::numeric_limits<double>::epsilon() * amax;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double a = std::abs(ref[i]), b = std::abs(test[i]);
        if (a <= floor && b <= floor) continue;
        ++r.compared;
        const double d = std::abs(ref[i] - test[i]);
        if (a == 0 || d / a > thr) ++r.exceedances;
    }
    return r;
}

std::vector<cplx> flatten(const std::vector<EchoRecord>& echoes) {
    std::vector<cplx> out;
    for (const auto& e : echoes) out.insert(out.end(), e.samples.begin(), e.samples.end());
    return out;
}

CompareResult compare_results(const std::vector<EchoRecord>& ref, const std::vector<EchoRecord>& test, double thr) {
    if (ref.size() != test.size()) throw InvalidParameter("compared runs differ in acquisition count");
    for (std::size_t i = 0; i < ref.size(); ++i)
        if (ref[i].samples.size() != test[i].samples.size())
            throw InvalidParameter("compared runs differ in sample count");
    return compare_results(flatten(ref), flatten(test), thr);
}

CompareResult compare_snapshots(const Snapshot& ref, const Snapshot& test, double thr) {
    if (ref.m.size() != test.m.size()) throw InvalidParameter("snapshots differ in spin count");
    // Each spin's (Mx, My, Mz) as two complex values so the same metric applies.
    std::vector<cplx> a, b;
    for (std::size_t i = 0; i < ref.m.size(); ++i) {
        a.emplace_back(ref.m[i].mx, ref.m[i].my);
        a.emplace_back(ref.m[i].mz, 0.0);
        b.emplace_back(test.m[i].mx, test.m[i].my);
        b.emplace_back(test.m[i].mz, 0.0);
    }
    return compare_results(a, b, thr);
}

// ---------------------------------------------------------------------------------------------

namespace {

void put_f64(std::ostream& os, double v) {
    auto u = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    os.write(reinterpret_cast<const char*>(&u), 8);
}

double get_f64(std::istream& is) {
    std::uint64_t u = 0;
    if (!is.read(reinterpret_cast<char*>(&u), 8)) throw IoError("truncated binary payload");
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    return std::bit_cast<double>(u);
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot write " + p.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw IoError("cannot open " + p.string());
    return is;
}

}  // namespace

void write_echoes(const std::filesystem::path& file, const std::vector<EchoRecord>& echoes) {
    const std::size_t ns = echoes.empty() ? 0 : echoes[0].samples.size();
    for (const auto& e : echoes)
        if (e.samples.size() != ns) throw InvalidParameter("echo file needs equal sample counts per acquisition");
    auto os = open_out(file);
    os << "MRSIM1 " << echoes.size() << " " << ns << "\n";
    for (const auto& e : echoes)
        for (const auto& s : e.samples) {
            put_f64(os, s.real());
            put_f64(os, s.imag());
        }
    if (!os) throw IoError("write failed: " + file.string());
}

std::vector<EchoRecord> read_echoes(const std::filesystem::path& file) {
    auto is = open_in(file);
    std::string line;
    std::getline(is, line);
    std::istringstream hs(line);
    std::string magic;
    std::size_t na = 0, ns = 0;
    if (!(hs >> magic >> na >> ns) || magic != "MRSIM1") throw IoError("not an echo file: " + file.string());
    std::vector<EchoRecord> out(na);
    for (std::size_t a = 0; a < na; ++a) {
        out[a].acquisition = a;
        for (std::size_t k = 0; k < ns; ++k) {
            const double re = get_f64(is);
            const double im = get_f64(is);
            out[a].samples.emplace_back(re, im);
        }
    }
    return out;
}

void write_manifest(const std::filesystem::path& file, const std::vector<EchoRecord>& echoes, const RunMetrics& m) {
    auto os = open_out(file);
    os.precision(17);
    os << "# echo manifest\n";
    os << "spins " << m.spins << "\nwall_s " << m.wall_s << "\nthroughput_per_s " << m.throughput << "\nworkers "
       << m.workers << "\nblocks " << m.blocks << "\nkernels " << m.kernels << "\n";
    os << "busy_fraction";
    for (double b : m.busy_fraction) os << " " << b;
    os << "\n";
    for (const auto& e : echoes) {
        os << "acq " << e.acquisition << " row " << e.row << " echo " << e.echo << " reversed " << (e.reversed ? 1 : 0)
           << " t_first " << (e.times_s.empty() ? 0.0 : e.times_s.front()) << " t_last "
           << (e.times_s.empty() ? 0.0 : e.times_s.back()) << "\n";
    }
}

void read_manifest(const std::filesystem::path& file, std::vector<EchoRecord>& echoes) {
    auto is = open_in(file);
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("acq ", 0) != 0) continue;
        std::istringstream ls(line);
        std::string k1, k2, k3, k4, k5, k6;
        std::size_t a;
        int row, echo, rev;
        double tf, tl;
        if (!(ls >> k1 >> a >> k2 >> row >> k3 >> echo >> k4 >> rev >> k5 >> tf >> k6 >> tl))
            throw IoError("malformed manifest line: " + line);
        if (a >= echoes.size()) throw TrajectoryMismatch("manifest lists more acquisitions than the echo file");
        auto& e = echoes[a];
        e.row = row;
        e.echo = echo;
        e.reversed = rev != 0;
        const std::size_t n = e.samples.size();
        e.times_s.resize(n);
        for (std::size_t i = 0; i < n; ++i) e.times_s[i] = n > 1 ? tf + (tl - tf) * double(i) / double(n - 1) : tf;
    }
}

void write_snapshot(const std::filesystem::path& file, const Snapshot& s) {
    auto os = open_out(file);
    char hdr[64];
    std::snprintf(hdr, sizeof hdr, "%zu %.17g\n", s.m.size(), s.t_s);
    os << hdr;
    for (const auto& m : s.m) {
        put_f64(os, m.mx);
        put_f64(os, m.my);
        put_f64(os, m.mz);
    }
}

Snapshot read_snapshot(const std::filesystem::path& file) {
    auto is = open_in(file);
    std::string line;
    std::getline(is, line);
    std::istringstream hs(line);
    std::size_t n = 0;
    Snapshot s;
    if (!(hs >> n >> s.t_s)) throw IoError("not a snapshot file: " + file.string());
    s.m.resize(n);
    for (auto& m : s.m) {
        m.mx = get_f64(is);
        m.my = get_f64(is);
        m.mz = get_f64(is);
    }
    return s;
}

}  // namespace mrsim
