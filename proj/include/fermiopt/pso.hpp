// Copyright 2026 The fermiopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "fermiopt/synth_trotter.hpp"
#include "fermiopt/transform.hpp"

namespace fermiopt {

using Bits = std::vector<uint8_t>;
using CostFn = std::function<int(const BetaMatrix&)>;

struct SwarmConfig {
    int n = 4;
    double w = 0.8;
    double c1 = 1.5;
    double c2 = 1.5;
    int k_max = 6;
    int t_max = 10000;
    int dt_osc = 10;
    int s = 6;
    int dt_s = 10;
    uint64_t seed = 1;
    int particles_cap = 20000;
    bool set_one_on_sigmoid = false;  // textbook rule; default keeps "0 if rand <= sigmoid(V)"
    int threads = 0;                  // 0: FERMIOPT_THREADS or hardware concurrency

    static SwarmConfig defaults_for(int n) {
        SwarmConfig c;
        c.n = n;
        c.k_max = n <= 8 ? 6 : 3;
        c.t_max = n <= 8 ? 10000 : 100;
        return c;
    }
    int dim() const { return n * (n - 1) / 2; }
    void validate() const {
        if (n < 2 || n > kMaxQubits) throw ValidationError("swarm: n out of range");
        if (w < -4 || w > 4) throw ValidationError("swarm: w must lie in [-4,4]");
        if (c1 < 0 || c1 > 2 || c2 < 0 || c2 > 2) throw ValidationError("swarm: c1, c2 must lie in [0,2]");
        if (k_max < 1 || k_max > dim()) throw ValidationError("swarm: k_max must lie in [1,d]");
        if (t_max < 0 || dt_osc < 1 || s < 0 || dt_s < 1) throw ValidationError("swarm: bad stop-rule settings");
        if (particles_cap < 1) throw ValidationError("swarm: particle cap must be positive");
    }
};

struct Particle {
    Bits X, L, X0;
    std::vector<double> V;
    int cost = std::numeric_limits<int>::max();
    int s_best = std::numeric_limits<int>::max();
    std::vector<Bits> recent;  // last 2*dt_osc positions
    int far_steps = 0;
    bool stopped = false;
    std::mt19937_64 rng;
};

struct Swarm {
    SwarmConfig cfg;
    std::vector<Particle> particles;
    Bits G;
    int g_cost = std::numeric_limits<int>::max();
    int t = 0;
    uint64_t pattern_total = 0;  // k-hot patterns before the cap
    std::vector<int> best_history;
};

inline double improvement(int f_jw, int f_gt) {
    if (f_jw == 0) throw ValidationError("improvement undefined for zero baseline");
    return static_cast<double>(f_jw - f_gt) / f_jw;
}

// Alternate diagnostic as printed; negative whenever GT beats JW.
inline double rho_metric(int f_jw, int f_gt) {
    if (f_gt == f_jw) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(f_gt) / (f_gt - f_jw);
}

struct SearchReport {
    BetaMatrix best{1};
    int f_gt = 0, f_jw = 0, f_bk = 0;
    double improvement = 0, rho = 0, r_resource = 0;
    int n_particles = 0;
    int steps = 0;
    int evaluations = 0;
    std::vector<int> best_history;
};

namespace detail {

inline double binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Lexicographic unranking of a k-subset of {0..d-1}.
inline Bits unrank_khot(int d, int k, uint64_t rank) {
    Bits b(d, 0);
    int next = 0;
    for (int left = k; left > 0; --left) {
        for (int v = next;; ++v) {
            auto c = static_cast<uint64_t>(binom(d - v - 1, left - 1));
            if (rank < c) {
                b[v] = 1;
                next = v + 1;
                break;
            }
            rank -= c;
        }
    }
    return b;
}

inline std::string bits_key(const Bits& b) {
    std::string s(b.size(), '0');
    for (size_t i = 0; i < b.size(); ++i) s[i] = b[i] ? '1' : '0';
    return s;
}

inline Bits key_bits(const std::string& s) {
    Bits b(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '0' && s[i] != '1') throw ValidationError("checkpoint: bad bit string");
        b[i] = s[i] == '1';
    }
    return b;
}

inline int hamming(const Bits& a, const Bits& b) {
    int h = 0;
    for (size_t i = 0; i < a.size(); ++i) h += a[i] != b[i];
    return h;
}

inline int worker_count(int requested) {
    if (requested > 0) return requested;
    if (const char* e = std::getenv("FERMIOPT_THREADS")) {
        int v = std::atoi(e);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

template <class F>
void parallel_for(int count, int threads, F&& f) {
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) f(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

// Thread-safe memo in front of a cost function, keyed on the beta bits.
class CostCache {
  public:
    CostCache(int n, CostFn f) : n_(n), f_(std::move(f)) {}
    int operator()(const Bits& x) {
        auto key = detail::bits_key(x);
        {
            std::lock_guard<std::mutex> lk(mu_);
            auto it = memo_.find(key);
            if (it != memo_.end()) return it->second;
        }
        int v = f_(BetaMatrix::from_bits(n_, x));
        std::lock_guard<std::mutex> lk(mu_);
        ++evaluations_;
        memo_.emplace(key, v);
        return v;
    }
    int evaluations() const { return evaluations_; }

  private:
    int n_;
    CostFn f_;
    std::mutex mu_;
    std::unordered_map<std::string, int> memo_;
    int evaluations_ = 0;
};

inline Swarm init_swarm(const SwarmConfig& cfg) {
    cfg.validate();
    Swarm sw;
    sw.cfg = cfg;
    const int d = cfg.dim();
    std::vector<double> per_k;
    double total = 0;
    for (int k = 1; k <= cfg.k_max; ++k) per_k.push_back(detail::binom(d, k)), total += per_k.back();
    sw.pattern_total = total < 1.8e19 ? static_cast<uint64_t>(total) : std::numeric_limits<uint64_t>::max();
    std::vector<Bits> patterns;
    if (total <= cfg.particles_cap) {
        for (int k = 1; k <= cfg.k_max; ++k)
            for (uint64_t r = 0; r < static_cast<uint64_t>(per_k[k - 1]); ++r) patterns.push_back(detail::unrank_khot(d, k, r));
    } else {
        // uniform over the union of k-hot patterns, without replacement
        std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        std::uniform_real_distribution<double> u(0.0, total);
        std::set<std::pair<int, uint64_t>> chosen;
        while (static_cast<int>(chosen.size()) < cfg.particles_cap) {
            double r = u(rng);
            int k = 0;
            while (k + 1 < cfg.k_max && r >= per_k[k]) r -= per_k[k], ++k;
            auto rank = std::min(static_cast<uint64_t>(r), static_cast<uint64_t>(per_k[k]) - 1);
            chosen.insert({k + 1, rank});
        }
        for (auto& [k, r] : chosen) patterns.push_back(detail::unrank_khot(d, k, r));
    }
    sw.particles.resize(patterns.size());
    for (size_t i = 0; i < patterns.size(); ++i) {
        auto& p = sw.particles[i];
        p.X = p.L = p.X0 = patterns[i];
        p.V.assign(d, 0.0);
        std::seed_seq sq{static_cast<uint32_t>(cfg.seed), static_cast<uint32_t>(cfg.seed >> 32), static_cast<uint32_t>(i)};
        p.rng.seed(sq);
    }
    return sw;
}

inline void refresh_bests(Swarm& sw) {
    for (auto& p : sw.particles) {
        if (p.cost < p.s_best) p.s_best = p.cost, p.L = p.X;
        if (p.cost < sw.g_cost) sw.g_cost = p.cost, sw.G = p.X;
    }
    sw.best_history.push_back(sw.g_cost);
}

inline void evaluate_all(Swarm& sw, CostCache& cost, bool active_only) {
    detail::parallel_for(static_cast<int>(sw.particles.size()), detail::worker_count(sw.cfg.threads), [&](int i) {
        auto& p = sw.particles[i];
        if (!(active_only && p.stopped)) p.cost = cost(p.X);
    });
}

// Stop rules, applied after a move.
inline void update_stop(Swarm& sw, Particle& p) {
    const auto& c = sw.cfg;
    p.recent.push_back(p.X);
    if (static_cast<int>(p.recent.size()) > 2 * c.dt_osc) p.recent.erase(p.recent.begin());
    if (static_cast<int>(p.recent.size()) == 2 * c.dt_osc) {
        bool osc = p.recent[0] != p.recent[1];
        for (size_t k = 2; osc && k < p.recent.size(); ++k) osc = p.recent[k] == p.recent[k - 2];
        if (osc) p.stopped = true;
    }
    if (detail::hamming(p.X, p.X0) > c.s) {
        if (++p.far_steps > c.dt_s) p.stopped = true;
    } else {
        p.far_steps = 0;
    }
}

inline void move_particle(Swarm& sw, Particle& p) {
    const auto& c = sw.cfg;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (size_t j = 0; j < p.X.size(); ++j) {
        const double x = p.X[j];
        p.V[j] = c.w * p.V[j] + c.c1 * (p.L[j] - x) + c.c2 * (sw.G[j] - x);
        const double sig = 1.0 / (1.0 + std::exp(-p.V[j]));
        const bool hit = u(p.rng) <= sig;
        p.X[j] = c.set_one_on_sigmoid ? (hit ? 1 : 0) : (hit ? 0 : 1);
    }
}

inline void step(Swarm& sw, CostCache& cost) {
    for (auto& p : sw.particles) {
        if (p.stopped) continue;
        move_particle(sw, p);
        update_stop(sw, p);
    }
    evaluate_all(sw, cost, true);
    refresh_bests(sw);
    ++sw.t;
}

inline bool all_stopped(const Swarm& sw) {
    return std::all_of(sw.particles.begin(), sw.particles.end(), [](const Particle& p) { return p.stopped; });
}

// Initial evaluation when the swarm is fresh.
inline void prime(Swarm& sw, CostCache& cost) {
    if (!sw.best_history.empty()) return;
    evaluate_all(sw, cost, false);
    refresh_bests(sw);
}

inline SearchReport finish_report(const Swarm& sw, CostCache& cost) {
    const int n = sw.cfg.n;
    SearchReport r;
    r.best = BetaMatrix::from_bits(n, sw.G);
    r.f_gt = sw.g_cost;
    r.f_jw = cost(jw(n).beta.to_bits());
    r.f_bk = cost(bk(n).beta.to_bits());
    r.improvement = r.f_jw ? improvement(r.f_jw, r.f_gt) : 0.0;
    r.rho = rho_metric(r.f_jw, r.f_gt);
    r.n_particles = static_cast<int>(sw.particles.size());
    r.r_resource = std::ldexp(static_cast<double>(r.n_particles), -sw.cfg.dim());
    r.steps = sw.t;
    r.evaluations = cost.evaluations();
    r.best_history = sw.best_history;
    return r;
}

inline SearchReport run(Swarm& sw, CostCache& cost, const std::function<void(const Swarm&)>& on_step = {}) {
    prime(sw, cost);
    while (sw.t < sw.cfg.t_max && !all_stopped(sw)) {
        step(sw, cost);
        if (on_step) on_step(sw);
    }
    return finish_report(sw, cost);
}

inline SearchReport run(const SwarmConfig& cfg, const CostFn& f) {
    auto sw = init_swarm(cfg);
    CostCache cost(cfg.n, f);
    return run(sw, cost);
}

// Two-qubit count of the compiled ansatz under a given beta.
inline CostFn ansatz_cost_fn(std::vector<OrbitalSequence> seqs, uint64_t occupied, SynthOptions opt = {}, double angle = 0.1) {
    return [seqs = std::move(seqs), occupied, opt, angle](const BetaMatrix& b) {
        std::vector<double> th(seqs.size(), angle);
        return compile_ansatz(seqs, th, TransformSpec(b), occupied, opt).two_qubit_count;
    };
}

// Excitations restricted to the spatial orbitals they touch, renumbered in
// ascending order onto a register of 2 * (touched orbitals) modes.
struct ActiveSpace {
    std::vector<OrbitalSequence> seqs;
    std::vector<int> orbitals;  // original spatial index per new spatial index
    int n_modes = 0;
    uint64_t occupied = 0;
};

inline ActiveSpace compact_modes(const std::vector<OrbitalSequence>& seqs, uint64_t occupied) {
    std::set<int> orb;
    for (auto& s : seqs)
        for (int p : s.idx) {
            if (p < 0 || p >= 64) throw DimensionError("excitation " + s.id() + " exceeds the register");
            orb.insert(p / 2);
        }
    ActiveSpace a;
    a.orbitals.assign(orb.begin(), orb.end());
    a.n_modes = 2 * static_cast<int>(a.orbitals.size());
    std::vector<int> pos(a.orbitals.empty() ? 0 : a.orbitals.back() + 1, -1);
    for (size_t k = 0; k < a.orbitals.size(); ++k) {
        pos[a.orbitals[k]] = static_cast<int>(k);
        for (int sp = 0; sp < 2; ++sp)
            if ((occupied >> (2 * a.orbitals[k] + sp)) & 1) a.occupied |= uint64_t{1} << (2 * k + sp);
    }
    for (auto& s : seqs) {
        OrbitalSequence r = s;
        for (auto& p : r.idx) p = 2 * pos[p / 2] + p % 2;
        a.seqs.push_back(r);
    }
    return a;
}

inline void write_search_report(std::ostream& os, const SearchReport& r) {
    os << "f_gt=" << r.f_gt << "\nf_jw=" << r.f_jw << "\nf_bk=" << r.f_bk << "\n";
    os << "improvement=" << r.improvement << "\nrho=" << r.rho << "\nr_resource=" << r.r_resource << "\n";
    os << "particles=" << r.n_particles << "\nsteps=" << r.steps << "\nevaluations=" << r.evaluations << "\n";
    os << "best_beta_bits=" << detail::bits_key(r.best.to_bits()) << "\n";
    os << "step,global_best\n";
    for (size_t t = 0; t < r.best_history.size(); ++t) os << t << ',' << r.best_history[t] << '\n';
}

// ---------------------------------------------------------------- checkpoints

inline void write_checkpoint(std::ostream& os, const Swarm& sw) {
    const auto& c = sw.cfg;
    os.precision(17);
    os << "fermiopt-swarm 1\n";
    os << "n=" << c.n << " w=" << c.w << " c1=" << c.c1 << " c2=" << c.c2 << " k_max=" << c.k_max << " t_max=" << c.t_max
       << " dt_osc=" << c.dt_osc << " s=" << c.s << " dt_s=" << c.dt_s << " seed=" << c.seed
       << " cap=" << c.particles_cap << " set_one=" << c.set_one_on_sigmoid << "\n";
    os << "t=" << sw.t << " g_cost=" << sw.g_cost << " patterns=" << sw.pattern_total << "\n";
    write_beta(os, BetaMatrix::from_bits(c.n, sw.G.empty() ? Bits(c.dim(), 0) : sw.G));
    os << "history " << sw.best_history.size();
    for (int v : sw.best_history) os << ' ' << v;
    os << "\nparticles " << sw.particles.size() << "\n";
    for (auto& p : sw.particles) {
        os << detail::bits_key(p.X) << ' ' << detail::bits_key(p.L) << ' ' << detail::bits_key(p.X0) << ' ' << p.cost << ' '
           << p.s_best << ' ' << p.far_steps << ' ' << p.stopped << ' ' << p.recent.size();
        for (auto& r : p.recent) os << ' ' << detail::bits_key(r);
        os << "\nV";
        for (double v : p.V) os << ' ' << v;
        os << "\n" << p.rng << "\n";
    }
}

inline Swarm read_checkpoint(std::istream& is) {
    auto fail = [](const std::string& m) { throw ValidationError("checkpoint: " + m); };
    std::string line, tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "fermiopt-swarm" || version != 1) fail("bad header");
    auto kv = [&](const std::string& key, auto& out) {
        std::string tok;
        if (!(is >> tok) || tok.rfind(key + "=", 0) != 0) fail("expected " + key);
        std::istringstream ss(tok.substr(key.size() + 1));
        if (!(ss >> out)) fail("bad value for " + key);
    };
    Swarm sw;
    auto& c = sw.cfg;
    kv("n", c.n), kv("w", c.w), kv("c1", c.c1), kv("c2", c.c2), kv("k_max", c.k_max), kv("t_max", c.t_max);
    kv("dt_osc", c.dt_osc), kv("s", c.s), kv("dt_s", c.dt_s), kv("seed", c.seed), kv("cap", c.particles_cap);
    kv("set_one", c.set_one_on_sigmoid);
    c.validate();
    kv("t", sw.t), kv("g_cost", sw.g_cost), kv("patterns", sw.pattern_total);
    sw.G = read_beta(is).to_bits();
    size_t count = 0;
    if (!(is >> tag >> count) || tag != "history") fail("expected history");
    sw.best_history.resize(count);
    for (auto& v : sw.best_history)
        if (!(is >> v)) fail("truncated history");
    if (!(is >> tag >> count) || tag != "particles") fail("expected particles");
    sw.particles.resize(count);
    const size_t d = c.dim();
    for (auto& p : sw.particles) {
        std::string x, l, x0;
        size_t nr = 0;
        if (!(is >> x >> l >> x0 >> p.cost >> p.s_best >> p.far_steps >> p.stopped >> nr)) fail("truncated particle");
        p.X = detail::key_bits(x), p.L = detail::key_bits(l), p.X0 = detail::key_bits(x0);
        if (p.X.size() != d || p.L.size() != d || p.X0.size() != d) fail("bit length mismatch");
        p.recent.resize(nr);
        for (auto& r : p.recent) {
            if (!(is >> x)) fail("truncated history");
            r = detail::key_bits(x);
        }
        if (!(is >> tag) || tag != "V") fail("expected velocity");
        p.V.resize(d);
        for (auto& v : p.V)
            if (!(is >> v)) fail("truncated velocity");
        if (!(is >> p.rng)) fail("bad rng state");
    }
    return sw;
}

}  // namespace fermiopt
