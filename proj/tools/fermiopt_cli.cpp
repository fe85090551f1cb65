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


#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fermiopt/ft_synth.hpp"
#include "fermiopt/io.hpp"
#include "fermiopt/measure.hpp"
#include "fermiopt/pso.hpp"
#include "fermiopt/synth_trotter.hpp"
#include "fermiopt/transform.hpp"
#include "fermiopt/vqe.hpp"

using namespace fermiopt;

namespace {

struct Common {
    std::string fcidump;
    std::string transform = "jw";
    std::string beta_file;
    uint64_t seed = 1;
};

struct TermSelection {
    std::string terms_file;
    int top = 0;
    bool doubles_only = false;
    bool active = false;
    double theta = 0.1;
    bool mp2_angles = false;
};

struct Heuristics {
    bool relabel = false, no_intra = false, no_inter = false, bosonic = false;
    int k_swap = 2;
    SynthOptions options() const {
        SynthOptions o;
        o.relabel = relabel;
        o.intra = !no_intra;
        o.inter = !no_inter;
        o.bosonic = bosonic;
        o.k_swap = k_swap;
        return o;
    }
};

// Writes to a file when a path is given, else to stdout.
class Sink {
  public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw std::runtime_error("cannot write " + path);
        }
    }
    std::ostream& os() { return file_ ? *file_ : std::cout; }

  private:
    std::unique_ptr<std::ofstream> file_;
};

SpatialIntegrals load(const Common& c) {
    if (c.fcidump.empty()) throw ValidationError("--fcidump is required");
    return to_integrals(read_fcidump_file(c.fcidump));
}

TransformSpec make_spec(const Common& c, int n) {
    if (c.transform == "jw") return jw(n);
    if (c.transform == "bk") return bk(n);
    if (c.transform == "beta-file") {
        if (c.beta_file.empty()) throw ValidationError("--transform beta-file needs --beta");
        std::ifstream f(c.beta_file);
        if (!f) throw std::runtime_error("cannot open " + c.beta_file);
        auto b = read_beta(f);
        if (b.n() != n) throw ValidationError("beta size " + std::to_string(b.n()) + " does not match " + std::to_string(n) + " modes");
        return TransformSpec(b);
    }
    throw ValidationError("unknown transform '" + c.transform + "'");
}

OrbitalSequence parse_sequence(const std::string& id) {
    if (id.size() < 3 || (id[0] != 'S' && id[0] != 'D') || id[1] != ':')
        throw ValidationError("bad excitation '" + id + "'");
    std::vector<int> idx;
    std::stringstream ss(id.substr(2));
    std::string tok;
    while (std::getline(ss, tok, ',')) idx.push_back(std::stoi(tok));
    if (id[0] == 'S' && idx.size() == 2) return OrbitalSequence::single(idx[0], idx[1]);
    if (id[0] == 'D' && idx.size() == 4) return OrbitalSequence::dbl(idx[0], idx[1], idx[2], idx[3]);
    throw ValidationError("bad excitation '" + id + "'");
}

struct Selected {
    std::vector<OrbitalSequence> seqs;
    std::vector<double> thetas;
    int n_modes = 0;
    uint64_t occupied = 0;
};

Selected select_terms(const SpatialIntegrals& s, const TermSelection& t) {
    Selected out;
    out.n_modes = 2 * s.n_orb;
    out.occupied = s.n_elec >= 64 ? ~uint64_t{0} : (uint64_t{1} << s.n_elec) - 1;
    std::vector<int> occ, virt;
    for (int p = 0; p < out.n_modes; ++p) (p < s.n_elec ? occ : virt).push_back(p);
    std::map<std::string, double> amp;
    if (t.mp2_angles || t.top > 0) {
        auto mp = mp2_classical(s, make_fock(s), !t.doubles_only);
        for (auto& [e, a] : mp.amplitudes) amp[e.id()] = a;
    }
    if (!t.terms_file.empty()) {
        std::ifstream f(t.terms_file);
        if (!f) throw std::runtime_error("cannot open " + t.terms_file);
        std::string line;
        while (std::getline(f, line)) {
            auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos || line[b] == '#') continue;
            out.seqs.push_back(parse_sequence(line.substr(b, line.find_last_not_of(" \t\r") - b + 1)));
        }
    } else {
        for (auto& e : all_excitations(occ, virt))
            if (!t.doubles_only || e.kind == OrbitalSequence::Double) out.seqs.push_back(e);
    }
    if (t.top > 0) {
        std::stable_sort(out.seqs.begin(), out.seqs.end(), [&](auto& a, auto& b) {
            return std::abs(amp[a.id()]) > std::abs(amp[b.id()]);
        });
        if (static_cast<int>(out.seqs.size()) > t.top) out.seqs.resize(t.top);
    }
    for (auto& e : out.seqs) out.thetas.push_back(t.mp2_angles ? amp[e.id()] : t.theta);
    if (t.active) {
        auto a = compact_modes(out.seqs, out.occupied);
        out.seqs = a.seqs;
        out.n_modes = a.n_modes;
        out.occupied = a.occupied;
    }
    return out;
}

void add_common(CLI::App* sub, Common& c, bool with_transform = true) {
    sub->add_option("--fcidump", c.fcidump, "FCIDUMP file");
    if (with_transform) {
        sub->add_option("--transform", c.transform, "jw, bk or beta-file")->check(CLI::IsMember({"jw", "bk", "beta-file"}));
        sub->add_option("--beta", c.beta_file, "beta matrix file for --transform beta-file");
    }
}

void add_terms(CLI::App* sub, TermSelection& t) {
    sub->add_option("--terms", t.terms_file, "excitation list, one id per line (e.g. D:5,4,1,0)");
    sub->add_option("--top", t.top, "keep the K excitations with the largest MP2 amplitudes");
    sub->add_flag("--doubles-only", t.doubles_only, "drop single excitations");
    sub->add_flag("--active", t.active, "restrict the register to the touched spatial orbitals");
    sub->add_option("--theta", t.theta, "angle for every term");
    sub->add_flag("--mp2-angles", t.mp2_angles, "use MP2 amplitudes as angles");
}

void add_heuristics(CLI::App* sub, Heuristics& h) {
    sub->add_flag("--relabel", h.relabel, "relabel spatial orbitals");
    sub->add_flag("--no-intra", h.no_intra, "keep the given string order inside each term");
    sub->add_flag("--no-inter", h.no_inter, "keep the given term order");
    sub->add_flag("--bosonic", h.bosonic, "compress paired doubles");
    sub->add_option("--k-swap", h.k_swap, "transpositions per relabeling move");
}

int cmd_transform(const Common& c, const std::string& out) {
    auto s = load(c);
    auto spec = make_spec(c, 2 * s.n_orb);
    auto H = map_operator(build_hamiltonian(spin_hamiltonian(s)), spec);
    Sink sink(out);
    auto& os = sink.os();
    os.precision(17);
    os << "# qubits=" << H.num_qubits() << " strings=" << H.size() << " core=" << s.core << "\n";
    os << H.str();
    return 0;
}

int cmd_synth(const Common& c, const TermSelection& t, const Heuristics& h, bool verify, bool model_only,
              const std::string& circuit_out) {
    auto s = load(c);
    auto sel = select_terms(s, t);
    auto spec = make_spec(c, sel.n_modes);
    auto opt = h.options();
    opt.realize = !model_only;
    auto r = compile_ansatz(sel.seqs, sel.thetas, spec, sel.occupied, opt);
    std::cout << "qubits=" << sel.n_modes << "\nterms=" << sel.seqs.size() << "\ntransform=" << c.transform << "\n";
    if (!model_only) {
        auto m = metrics(r.circuit);
        std::cout << "gates=" << r.circuit.gates.size() << "\nrz_count=" << m.rz_count
                  << "\n";
    }
    write_plan_report(std::cout, r);
    if (verify) {
        if (model_only) throw ValidationError("--verify needs the realized circuit");
        if (sel.n_modes > 12) throw ValidationError("verification is limited to 12 qubits");
        double err = compilation_error(r, sel.seqs, sel.thetas, spec, sel.occupied);
        std::cout << "verify_error=" << err << "\nverified=" << (err < 1e-9) << "\n";
        if (err >= 1e-9) return 1;
    }
    if (!circuit_out.empty() && !model_only) {
        Sink sink(circuit_out);
        write_circuit(sink.os(), r.circuit);
    }
    return 0;
}

struct PsoArgs {
    int cap = 20000, t_max = -1, k_max = -1;
    double w = 0.8, c1 = 1.5, c2 = 1.5;
    bool flip = false;
    std::string checkpoint, resume, beta_out;
    int checkpoint_every = 10;
};

int cmd_pso(const Common& c, const TermSelection& t, const Heuristics& h, const PsoArgs& p) {
    auto s = load(c);
    auto sel = select_terms(s, t);
    auto f = ansatz_cost_fn(sel.seqs, sel.occupied, h.options(), t.theta);
    Swarm sw;
    if (!p.resume.empty()) {
        std::ifstream in(p.resume);
        if (!in) throw std::runtime_error("cannot open " + p.resume);
        sw = read_checkpoint(in);
        if (sw.cfg.n != sel.n_modes) throw ValidationError("checkpoint register size differs from the input");
    } else {
        auto cfg = SwarmConfig::defaults_for(sel.n_modes);
        cfg.seed = c.seed;
        cfg.particles_cap = p.cap;
        if (p.t_max >= 0) cfg.t_max = p.t_max;
        if (p.k_max >= 0) cfg.k_max = p.k_max;
        cfg.w = p.w;
        cfg.c1 = p.c1;
        cfg.c2 = p.c2;
        cfg.set_one_on_sigmoid = p.flip;
        sw = init_swarm(cfg);
    }
    CostCache cost(sel.n_modes, f);
    auto save = [&](const Swarm& cur) {
        if (p.checkpoint.empty()) return;
        std::ofstream o(p.checkpoint);
        if (!o) throw std::runtime_error("cannot write " + p.checkpoint);
        write_checkpoint(o, cur);
    };
    auto rep = run(sw, cost, [&](const Swarm& cur) {
        if (p.checkpoint_every > 0 && cur.t % p.checkpoint_every == 0) save(cur);
    });
    save(sw);
    std::cout << "qubits=" << sel.n_modes << "\nterms=" << sel.seqs.size() << "\nseed=" << sw.cfg.seed << "\n";
    write_search_report(std::cout, rep);
    if (!p.beta_out.empty()) {
        Sink sink(p.beta_out);
        write_beta(sink.os(), rep.best);
    }
    return 0;
}

struct FtArgs {
    bool two_body = false, single_body = false, depth_opt = false;
    int weight_sum = 0;
    double theta = 0.5;
    std::string roles = "++--";
};

int cmd_ft(const FtArgs& a) {
    int picked = int(a.two_body) + int(a.single_body) + int(a.weight_sum > 0);
    if (picked != 1) throw ValidationError("choose exactly one of --two-body, --single-body, --weight-sum");
    std::vector<FTResourceReport> rows;
    if (a.weight_sum > 0) {
        rows.push_back(weight_sum_accounting(a.weight_sum));
    } else {
        FTCircuit ft;
        if (a.single_body) {
            ft = ft_single_body(a.theta);
        } else {
            auto roles = RoleAssignment::parse(a.roles);
            bool z = a.roles.find('z') != std::string::npos;
            ft = z ? ft_two_body_with_z(a.theta, roles, a.depth_opt) : ft_two_body(a.theta, roles, a.depth_opt);
        }
        write_circuit(std::cout, ft.circuit);
        rows.push_back(ft.report);
    }
    write_resource_table(std::cout, rows);
    return 0;
}

struct VqeArgs {
    double delta_e = 1e-5;
    double initial_threshold = std::numeric_limits<double>::quiet_NaN();
    int max_cycles = 60;
    bool no_singles = false;
    std::string csv, report, measurement;
};

int cmd_vqe(const Common& c, const VqeArgs& a) {
    auto s = load(c);
    auto f = make_fock(s);
    const int n = 2 * s.n_orb;
    auto spec = make_spec(c, n);
    auto H = map_operator(build_hamiltonian(spin_hamiltonian(s)), spec);
    Emulator emu(H, s.core, spec, s.n_elec);
    HMP2Config cfg;
    cfg.delta_e = a.delta_e;
    cfg.initial_threshold = a.initial_threshold;
    cfg.max_cycles = a.max_cycles;
    cfg.include_singles = !a.no_singles;
    std::unique_ptr<Sink> meas;
    auto pool = excitation_pool(f, cfg.include_singles);
    if (!a.measurement.empty()) {
        meas = std::make_unique<Sink>(a.measurement);
        meas->os() << "cycle,N_terms,reduced_qubits,n_jw,n_qsr,n_qwc_qsr,n_gc_qsr,extra_gc,R_measure\n";
    }
    auto run = run_hmp2_loop(emu, f, cfg, [&](const HMP2Report& r) {
        if (!meas) return;
        auto m = measurement_summary(pool, r.terms, r.params, H, spec, s.n_elec, false);
        meas->os() << r.cycle << ',' << r.n_terms() << ',' << m.reduced_qubits << ',' << m.n_jw << ',' << m.n_qsr << ','
                   << m.n_qwc_qsr << ',' << m.n_gc_qsr << ',' << m.extra_gc << ',' << m.r_measure() << '\n';
    });
    {
        Sink sink(a.csv);
        write_hmp2_csv(sink.os(), run);
    }
    if (a.report.empty()) std::cout << "\n";
    Sink sink(a.report);
    write_hmp2_report(sink.os(), run);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fermiopt: fermion-to-qubit transforms, circuit synthesis and perturbative VQE"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--seed", common.seed, "seed for every random choice");

    auto* tr = app.add_subcommand("transform", "map the molecular Hamiltonian to Pauli strings");
    add_common(tr, common);
    std::string tr_out;
    tr->add_option("--out", tr_out, "output file");

    auto* sy = app.add_subcommand("synth", "compile a UCC ansatz circuit and report its cost");
    add_common(sy, common);
    TermSelection sy_terms;
    Heuristics sy_h;
    bool verify = false, model_only = false;
    std::string circuit_out;
    add_terms(sy, sy_terms);
    add_heuristics(sy, sy_h);
    sy->add_flag("--verify", verify, "check the circuit against exact term exponentials");
    sy->add_flag("--model-only", model_only, "skip building the circuit");
    sy->add_option("--circuit-out", circuit_out, "write the circuit text here");
    sy->add_option("--seed", common.seed, "seed");

    auto* ps = app.add_subcommand("pso", "search beta matrices with binary particle swarms");
    add_common(ps, common, false);
    TermSelection ps_terms;
    Heuristics ps_h;
    PsoArgs pa;
    add_terms(ps, ps_terms);
    add_heuristics(ps, ps_h);
    ps->add_option("--seed", common.seed, "seed");
    ps->add_option("--particles-cap", pa.cap, "largest swarm");
    ps->add_option("--t-max", pa.t_max, "step limit");
    ps->add_option("--k-max", pa.k_max, "largest initial pattern weight");
    ps->add_option("--w", pa.w, "inertia");
    ps->add_option("--c1", pa.c1, "personal-best pull");
    ps->add_option("--c2", pa.c2, "global-best pull");
    ps->add_flag("--set-one-on-sigmoid", pa.flip, "use the conventional bit rule");
    ps->add_option("--checkpoint", pa.checkpoint, "write the swarm state here");
    ps->add_option("--checkpoint-every", pa.checkpoint_every, "steps between checkpoints");
    ps->add_option("--resume", pa.resume, "continue from a checkpoint");
    ps->add_option("--beta-out", pa.beta_out, "write the best beta here");

    auto* ft = app.add_subcommand("ft", "fault-tolerant term circuits and resource counts");
    FtArgs fa;
    ft->add_flag("--two-body", fa.two_body, "double-excitation term");
    ft->add_flag("--single-body", fa.single_body, "single-excitation term");
    ft->add_option("--weight-sum", fa.weight_sum, "resource row for a weight-sum block of this many strings");
    ft->add_option("--theta", fa.theta, "rotation angle");
    ft->add_flag("--depth-opt", fa.depth_opt, "parallel rotations with one ancilla");
    ft->add_option("--roles", fa.roles, "wire roles, + - or z per wire");
    ft->add_option("--seed", common.seed, "seed");

    auto* vq = app.add_subcommand("vqe", "perturbative VQE loop");
    add_common(vq, common);
    VqeArgs va;
    vq->add_option("--delta-e", va.delta_e, "stop when no extension gains this much");
    vq->add_option("--initial-threshold", va.initial_threshold, "MP2 contribution needed for the initial ansatz");
    vq->add_option("--max-cycles", va.max_cycles, "cycle cap");
    vq->add_flag("--no-singles", va.no_singles, "doubles only");
    vq->add_option("--csv", va.csv, "per-cycle CSV");
    vq->add_option("--report", va.report, "key=value run report");
    vq->add_option("--measurement", va.measurement, "per-cycle measurement-count CSV");
    vq->add_option("--seed", common.seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    try {
        if (tr->parsed()) return cmd_transform(common, tr_out);
        if (sy->parsed()) return cmd_synth(common, sy_terms, sy_h, verify, model_only, circuit_out);
        if (ps->parsed()) return cmd_pso(common, ps_terms, ps_h, pa);
        if (ft->parsed()) return cmd_ft(fa);
        if (vq->parsed()) return cmd_vqe(common, va);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
