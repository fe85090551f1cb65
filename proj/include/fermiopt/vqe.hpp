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

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "fermiopt/fermion.hpp"
#include "fermiopt/synth_trotter.hpp"
#include "fermiopt/transform.hpp"

namespace fermiopt {

// ---------------------------------------------------------------- sectors and sparse operators

// Qubit basis states spanned by the states of interest.
struct Sector {
    int n = 0;
    std::vector<uint64_t> states;
};

inline Sector full_sector(int n) {
    if (n < 1 || n > 24) throw DimensionError("register too large for emulation");
    Sector s{n, {}};
    for (uint64_t b = 0; b < (uint64_t{1} << n); ++b) s.states.push_back(b);
    return s;
}

// Encoded images of all occupations with n_elec particles.
inline Sector number_sector(const TransformSpec& spec, int n_elec) {
    const int n = spec.n();
    if (n > 24) throw DimensionError("register too large for emulation");
    if (n_elec < 0 || n_elec > n) throw ValidationError("electron count exceeds modes");
    Sector s{n, {}};
    for (uint64_t occ = 0; occ < (uint64_t{1} << n); ++occ)
        if (std::popcount(occ) == n_elec) s.states.push_back(spec.beta.m.apply(occ));
    std::sort(s.states.begin(), s.states.end());
    return s;
}

// A PauliSum compiled to a sparse matrix whose columns cover one sector.
// Vectors handed to apply() must be supported on that sector.
class SparseOp {
  public:
    SparseOp() = default;
    SparseOp(const PauliSum& op, const Sector& sec, double shift = 0.0) : dim_(Eigen::Index{1} << sec.n) {
        if (op.num_qubits() != sec.n) throw DimensionError("operator and sector sizes differ");
        std::map<uint64_t, std::vector<std::pair<uint64_t, cplx>>> groups;
        for (auto& t : op.terms()) groups[t.x].push_back({t.z, t.coeff * ipow(std::popcount(t.x & t.z))});
        std::vector<Eigen::Triplet<cplx>> trip;
        for (uint64_t b : sec.states) {
            for (auto& [x, zs] : groups) {
                cplx v = 0;
                for (auto& [z, c] : zs) v += (std::popcount(b & z) & 1) ? -c : c;
                if (x == 0) v -= shift;
                if (std::abs(v) > 1e-15) trip.emplace_back(static_cast<Eigen::Index>(b ^ x), static_cast<Eigen::Index>(b), v);
            }
            if (shift != 0.0 && !groups.count(0)) trip.emplace_back(b, b, -shift);
        }
        m_.resize(dim_, dim_);
        m_.setFromTriplets(trip.begin(), trip.end());
    }

    Statevector apply(const Statevector& in) const {
        Statevector out(in.size());
        apply_add(in, out);
        return out;
    }
    void apply_add(const Statevector& in, Statevector& out, cplx scale = {1, 0}) const {
        if (static_cast<Eigen::Index>(in.size()) != dim_ || out.size() != in.size())
            throw DimensionError("statevector dimension mismatch");
        Eigen::Map<const Eigen::VectorXcd> vi(in.data(), dim_);
        Eigen::Map<Eigen::VectorXcd> vo(out.data(), dim_);
        vo.noalias() += scale * (m_ * vi);
    }
    long nnz() const { return m_.nonZeros(); }

  private:
    Eigen::Index dim_ = 0;
    Eigen::SparseMatrix<cplx> m_;
};

inline void axpy(cplx a, const Statevector& x, Statevector& y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

// ---------------------------------------------------------------- ansatz terms

// exp(theta G) for one anti-Hermitian excitation generator G.
class TermOp {
  public:
    TermOp(const PauliSum& gen, const Sector& sec) : gen_(gen), g_(gen, sec) {
        // G^3 = -G holds for a single excitation; checked on a random sector vector.
        std::mt19937_64 rng(0x5eed);
        std::normal_distribution<double> nd;
        Statevector v(size_t{1} << sec.n);
        for (uint64_t b : sec.states) v[b] = cplx(nd(rng), nd(rng));
        auto g1 = g_.apply(v), g3 = g_.apply(g_.apply(g1));
        double err = 0, ref = 0;
        for (size_t i = 0; i < v.size(); ++i) err += std::norm(g3[i] + g1[i]), ref += std::norm(v[i]);
        cubic_ = err <= 1e-20 * ref;
        if (!cubic_) {
            strings_ = gen.terms();
            for (size_t a = 0; a < strings_.size(); ++a)
                for (size_t b = a + 1; b < strings_.size(); ++b)
                    if (!commutes_general(strings_[a], strings_[b]))
                        throw ValidationError("generator strings do not commute; no exact term exponential");
        }
    }

    const SparseOp& generator() const { return g_; }
    const PauliSum& generator_sum() const { return gen_; }

    void apply_exp(double theta, Statevector& v) const {
        if (theta == 0.0) return;
        if (cubic_) {
            auto g1 = g_.apply(v);
            auto g2 = g_.apply(g1);
            const double s = std::sin(theta), c = 1.0 - std::cos(theta);
            for (size_t i = 0; i < v.size(); ++i) v[i] += s * g1[i] + c * g2[i];
            return;
        }
        // commuting strings: exp(theta c sigma) with c = i h
        for (auto& t : strings_) {
            double h = t.coeff.imag();
            PauliString u = t;
            u.coeff = 1.0;
            Statevector sv(v.size());
            apply_pauli_add(u, v, sv);
            const double c = std::cos(theta * h), s = std::sin(theta * h);
            for (size_t i = 0; i < v.size(); ++i) v[i] = c * v[i] + cplx(0, s) * sv[i];
        }
    }

  private:
    PauliSum gen_;
    SparseOp g_;
    bool cubic_ = true;
    std::vector<PauliString> strings_;
};

// ---------------------------------------------------------------- compiled-circuit check

// Largest deviation between B^dag C|in> and the exact product of term
// exponentials in the realized order (Jordan-Wigner picture), after removing
// one global phase. Inputs are every basis state, or only the occupied state
// when pairs were compressed or when only_occupied is set.
inline double compilation_error(const CompileResult& r, const std::vector<OrbitalSequence>& seqs,
                                const std::vector<double>& thetas, const TransformSpec& spec, uint64_t occupied,
                                bool only_occupied = false) {
    const int n = spec.n();
    if (r.circuit.width() != n) throw ValidationError("compile result carries no circuit");
    std::vector<int> pos(r.labels.size());
    for (size_t q = 0; q < r.labels.size(); ++q) pos[r.labels[q]] = static_cast<int>(q);
    std::map<std::string, double> angle;
    for (size_t i = 0; i < seqs.size(); ++i) angle[relabel(seqs[i], pos).id()] = thetas.at(i);
    const uint64_t occ = relabel_mask(occupied, pos);
    auto sec = full_sector(n);
    std::vector<std::pair<TermOp, double>> ops;
    auto collect = [&](const Plan& plan, const std::vector<TrotterTerm>& terms) {
        for (auto& it : plan.items) {
            const auto& src = terms[it.term].source;
            ops.emplace_back(TermOp(excitation_generator(src, jw(n)), sec), angle.at(src.id()));
        }
    };
    collect(r.bosonic_plan, r.bosonic_terms);
    collect(r.plan, r.terms);
    const Circuit undo = basis_prefix_circuit(spec).inverse();
    // compressed pairs enter with only the even qubit set
    uint64_t odd = 0;
    for (int k : r.bosonic_pairs) odd |= uint64_t{1} << (2 * k + 1);
    std::vector<uint64_t> inputs;
    if (only_occupied || odd) inputs.push_back(occ);
    else
        for (uint64_t b = 0; b < (uint64_t{1} << n); ++b) inputs.push_back(b);
    cplx phase{0, 0};
    double err = 0;
    for (uint64_t b : inputs) {
        Statevector ref = basis_state(n, b), got = basis_state(n, b & ~odd);
        for (auto& [op, th] : ops) op.apply_exp(th, ref);
        simulate(r.circuit, got);
        simulate(undo, got);
        if (phase == cplx{0, 0}) {
            phase = inner(ref, got);
            if (std::abs(phase) < 0.5) return 1.0;
            phase /= std::abs(phase);
        }
        for (size_t i = 0; i < ref.size(); ++i) err = std::max(err, std::abs(got[i] - phase * ref[i]));
    }
    return err;
}

struct AnsatzOp {
    std::vector<OrbitalSequence> terms;
    std::vector<double> params;

    void validate() const {
        if (terms.size() != params.size()) throw DimensionError("one parameter per ansatz term is required");
    }
};

// HF reference: the lowest n_electrons spin orbitals filled, then encoded.
inline uint64_t hf_index(int n_electrons, int n_modes, const TransformSpec& spec) {
    if (n_electrons < 0 || n_electrons > n_modes) throw ValidationError("electron count exceeds modes");
    if (spec.n() != n_modes) throw DimensionError("transform size differs from mode count");
    uint64_t occ = n_electrons == 64 ? ~uint64_t{0} : (uint64_t{1} << n_electrons) - 1;
    return spec.beta.m.apply(occ);
}

inline Statevector hf_state(int n_electrons, int n_modes) {
    return basis_state(n_modes, hf_index(n_electrons, n_modes, jw(n_modes)));
}

inline Statevector hf_state(int n_electrons, int n_modes, const TransformSpec& spec) {
    return basis_state(n_modes, hf_index(n_electrons, n_modes, spec));
}

// Exact statevector emulation of U(theta)|HF> within one particle-number sector.
class Emulator {
  public:
    Emulator(const PauliSum& H, double core, TransformSpec spec, int n_elec)
        : spec_(std::move(spec)), n_elec_(n_elec), core_(core), sector_(number_sector(spec_, n_elec)),
          h_(H, sector_) {
        if (H.num_qubits() != spec_.n()) throw DimensionError("Hamiltonian and transform sizes differ");
        ref_ = hf_state(n_elec, spec_.n(), spec_);
        e_ref_ = std::real(inner(ref_, h_.apply(ref_)));
        h_shift_ = SparseOp(H, sector_, e_ref_);
    }

    int n() const { return spec_.n(); }
    int n_electrons() const { return n_elec_; }
    double core() const { return core_; }
    const TransformSpec& spec() const { return spec_; }
    const Sector& sector() const { return sector_; }
    const SparseOp& hamiltonian() const { return h_; }
    const Statevector& reference() const { return ref_; }

    const TermOp& term(const OrbitalSequence& s) {
        auto key = s.id();
        auto it = cache_.find(key);
        if (it == cache_.end())
            it = cache_.emplace(key, std::make_unique<TermOp>(excitation_generator(s, spec_, TermForm::AntiHermitian), sector_)).first;
        return *it->second;
    }

    void apply_ansatz(const AnsatzOp& a, Statevector& v) {
        a.validate();
        check_state(v, n());
        for (size_t j = 0; j < a.terms.size(); ++j) term(a.terms[j]).apply_exp(a.params[j], v);
    }
    Statevector prepare(const AnsatzOp& a) {
        Statevector v = ref_;
        apply_ansatz(a, v);
        return v;
    }

    // Total energy including the core constant.
    double energy(const Statevector& v) const {
        return std::real(inner(v, h_shift_.apply(v))) + e_ref_ * norm2(v) + core_;
    }
    double energy(const AnsatzOp& a) { return energy(prepare(a)); }
    double hf_energy() const { return e_ref_ + core_; }

    // Relative energy E - E_HF with its exact gradient (reverse sweep).
    double energy_and_gradient(const AnsatzOp& a, std::vector<double>& grad) {
        Statevector phi = prepare(a);
        Statevector lam = h_shift_.apply(phi);
        const double e = std::real(inner(phi, lam));
        grad.assign(a.terms.size(), 0.0);
        for (size_t jj = a.terms.size(); jj-- > 0;) {
            const auto& t = term(a.terms[jj]);
            grad[jj] = 2.0 * std::real(inner(lam, t.generator().apply(phi)));
            t.apply_exp(-a.params[jj], phi);
            t.apply_exp(-a.params[jj], lam);
        }
        return e;
    }

  private:
    TransformSpec spec_;
    int n_elec_;
    double core_;
    Sector sector_;
    SparseOp h_, h_shift_;
    Statevector ref_;
    double e_ref_ = 0;
    std::unordered_map<std::string, std::unique_ptr<TermOp>> cache_;
};

inline Statevector apply_ansatz(const Statevector& state, const AnsatzOp& a, Emulator& emu) {
    Statevector v = state;
    emu.apply_ansatz(a, v);
    if (std::abs(norm2(v) - norm2(state)) > 1e-12) throw ContractViolation("ansatz did not preserve the norm");
    return v;
}

// ---------------------------------------------------------------- VQE

struct VQEOptions {
    double grad_tol = 1e-7;
    int max_iter = 2000;
    double initial_step = 0.01;
    double line_tol = 0.1;
};

struct VQEResult {
    double energy = 0;
    std::vector<double> params;
    double grad_norm = 0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

struct VQEProblem {
    Emulator* emu;
    AnsatzOp a;
    std::vector<double> g;
};

inline void load(VQEProblem* p, const gsl_vector* x) {
    for (size_t j = 0; j < p->a.params.size(); ++j) p->a.params[j] = gsl_vector_get(x, j);
}
inline double vqe_f(const gsl_vector* x, void* data) {
    auto* p = static_cast<VQEProblem*>(data);
    load(p, x);
    return p->emu->energy_and_gradient(p->a, p->g);
}
inline void vqe_df(const gsl_vector* x, void* data, gsl_vector* df) {
    auto* p = static_cast<VQEProblem*>(data);
    load(p, x);
    p->emu->energy_and_gradient(p->a, p->g);
    for (size_t j = 0; j < p->g.size(); ++j) gsl_vector_set(df, j, p->g[j]);
}
inline void vqe_fdf(const gsl_vector* x, void* data, double* f, gsl_vector* df) {
    auto* p = static_cast<VQEProblem*>(data);
    load(p, x);
    *f = p->emu->energy_and_gradient(p->a, p->g);
    for (size_t j = 0; j < p->g.size(); ++j) gsl_vector_set(df, j, p->g[j]);
}

inline double norm(const std::vector<double>& g) {
    double s = 0;
    for (double v : g) s += v * v;
    return std::sqrt(s);
}

}  // namespace detail

// Quasi-Newton minimization of <HF|U^dag H U|HF> over the ansatz parameters.
inline VQEResult vqe_minimize(Emulator& emu, const std::vector<OrbitalSequence>& terms, const std::vector<double>& initial,
                              const VQEOptions& opt = {}) {
    AnsatzOp a{terms, initial};
    a.validate();
    VQEResult r;
    r.params = initial;
    if (terms.empty()) {
        r.energy = emu.hf_energy();
        r.converged = true;
        return r;
    }
    gsl_set_error_handler_off();
    const size_t m = terms.size();
    detail::VQEProblem prob{&emu, a, {}};
    gsl_multimin_function_fdf fdf{&detail::vqe_f, &detail::vqe_df, &detail::vqe_fdf, m, &prob};
    gsl_vector* x = gsl_vector_alloc(m);
    for (size_t j = 0; j < m; ++j) gsl_vector_set(x, j, initial[j]);
    gsl_multimin_fdfminimizer* s = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, m);
    gsl_multimin_fdfminimizer_set(s, &fdf, x, opt.initial_step, opt.line_tol);
    int restarts = 0;
    for (r.iterations = 0; r.iterations < opt.max_iter; ++r.iterations) {
        if (gsl_multimin_test_gradient(s->gradient, opt.grad_tol) == GSL_SUCCESS) break;
        int status = gsl_multimin_fdfminimizer_iterate(s);
        if (status != GSL_SUCCESS) {
            // stalled line search: restart from the current point a few times
            if (++restarts > 5) break;
            gsl_multimin_fdfminimizer_restart(s);
        }
    }
    AnsatzOp best{terms, std::vector<double>(m)};
    for (size_t j = 0; j < m; ++j) best.params[j] = gsl_vector_get(s->x, j);
    std::vector<double> g;
    emu.energy_and_gradient(best, g);
    r.params = best.params;
    r.grad_norm = detail::norm(g);
    r.converged = r.grad_norm < opt.grad_tol;
    r.energy = emu.energy(best);
    gsl_multimin_fdfminimizer_free(s);
    gsl_vector_free(x);
    return r;
}

// ---------------------------------------------------------------- perturbative pieces

// Orbital-energy difference: occupied (annihilated) minus virtual (created).
inline double excitation_gap(const OrbitalSequence& s, const FockData& f) {
    double d = 0;
    for (int r : s.annihilators()) d += f.orbital_energies.at(r);
    for (int p : s.creators()) d -= f.orbital_energies.at(p);
    return d;
}

inline constexpr double kDegenerateGap = 1e-8;

struct MP2Result {
    double e_corr = 0;
    std::vector<std::pair<OrbitalSequence, double>> amplitudes;
    std::vector<std::string> warnings;
};

// Canonical spin-orbital MP2 from chemist-notation integrals. Amplitudes are
// <D|H|HF>/gap for D = (excitation operator)|HF>.
inline MP2Result mp2_classical(const SpatialIntegrals& s, const FockData& f, bool include_singles = true) {
    MP2Result r;
    auto sp = [](int p) { return p & 1; };
    auto g = [&](int p, int q, int u, int v) {
        // (pq|uv) over spin orbitals
        if (sp(p) != sp(q) || sp(u) != sp(v)) return 0.0;
        return s.two(p / 2, q / 2, u / 2, v / 2);
    };
    for (auto& e : all_excitations(f.occupied, f.virtual_)) {
        double m = 0;
        if (e.kind == OrbitalSequence::Single) {
            if (!include_singles) continue;
            int a = e.idx[0], i = e.idx[1];
            m = sp(a) == sp(i) ? s.one(a / 2, i / 2) : 0.0;
            for (int j : f.occupied) m += g(a, i, j, j) - g(a, j, j, i);
        } else {
            int a = e.idx[0], b = e.idx[1], i = e.idx[2], j = e.idx[3];
            m = g(a, j, b, i) - g(a, i, b, j);
        }
        double gap = excitation_gap(e, f);
        if (std::abs(gap) < kDegenerateGap) {
            if (std::abs(m) > 0) r.warnings.push_back("degenerate gap for " + e.id() + "; term excluded");
            continue;
        }
        r.e_corr += m * m / gap;
        r.amplitudes.push_back({e, m / gap});
    }
    return r;
}

// Number operator weighted by orbital energies.
inline PauliSum fock_operator(const FockData& f, const TransformSpec& spec) {
    FermionOperator op{spec.n(), {}};
    for (int p = 0; p < spec.n(); ++p) op.add(f.orbital_energies.at(p), {cre(p), ann(p)});
    return map_operator(op, spec);
}

struct PerturbationTerms {
    std::vector<OrbitalSequence> alphas;
    std::vector<cplx> numerators;  // approximations of <D_a|V|HF>
    std::vector<double> gaps;
    std::vector<bool> used;
    std::vector<std::string> warnings;

    double energy() const {
        double e = 0;
        for (size_t k = 0; k < alphas.size(); ++k)
            if (used[k]) e += std::norm(numerators[k]) / gaps[k];
        return e;
    }
    cplx amplitude(size_t k) const { return used[k] ? numerators[k] / gaps[k] : cplx{0, 0}; }
};

// <psi| D~^dag H - D~^dag Z~ H + Z~ D~^dag H |psi> for every alpha, with each
// expectation taken exactly on the statevector.
inline PerturbationTerms hmp2_terms(Emulator& emu, const Statevector& psi, const AnsatzOp& ansatz,
                                    const std::vector<OrbitalSequence>& alphas, const FockData& f) {
    ansatz.validate();
    PerturbationTerms out;
    out.alphas = alphas;
    auto ztilde = [&](const Statevector& v) {
        Statevector r(v.size());
        for (size_t j = 0; j < ansatz.terms.size(); ++j) emu.term(ansatz.terms[j]).generator().apply_add(v, r, ansatz.params[j]);
        return r;
    };
    const Statevector h = emu.hamiltonian().apply(psi);
    const Statevector zh = ztilde(h);
    const Statevector zpsi = ztilde(psi);
    for (auto& al : alphas) {
        const SparseOp& D = emu.term(al).generator();  // D~ = D - D^dag
        // <psi|D~^dag v> = -<psi|D~ v> = <D~ psi|v>
        const Statevector dpsi = D.apply(psi);
        const Statevector dzpsi = D.apply(zpsi);
        cplx num = inner(dpsi, h) - inner(dpsi, zh);
        // <psi|Z~ D~^dag h> = <Z~^dag psi|D~^dag h> = <D~ Z~^dag psi|h> = -<D~ Z~ psi|h>
        num -= inner(dzpsi, h);
        double gap = excitation_gap(al, f);
        bool ok = std::abs(gap) >= kDegenerateGap;
        if (!ok) out.warnings.push_back("degenerate gap for " + al.id() + "; term excluded");
        out.numerators.push_back(num);
        out.gaps.push_back(gap);
        out.used.push_back(ok);
    }
    return out;
}

inline double hmp2_correct(Emulator& emu, const Statevector& psi, const AnsatzOp& ansatz,
                           const std::vector<OrbitalSequence>& alphas, const FockData& f) {
    return hmp2_terms(emu, psi, ansatz, alphas, f).energy();
}

inline std::vector<std::pair<OrbitalSequence, cplx>> wavefunction_correction(const PerturbationTerms& pt) {
    std::vector<std::pair<OrbitalSequence, cplx>> v;
    for (size_t k = 0; k < pt.alphas.size(); ++k)
        if (pt.used[k]) v.push_back({pt.alphas[k], pt.amplitude(k)});
    return v;
}

inline std::vector<std::pair<OrbitalSequence, cplx>> wavefunction_correction(Emulator& emu, const Statevector& psi,
                                                                             const AnsatzOp& ansatz,
                                                                             const std::vector<OrbitalSequence>& alphas,
                                                                             const FockData& f) {
    return wavefunction_correction(hmp2_terms(emu, psi, ansatz, alphas, f));
}

// First-order wavefunction as a statevector: sum_a c_a D_a|HF>.
inline Statevector first_order_state(Emulator& emu, const PerturbationTerms& pt) {
    Statevector v(emu.reference().size());
    for (size_t k = 0; k < pt.alphas.size(); ++k)
        if (pt.used[k]) emu.term(pt.alphas[k]).generator().apply_add(emu.reference(), v, pt.amplitude(k));
    return v;
}

struct CandidateScore {
    OrbitalSequence seq;
    int weight = 0;  // added fermionic operators
    cplx overlap{0, 0};
    double score = 0;
    double predicted_gain = 0;  // |<D|V|HF>|^2 / |gap|
};

struct Selection {
    std::vector<CandidateScore> scores;  // descending score
    std::vector<OrbitalSequence> chosen;
    std::vector<double> initial_guesses;
    bool pool_empty = false;
};

// Score every single-term extension of the ansatz and pick the best, adding
// exact ties (spin partners) together. The new parameter is seeded with
// +/- the overlap, whichever gives the lower energy.
inline Selection select_next(Emulator& emu, const Statevector& psi, const AnsatzOp& current, const PerturbationTerms& pt,
                             double degenerate_rel_tol = 1e-6) {
    Selection sel;
    const Statevector psi1 = first_order_state(emu, pt);
    std::set<std::string> have;
    for (auto& t : current.terms) have.insert(t.id());
    for (size_t k = 0; k < pt.alphas.size(); ++k) {
        const auto& al = pt.alphas[k];
        if (have.count(al.id()) || !pt.used[k]) continue;
        CandidateScore c;
        c.seq = al;
        c.weight = static_cast<int>(al.idx.size());
        c.overlap = inner(emu.term(al).generator().apply(psi), psi1);
        c.score = std::abs(c.overlap) / c.weight;
        c.predicted_gain = std::norm(pt.numerators[k]) / std::abs(pt.gaps[k]);
        sel.scores.push_back(c);
    }
    std::stable_sort(sel.scores.begin(), sel.scores.end(),
                     [](const CandidateScore& a, const CandidateScore& b) { return a.score > b.score; });
    if (sel.scores.empty() || sel.scores[0].score <= 0) {
        sel.pool_empty = true;
        return sel;
    }
    const double top = sel.scores[0].score;
    for (auto& c : sel.scores) {
        if (c.score < top * (1 - degenerate_rel_tol)) break;
        double guess = std::real(c.overlap);
        AnsatzOp plus = current, minus = current;
        plus.terms.push_back(c.seq), plus.params.push_back(guess);
        minus.terms.push_back(c.seq), minus.params.push_back(-guess);
        if (emu.energy(minus) < emu.energy(plus)) guess = -guess;
        sel.chosen.push_back(c.seq);
        sel.initial_guesses.push_back(guess);
    }
    return sel;
}

// ---------------------------------------------------------------- the loop

struct HMP2Config {
    double delta_e = 1e-5;
    // Initial set: terms whose MP2 contribution exceeds this; NaN means delta_e.
    // When nothing passes, the best-scoring term (with exact ties) starts the run.
    double initial_threshold = std::numeric_limits<double>::quiet_NaN();
    int max_cycles = 60;
    double degenerate_rel_tol = 1e-6;
    bool include_singles = true;
    VQEOptions vqe;
};

struct HMP2Report {
    int cycle = 0;
    std::vector<OrbitalSequence> terms;
    std::vector<double> params;
    double e_vqe = 0, e_corr2 = 0, e_total = 0;
    double grad_norm = 0;
    int vqe_iterations = 0;
    bool vqe_converged = false;
    std::vector<std::pair<OrbitalSequence, cplx>> amplitudes;
    Selection next;
    double max_predicted_gain = 0;

    int n_terms() const { return static_cast<int>(terms.size()); }
};

struct HMP2Run {
    double e_hf = 0;
    double e_mp2 = 0;  // classical, m = 0
    std::vector<HMP2Report> cycles;
    bool converged = false;
    bool cycle_cap_hit = false;
    std::vector<std::string> warnings;
};

inline std::vector<OrbitalSequence> excitation_pool(const FockData& f, bool include_singles) {
    std::vector<OrbitalSequence> v;
    for (auto& e : all_excitations(f.occupied, f.virtual_))
        if (include_singles || e.kind == OrbitalSequence::Double) v.push_back(e);
    return v;
}

inline HMP2Run run_hmp2_loop(Emulator& emu, const FockData& f, const HMP2Config& cfg,
                             const std::function<void(const HMP2Report&)>& on_cycle = {}) {
    HMP2Run run;
    const auto alphas = excitation_pool(f, cfg.include_singles);
    run.e_hf = emu.hf_energy();
    // m = 0: classical pass around the reference.
    AnsatzOp cur;
    auto pt0 = hmp2_terms(emu, emu.reference(), cur, alphas, f);
    run.e_mp2 = run.e_hf + pt0.energy();
    for (auto& w : pt0.warnings) run.warnings.push_back(w);
    const double thr = std::isnan(cfg.initial_threshold) ? cfg.delta_e : cfg.initial_threshold;
    for (size_t k = 0; k < alphas.size(); ++k)
        if (pt0.used[k] && std::norm(pt0.numerators[k]) / std::abs(pt0.gaps[k]) > thr) {
            cur.terms.push_back(alphas[k]);
            cur.params.push_back(std::real(pt0.amplitude(k)));
        }
    if (cur.terms.empty()) {
        auto sel = select_next(emu, emu.reference(), cur, pt0, cfg.degenerate_rel_tol);
        if (sel.pool_empty) {
            run.converged = true;
            return run;
        }
        cur.terms = sel.chosen;
        cur.params = sel.initial_guesses;
    }
    for (int cycle = 1;; ++cycle) {
        if (cycle > cfg.max_cycles) {
            run.cycle_cap_hit = true;
            break;
        }
        auto vr = vqe_minimize(emu, cur.terms, cur.params, cfg.vqe);
        cur.params = vr.params;
        HMP2Report rep;
        rep.cycle = cycle;
        rep.terms = cur.terms;
        rep.params = cur.params;
        rep.e_vqe = vr.energy;
        rep.grad_norm = vr.grad_norm;
        rep.vqe_iterations = vr.iterations;
        rep.vqe_converged = vr.converged;
        if (!vr.converged) run.warnings.push_back("cycle " + std::to_string(cycle) + ": optimizer stopped above the gradient tolerance");
        const Statevector psi = emu.prepare(cur);
        auto pt = hmp2_terms(emu, psi, cur, alphas, f);
        rep.e_corr2 = pt.energy();
        rep.e_total = rep.e_vqe + rep.e_corr2;
        rep.amplitudes = wavefunction_correction(pt);
        rep.next = select_next(emu, psi, cur, pt, cfg.degenerate_rel_tol);
        for (auto& c : rep.next.scores) rep.max_predicted_gain = std::max(rep.max_predicted_gain, c.predicted_gain);
        run.cycles.push_back(rep);
        if (on_cycle) on_cycle(run.cycles.back());
        if (rep.next.pool_empty || rep.max_predicted_gain < cfg.delta_e) {
            run.converged = true;
            break;
        }
        for (size_t k = 0; k < rep.next.chosen.size(); ++k) {
            cur.terms.push_back(rep.next.chosen[k]);
            cur.params.push_back(rep.next.initial_guesses[k]);
        }
    }
    return run;
}

inline void write_hmp2_csv(std::ostream& os, const HMP2Run& run) {
    os.precision(12);
    os << "cycle,N_terms,E_vqe,E_corr2,E_total,chosen_term,F_score\n";
    for (auto& c : run.cycles) {
        os << c.cycle << ',' << c.n_terms() << ',' << c.e_vqe << ',' << c.e_corr2 << ',' << c.e_total << ",\"";
        for (size_t k = 0; k < c.next.chosen.size(); ++k) os << (k ? ";" : "") << c.next.chosen[k].id();
        os << "\"," << (c.next.scores.empty() ? 0.0 : c.next.scores[0].score) << '\n';
    }
}

inline void write_hmp2_report(std::ostream& os, const HMP2Run& run) {
    os.precision(12);
    os << "e_hf=" << run.e_hf << "\ne_mp2=" << run.e_mp2 << "\ncycles=" << run.cycles.size()
       << "\nconverged=" << run.converged << "\ncycle_cap_hit=" << run.cycle_cap_hit << "\n";
    if (!run.cycles.empty()) {
        auto& l = run.cycles.back();
        os << "final_terms=" << l.n_terms() << "\nfinal_e_vqe=" << l.e_vqe << "\nfinal_e_total=" << l.e_total << "\n";
    }
    for (auto& w : run.warnings) os << "warning=" << w << "\n";
}

}  // namespace fermiopt
