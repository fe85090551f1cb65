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

#include <array>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fermiopt/pauli.hpp"

namespace fermiopt {

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct LadderOp {
    int mode = 0;
    bool dagger = false;
    bool operator==(const LadderOp&) const = default;
};

inline LadderOp cre(int p) { return {p, true}; }
inline LadderOp ann(int p) { return {p, false}; }

struct FermionTerm {
    cplx coeff{1, 0};
    std::vector<LadderOp> ops;
};

struct FermionOperator {
    int n_modes = 0;
    std::vector<FermionTerm> terms;

    void add(cplx c, std::vector<LadderOp> ops) {
        for (auto& o : ops)
            if (o.mode < 0 || o.mode >= n_modes) throw std::out_of_range("mode index out of range");
        terms.push_back({c, std::move(ops)});
    }
    // Hermitian conjugate: reverse order, flip daggers, conjugate.
    FermionOperator adjoint() const {
        FermionOperator r{n_modes, {}};
        r.terms.reserve(terms.size());
        for (auto& t : terms) {
            FermionTerm a{std::conj(t.coeff), {}};
            for (auto it = t.ops.rbegin(); it != t.ops.rend(); ++it) a.ops.push_back({it->mode, !it->dagger});
            r.terms.push_back(std::move(a));
        }
        return r;
    }
};

// Spin orbitals are interleaved: 2k is alpha, 2k+1 is beta of spatial orbital k.
inline int spin_orbital(int spatial, int spin) { return 2 * spatial + spin; }

struct MolecularHamiltonian {
    int n_modes = 0;
    double core_energy = 0.0;
    std::map<std::array<int, 2>, cplx> h1;  // h_pr a+_p a_r
    std::map<std::array<int, 4>, cplx> h2;  // h_pqrs a+_p a+_q a_r a_s

    // Throws listing every (p,r) / (p,q,r,s) whose conjugate partner disagrees.
    void validate(double tol = 1e-10) const {
        std::ostringstream bad;
        for (auto& [k, v] : h1) {
            if (k[0] < 0 || k[1] < 0 || k[0] >= n_modes || k[1] >= n_modes) throw std::out_of_range("h1 index");
            auto it = h1.find({k[1], k[0]});
            cplx w = it == h1.end() ? cplx{0, 0} : it->second;
            if (std::abs(std::conj(v) - w) > tol) bad << " (" << k[0] << "," << k[1] << ")";
        }
        // (a+p a+q a_r a_s)^dagger = a+s a+r a_q a_p
        for (auto& [k, v] : h2) {
            for (int i : k)
                if (i < 0 || i >= n_modes) throw std::out_of_range("h2 index");
            std::array<int, 4> c{k[3], k[2], k[1], k[0]};
            auto it = h2.find(c);
            cplx w = it == h2.end() ? cplx{0, 0} : it->second;
            if (std::abs(std::conj(v) - w) > tol)
                bad << " (" << k[0] << "," << k[1] << "," << k[2] << "," << k[3] << ")";
        }
        if (!bad.str().empty()) throw ValidationError("non-Hermitian coefficients at" + bad.str());
    }
};

inline FermionOperator build_hamiltonian(const MolecularHamiltonian& h) {
    h.validate();
    FermionOperator op{h.n_modes, {}};
    for (auto& [k, v] : h.h1)
        if (std::abs(v) >= kDropTol) op.add(v, {cre(k[0]), ann(k[1])});
    for (auto& [k, v] : h.h2)
        if (std::abs(v) >= kDropTol) op.add(v, {cre(k[0]), cre(k[1]), ann(k[2]), ann(k[3])});
    return op;
}

// Spatial integrals in chemist notation, as read from an integral file.
struct SpatialIntegrals {
    int n_orb = 0;
    int n_elec = 0;
    int ms2 = 0;
    double core = 0.0;
    std::vector<double> h1;           // n_orb^2, full symmetric
    std::vector<double> eri;          // n_orb^4, full 8-fold expanded
    std::vector<double> orb_energies; // empty if absent

    double& one(int i, int j) { return h1[i * n_orb + j]; }
    double one(int i, int j) const { return h1[i * n_orb + j]; }
    double& two(int i, int j, int k, int l) { return eri[((i * n_orb + j) * n_orb + k) * n_orb + l]; }
    double two(int i, int j, int k, int l) const { return eri[((i * n_orb + j) * n_orb + k) * n_orb + l]; }
};

// H = sum h_ij a+_i a_j + 1/2 sum (ij|kl) a+_i a+_k a_l a_j over spin orbitals.
inline MolecularHamiltonian spin_hamiltonian(const SpatialIntegrals& s, double tol = 1e-14) {
    MolecularHamiltonian h;
    h.n_modes = 2 * s.n_orb;
    h.core_energy = s.core;
    const int n = s.n_orb;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double v = s.one(i, j);
            if (std::abs(v) < tol) continue;
            for (int sp = 0; sp < 2; ++sp) h.h1[{spin_orbital(i, sp), spin_orbital(j, sp)}] += v;
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    double v = s.two(i, j, k, l);
                    if (std::abs(v) < tol) continue;
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b) {
                            int p = spin_orbital(i, a), q = spin_orbital(k, b);
                            int r = spin_orbital(l, b), t = spin_orbital(j, a);
                            if (p == q || r == t) continue;
                            h.h2[{p, q, r, t}] += 0.5 * v;
                        }
                }
    return h;
}

struct FockData {
    std::vector<double> orbital_energies;  // per spin orbital
    std::vector<int> occupied;
    std::vector<int> virtual_;
    double E0 = 0.0;  // sum of occupied orbital energies
};

inline FockData make_fock(const SpatialIntegrals& s) {
    if (static_cast<int>(s.orb_energies.size()) != s.n_orb)
        throw ValidationError("orbital energies are required (one per spatial orbital)");
    FockData f;
    for (int i = 0; i < s.n_orb; ++i)
        for (int sp = 0; sp < 2; ++sp) f.orbital_energies.push_back(s.orb_energies[i]);
    int nso = 2 * s.n_orb;
    for (int p = 0; p < nso; ++p) (p < s.n_elec ? f.occupied : f.virtual_).push_back(p);
    for (int p : f.occupied) f.E0 += f.orbital_energies[p];
    return f;
}

// Excitation a+_p a_r (single) or a+_p a+_q a_r a_s (double); creators virtual, annihilators occupied.
struct OrbitalSequence {
    enum Kind { Single, Double } kind = Single;
    std::vector<int> idx;

    static OrbitalSequence single(int p, int r) { return {Single, {p, r}}; }
    static OrbitalSequence dbl(int p, int q, int r, int s) { return {Double, {p, q, r, s}}; }

    std::vector<int> creators() const {
        return kind == Single ? std::vector<int>{idx[0]} : std::vector<int>{idx[0], idx[1]};
    }
    std::vector<int> annihilators() const {
        return kind == Single ? std::vector<int>{idx[1]} : std::vector<int>{idx[2], idx[3]};
    }
    std::string id() const {
        std::string s = kind == Single ? "S" : "D";
        for (size_t i = 0; i < idx.size(); ++i) s += (i ? "," : ":") + std::to_string(idx[i]);
        return s;
    }
    bool operator==(const OrbitalSequence&) const = default;
    bool operator<(const OrbitalSequence& o) const {
        return kind != o.kind ? kind < o.kind : idx < o.idx;
    }
    std::vector<LadderOp> ops() const {
        std::vector<LadderOp> v;
        for (int p : creators()) v.push_back(cre(p));
        for (int r : annihilators()) v.push_back(ann(r));
        return v;
    }
};

// Ordered parameter names with values; unset names read as 0.
class ParameterSet {
public:
    void declare(const std::string& name) {
        if (!values_.count(name)) {
            names_.push_back(name);
            values_[name] = 0.0;
        }
    }
    void set(const std::string& name, double v) {
        declare(name);
        values_[name] = v;
    }
    double get(const std::string& name) const {
        auto it = values_.find(name);
        return it == values_.end() ? 0.0 : it->second;
    }
    bool has(const std::string& name) const { return values_.count(name) > 0; }
    const std::vector<std::string>& names() const { return names_; }
    size_t size() const { return names_.size(); }

private:
    std::vector<std::string> names_;
    std::map<std::string, double> values_;
};

// All spin-conserving singles and doubles with p>q, r>s, in a fixed order.
inline std::vector<OrbitalSequence> all_excitations(const std::vector<int>& occ, const std::vector<int>& virt,
                                                    bool spin_conserving = true) {
    std::vector<OrbitalSequence> out;
    auto spin = [](int p) { return p & 1; };
    for (int a : virt)
        for (int i : occ)
            if (!spin_conserving || spin(a) == spin(i)) out.push_back(OrbitalSequence::single(a, i));
    for (size_t ia = 0; ia < virt.size(); ++ia)
        for (size_t ib = ia + 1; ib < virt.size(); ++ib)
            for (size_t ii = 0; ii < occ.size(); ++ii)
                for (size_t ij = ii + 1; ij < occ.size(); ++ij) {
                    int a = virt[ib], b = virt[ia], i = occ[ij], j = occ[ii];
                    if (spin_conserving && spin(a) + spin(b) != spin(i) + spin(j)) continue;
                    out.push_back(OrbitalSequence::dbl(a, b, i, j));
                }
    return out;
}

inline FermionOperator build_uccsd(int n_modes, const std::vector<int>& occ, const std::vector<int>& virt,
                                   const std::vector<OrbitalSequence>& selected, const ParameterSet& params) {
    std::set<int> so(occ.begin(), occ.end()), sv(virt.begin(), virt.end());
    std::set<OrbitalSequence> seen;
    FermionOperator z{n_modes, {}};
    for (auto& s : selected) {
        if (!seen.insert(s).second) throw ValidationError("duplicate excitation " + s.id());
        for (int p : s.idx)
            if (p < 0 || p >= n_modes) throw std::out_of_range("excitation index out of range: " + s.id());
        auto c = s.creators(), a = s.annihilators();
        for (int p : c)
            if (!sv.count(p)) throw ValidationError("creator not virtual in " + s.id());
        for (int r : a)
            if (!so.count(r)) throw ValidationError("annihilator not occupied in " + s.id());
        if (c.size() == 2 && c[0] == c[1]) throw ValidationError("repeated creator in " + s.id());
        if (a.size() == 2 && a[0] == a[1]) throw ValidationError("repeated annihilator in " + s.id());
        double t = params.get(s.id());
        if (t == 0.0) continue;
        z.add(t, s.ops());
    }
    FermionOperator out = z;
    for (auto& t : z.adjoint().terms) out.terms.push_back({-t.coeff, t.ops});
    return out;
}

}  // namespace fermiopt
