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
#include <bit>
#include <cstdint>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fermiopt/circuit.hpp"
#include "fermiopt/synth_trotter.hpp"
#include "fermiopt/transform.hpp"

namespace fermiopt {

// ---------------------------------------------------------------- qubit-space reduction

// Register split for a state whose classical qubits sit in a basis state and
// whose paired qubits only populate |00> and |11>.
struct QSRContext {
    int n = 0;
    std::vector<int> entangled;
    std::vector<std::pair<int, int>> classical;  // (qubit, value)
    std::vector<std::pair<int, int>> pairs;      // (q0, q1), compressed onto one qubit

    int reduced_qubits() const { return static_cast<int>(entangled.size() + pairs.size()); }

    void validate() const {
        std::vector<int> seen(n, 0);
        auto mark = [&](int q) {
            if (q < 0 || q >= n) throw ValidationError("qubit " + std::to_string(q) + " outside the register");
            if (seen[q]++) throw ValidationError("qubit " + std::to_string(q) + " assigned twice");
        };
        for (int q : entangled) mark(q);
        for (auto& [q, v] : classical) {
            mark(q);
            if (v != 0 && v != 1) throw ValidationError("classical value must be 0 or 1");
        }
        for (auto& [a, b] : pairs) mark(a), mark(b);
        for (int q = 0; q < n; ++q)
            if (!seen[q]) throw ValidationError("qubit " + std::to_string(q) + " not assigned");
    }

    static QSRContext trivial(int n) {
        QSRContext c;
        c.n = n;
        for (int q = 0; q < n; ++q) c.entangled.push_back(q);
        return c;
    }
};

// reduced.coeff keeps the input coefficient; factor carries the classical
// letters and pair signs. factor == 0 means the string drops out.
struct QSRResult {
    PauliString reduced;
    double factor = 1.0;
    bool null() const { return factor == 0.0; }
};

inline QSRResult qsr_compress(const PauliString& s, const QSRContext& ctx) {
    if (s.n != ctx.n) throw DimensionError("string size differs from the context register");
    QSRResult r{PauliString(ctx.reduced_qubits(), 0, 0, s.coeff), 1.0};
    for (auto& [q, v] : ctx.classical) {
        Letter l = s.get(q);
        if (l == Letter::X || l == Letter::Y) return {r.reduced, 0.0};
        if (l == Letter::Z && v) r.factor = -r.factor;
    }
    for (size_t i = 0; i < ctx.entangled.size(); ++i) r.reduced.set(static_cast<int>(i), s.get(ctx.entangled[i]));
    for (size_t k = 0; k < ctx.pairs.size(); ++k) {
        auto pc = compress_pair(s.get(ctx.pairs[k].first), s.get(ctx.pairs[k].second));
        if (pc.null) return {r.reduced, 0.0};
        r.factor *= pc.sign;
        r.reduced.set(static_cast<int>(ctx.entangled.size() + k), pc.letter);
    }
    return r;
}

inline PauliSum qsr_compress(const PauliSum& op, const QSRContext& ctx) {
    PauliSum out(ctx.reduced_qubits());
    for (auto& s : op.terms()) {
        auto r = qsr_compress(s, ctx);
        if (r.null()) continue;
        r.reduced.coeff *= r.factor;
        out.add(r.reduced);
    }
    out.canonicalize();
    return out;
}

// Context for the state U(terms)|HF>. Modes no term touches stay classical.
// Under Jordan-Wigner, spatial orbitals touched only by paired doubles with
// symmetric occupation are compressed; other transforms get no pairs.
inline QSRContext qsr_context(const std::vector<OrbitalSequence>& terms, const TransformSpec& spec, int n_electrons) {
    const int n = spec.n();
    if (n_electrons < 0 || n_electrons > n) throw ValidationError("electron count exceeds modes");
    const uint64_t occ = n_electrons == 64 ? ~uint64_t{0} : (uint64_t{1} << n_electrons) - 1;
    uint64_t touched = 0;
    for (auto& t : terms)
        for (int p : t.idx) {
            if (p < 0 || p >= n) throw DimensionError("excitation " + t.id() + " exceeds the register");
            touched |= uint64_t{1} << p;
        }
    QSRContext ctx;
    ctx.n = n;
    uint64_t paired = 0;
    if (spec.beta.is_identity()) {
        for (int k = 0; 2 * k + 1 < n; ++k) {
            uint64_t m = uint64_t{3} << (2 * k);
            if (!(touched & m) || ((occ >> (2 * k)) & 1) != ((occ >> (2 * k + 1)) & 1)) continue;
            bool ok = true;
            for (auto& t : terms) {
                bool hits = false;
                for (int p : t.idx) hits |= p / 2 == k;
                if (!hits) continue;
                auto pm = bosonic_pairing(t);
                ok = ok && pm && (pm->first == k || pm->second == k);
            }
            if (ok) {
                paired |= m;
                ctx.pairs.push_back({2 * k, 2 * k + 1});
            }
        }
    }
    for (int q = 0; q < n; ++q) {
        if ((paired >> q) & 1) continue;
        uint64_t row = spec.beta.m.rows[q];
        if (row & touched) ctx.entangled.push_back(q);
        else ctx.classical.push_back({q, std::popcount(row & occ) & 1});
    }
    return ctx;
}

// ---------------------------------------------------------------- Clifford conjugation

namespace detail {

// Images U X_q U^dag and U Z_q U^dag for one Clifford gate.
inline std::pair<PauliString, PauliString> clifford_images(const Gate& g, int n, int q) {
    auto letter = [&](std::initializer_list<std::pair<int, Letter>> ls, double sign = 1.0) {
        PauliString p(n, 0, 0, sign);
        for (auto& [w, l] : ls) p.set(w, l);
        return p;
    };
    PauliString X = letter({{q, Letter::X}}), Z = letter({{q, Letter::Z}});
    const int a = g.q[0], b = g.q[1];
    switch (g.kind) {
        case GateKind::H:
            if (q == a) return {Z, X};
            break;
        case GateKind::S:
            if (q == a) return {letter({{q, Letter::Y}}), Z};
            break;
        case GateKind::Sdg:
            if (q == a) return {letter({{q, Letter::Y}}, -1.0), Z};
            break;
        case GateKind::X:
            if (q == a) return {X, letter({{q, Letter::Z}}, -1.0)};
            break;
        case GateKind::Z:
            if (q == a) return {letter({{q, Letter::X}}, -1.0), Z};
            break;
        case GateKind::CNOT:
            if (q == a) return {letter({{a, Letter::X}, {b, Letter::X}}), Z};
            if (q == b) return {X, letter({{a, Letter::Z}, {b, Letter::Z}})};
            break;
        case GateKind::CZ:
            if (q == a) return {letter({{a, Letter::X}, {b, Letter::Z}}), Z};
            if (q == b) return {letter({{a, Letter::Z}, {b, Letter::X}}), Z};
            break;
        default:
            throw std::invalid_argument(std::string("gate ") + gate_name(g.kind) + " is not a supported Clifford");
    }
    return {X, Z};
}

}  // namespace detail

// U P U^dag with exact phase, U the circuit unitary.
inline PauliString conjugate(const PauliString& p, const Circuit& c) {
    if (p.n > c.width()) throw DimensionError("string wider than the circuit");
    const int n = c.width();
    PauliString cur(n, p.x, p.z, p.coeff);
    for (const Gate& g : c.gates) {
        // P = i^{|x&z|} prod X^x prod Z^z
        PauliString img = PauliString::identity(n, cur.coeff * ipow(std::popcount(cur.x & cur.z)));
        for (int q = 0; q < n; ++q)
            if ((cur.x >> q) & 1) img = multiply(img, detail::clifford_images(g, n, q).first);
        for (int q = 0; q < n; ++q)
            if ((cur.z >> q) & 1) img = multiply(img, detail::clifford_images(g, n, q).second);
        cur = img;
    }
    return PauliString(p.n, cur.x, cur.z, cur.coeff);
}

inline bool is_z_type(const PauliString& p) { return p.x == 0; }

namespace detail {

struct Tableau {
    std::vector<std::pair<uint64_t, uint64_t>> rows;  // (x, z)
    Circuit c;

    void apply(const Gate& g) {
        const int a = g.q[0], b = g.q[1];
        auto bit = [](uint64_t v, int q) { return (v >> q) & 1; };
        for (auto& [x, z] : rows) {
            switch (g.kind) {
                case GateKind::H: {
                    uint64_t xa = bit(x, a), za = bit(z, a);
                    x = (x & ~(uint64_t{1} << a)) | (za << a);
                    z = (z & ~(uint64_t{1} << a)) | (xa << a);
                    break;
                }
                case GateKind::S: z ^= bit(x, a) << a; break;
                case GateKind::CNOT:
                    x ^= bit(x, a) << b;
                    z ^= bit(z, b) << a;
                    break;
                case GateKind::CZ:
                    z ^= bit(x, a) << b;
                    z ^= bit(x, b) << a;
                    break;
                default: throw std::logic_error("unexpected gate in elimination");
            }
        }
        c.add(g);
    }
};

}  // namespace detail

// Clifford mapping every product of the given commuting strings to a Z-type
// string: row-reduce the X block, clear non-pivot X with CNOTs, clear the Z
// block with CZ and S, then Hadamard the pivots.
inline Circuit diagonalizing_clifford(int n, const std::vector<PauliString>& gens) {
    detail::Tableau t;
    t.c = Circuit(n);
    for (auto& g : gens) {
        if (g.n != n) throw DimensionError("generator size differs from register");
        t.rows.push_back({g.x, g.z});
    }
    for (size_t i = 0; i < t.rows.size(); ++i)
        for (size_t j = i + 1; j < t.rows.size(); ++j) {
            auto [xi, zi] = t.rows[i];
            auto [xj, zj] = t.rows[j];
            if ((std::popcount(xi & zj) + std::popcount(zi & xj)) & 1)
                throw ValidationError("strings do not commute");
        }
    std::vector<int> pivots;
    size_t rank = 0;
    for (int col = 0; col < n && rank < t.rows.size(); ++col) {
        size_t r = rank;
        while (r < t.rows.size() && !((t.rows[r].first >> col) & 1)) ++r;
        if (r == t.rows.size()) continue;
        std::swap(t.rows[r], t.rows[rank]);
        for (size_t k = 0; k < t.rows.size(); ++k)
            if (k != rank && ((t.rows[k].first >> col) & 1)) {
                t.rows[k].first ^= t.rows[rank].first;
                t.rows[k].second ^= t.rows[rank].second;
            }
        pivots.push_back(col);
        ++rank;
    }
    for (size_t i = 0; i < rank; ++i)
        for (int q = 0; q < n; ++q)
            if (q != pivots[i] && ((t.rows[i].first >> q) & 1)) t.apply(cnot(pivots[i], q));
    for (size_t i = 0; i < rank; ++i) {
        const int p = pivots[i];
        for (int q = 0; q < n; ++q)
            if (q != p && ((t.rows[i].second >> q) & 1)) t.apply(cz(p, q));
        if ((t.rows[i].second >> p) & 1) t.apply(g1(GateKind::S, p));
    }
    for (int p : pivots) t.apply(g1(GateKind::H, p));
    return t.c;
}

// ---------------------------------------------------------------- grouping

enum class Grouping { QWC, GC };

inline const char* grouping_name(Grouping g) { return g == Grouping::QWC ? "QWC" : "GC"; }

struct MeasurementGroup {
    std::vector<PauliString> members;
    Circuit clifford;
    int extra_two_qubit = 0;
};

struct MeasurementPlan {
    Grouping kind = Grouping::GC;
    int n_qubits = 0;
    std::vector<MeasurementGroup> groups;

    size_t n_strings() const {
        size_t k = 0;
        for (auto& g : groups) k += g.members.size();
        return k;
    }
    int total_extra() const {
        int k = 0;
        for (auto& g : groups) k += g.extra_two_qubit;
        return k;
    }
    double average_extra() const { return groups.empty() ? 0.0 : double(total_extra()) / groups.size(); }
};

namespace detail {

inline std::vector<PauliString> by_weight(const std::vector<PauliString>& strings) {
    std::vector<PauliString> v = strings;
    std::stable_sort(v.begin(), v.end(), [](auto& a, auto& b) { return std::abs(a.coeff) > std::abs(b.coeff); });
    return v;
}

inline void check_width(const std::vector<PauliString>& v, int& n) {
    n = v.empty() ? 0 : v.front().n;
    for (auto& s : v)
        if (s.n != n) throw DimensionError("strings of different sizes in one partition");
}

}  // namespace detail

// Per-qubit basis change: H for X, Sdg then H for Y.
inline Circuit qwc_basis_change(int n, uint64_t x, uint64_t z) {
    Circuit c(n);
    for (int q = 0; q < n; ++q) {
        bool bx = (x >> q) & 1, bz = (z >> q) & 1;
        if (bx && bz) c.add(g1(GateKind::Sdg, q));
        if (bx) c.add(g1(GateKind::H, q));
    }
    return c;
}

inline MeasurementPlan partition_qwc(const std::vector<PauliString>& strings) {
    MeasurementPlan plan;
    plan.kind = Grouping::QWC;
    detail::check_width(strings, plan.n_qubits);
    std::vector<std::pair<uint64_t, uint64_t>> sig;  // union of letters per group
    for (auto& s : detail::by_weight(strings)) {
        size_t g = 0;
        for (; g < sig.size(); ++g) {
            uint64_t both = s.support() & (sig[g].first | sig[g].second);
            if (((s.x ^ sig[g].first) & both) == 0 && ((s.z ^ sig[g].second) & both) == 0) break;
        }
        if (g == sig.size()) {
            sig.push_back({0, 0});
            plan.groups.emplace_back();
        }
        sig[g].first |= s.x;
        sig[g].second |= s.z;
        plan.groups[g].members.push_back(s);
    }
    for (size_t g = 0; g < sig.size(); ++g) plan.groups[g].clifford = qwc_basis_change(plan.n_qubits, sig[g].first, sig[g].second);
    return plan;
}

namespace detail {

// Commuting with a spanning set is commuting with every member.
struct GroupBasis {
    std::vector<PauliString> gens;
    std::vector<std::pair<uint64_t, uint64_t>> reduced;  // echelon copies
    std::vector<int> pivot;                               // bit index in [x | z]

    static bool bit(uint64_t x, uint64_t z, int p) { return p < 64 ? (x >> p) & 1 : (z >> (p - 64)) & 1; }

    bool commutes(const PauliString& s) const {
        for (auto& b : gens)
            if (!commutes_general(s, b)) return false;
        return true;
    }

    void insert(const PauliString& s) {
        uint64_t x = s.x, z = s.z;
        for (size_t k = 0; k < reduced.size(); ++k)
            if (bit(x, z, pivot[k])) x ^= reduced[k].first, z ^= reduced[k].second;
        if (!(x | z)) return;
        int p = x ? std::countr_zero(x) : 64 + std::countr_zero(z);
        for (auto& r : reduced)
            if (bit(r.first, r.second, p)) r.first ^= x, r.second ^= z;
        reduced.push_back({x, z});
        pivot.push_back(p);
        gens.push_back(s);
    }
};

inline MeasurementPlan finish_gc(int n, std::vector<std::vector<PauliString>> groups,
                                 const std::vector<GroupBasis>& bases) {
    MeasurementPlan plan;
    plan.kind = Grouping::GC;
    plan.n_qubits = n;
    for (size_t g = 0; g < groups.size(); ++g) {
        MeasurementGroup grp;
        grp.members = std::move(groups[g]);
        grp.clifford = diagonalizing_clifford(n, bases[g].gens);
        grp.extra_two_qubit = metrics(grp.clifford).two_qubit_count;
        plan.groups.push_back(std::move(grp));
    }
    return plan;
}

}  // namespace detail

// First-fit over strings by descending |coeff|. A second pass merges whole QWC
// groups first-fit; the plan with fewer groups is kept, so #GC <= #QWC.
inline MeasurementPlan partition_gc(const std::vector<PauliString>& strings) {
    int n = 0;
    detail::check_width(strings, n);
    std::vector<std::vector<PauliString>> groups;
    std::vector<detail::GroupBasis> bases;
    for (auto& s : detail::by_weight(strings)) {
        size_t g = 0;
        while (g < bases.size() && !bases[g].commutes(s)) ++g;
        if (g == bases.size()) bases.emplace_back(), groups.emplace_back();
        groups[g].push_back(s);
        bases[g].insert(s);
    }
    auto qwc = partition_qwc(strings);
    if (groups.size() > qwc.groups.size()) {
        groups.clear();
        bases.clear();
        for (auto& q : qwc.groups) {
            size_t g = 0;
            for (; g < bases.size(); ++g) {
                bool ok = true;
                for (auto& s : q.members) ok = ok && bases[g].commutes(s);
                if (ok) break;
            }
            if (g == bases.size()) bases.emplace_back(), groups.emplace_back();
            for (auto& s : q.members) groups[g].push_back(s), bases[g].insert(s);
        }
    }
    return detail::finish_gc(n, std::move(groups), bases);
}

inline MeasurementPlan partition(const std::vector<PauliString>& strings, Grouping kind) {
    return kind == Grouping::QWC ? partition_qwc(strings) : partition_gc(strings);
}

struct PlanCheck {
    bool commuting = true;
    bool diagonal = true;
    bool qwc_free = true;  // QWC groups carry no two-qubit gates
    bool ok() const { return commuting && diagonal && qwc_free; }
};

inline PlanCheck verify_plan(const MeasurementPlan& plan) {
    PlanCheck r;
    for (auto& g : plan.groups) {
        for (size_t i = 0; i < g.members.size(); ++i)
            for (size_t j = i + 1; j < g.members.size(); ++j) {
                bool c = plan.kind == Grouping::QWC ? commutes_qubitwise(g.members[i], g.members[j])
                                                    : commutes_general(g.members[i], g.members[j]);
                r.commuting = r.commuting && c;
            }
        for (auto& m : g.members) r.diagonal = r.diagonal && is_z_type(conjugate(m, g.clifford));
        if (plan.kind == Grouping::QWC)
            r.qwc_free = r.qwc_free && g.extra_two_qubit == 0 && metrics(g.clifford).two_qubit_count == 0;
    }
    return r;
}

// ---------------------------------------------------------------- measurement corpora

// Operator whose expectation gives the perturbative numerator for alpha:
// (D~^dag + [Z~, D~^dag]) H, with D~ = D - D^dag and Z~ the ansatz generator sum.
inline PauliSum hmp2_measurement_operator(const OrbitalSequence& alpha, const std::vector<OrbitalSequence>& terms,
                                          const std::vector<double>& params, const PauliSum& H,
                                          const TransformSpec& spec) {
    if (terms.size() != params.size()) throw ValidationError("one parameter per ansatz term is required");
    PauliSum ddag = excitation_generator(alpha, spec) * cplx(-1.0);
    PauliSum z(spec.n());
    for (size_t j = 0; j < terms.size(); ++j) z.add(excitation_generator(terms[j], spec), params[j]);
    z.canonicalize();
    PauliSum lead = ddag + (z * ddag - ddag * z);
    return lead * H;
}

inline std::vector<PauliString> measured_strings(const PauliSum& op) {
    std::vector<PauliString> v;
    for (auto& s : op.terms())
        if (!s.is_identity()) v.push_back(s);
    return v;
}

inline double r_measure(double n_reduced, double n_baseline) {
    double d = n_reduced + n_baseline;
    return d == 0.0 ? 0.0 : n_reduced / d;
}

// Averages over the alpha corpora of one ansatz.
struct MeasurementSummary {
    int n_alpha = 0;
    double n_jw = 0;        // distinct strings, no reduction or grouping
    double n_qsr = 0;       // distinct strings after reduction
    double n_qwc_qsr = 0;   // QWC groups after reduction
    double n_gc_qsr = 0;    // GC groups after reduction
    double extra_gc = 0;    // two-qubit gates per GC group
    int reduced_qubits = 0;
    bool plans_valid = true;
    bool refinement = true;  // #GC <= #QWC <= #strings on every corpus
    double r_measure() const { return fermiopt::r_measure(n_gc_qsr, n_jw); }
};

inline MeasurementSummary measurement_summary(const std::vector<OrbitalSequence>& alphas,
                                              const std::vector<OrbitalSequence>& terms,
                                              const std::vector<double>& params, const PauliSum& H,
                                              const TransformSpec& spec, int n_electrons, bool verify = true) {
    MeasurementSummary m;
    auto ctx = qsr_context(terms, spec, n_electrons);
    ctx.validate();
    m.reduced_qubits = ctx.reduced_qubits();
    int groups = 0, extra = 0;
    for (auto& al : alphas) {
        PauliSum op = hmp2_measurement_operator(al, terms, params, H, spec);
        auto raw = measured_strings(op);
        auto red = measured_strings(qsr_compress(op, ctx));
        auto qwc = partition_qwc(red);
        auto gc = partition_gc(red);
        if (verify) m.plans_valid = m.plans_valid && verify_plan(qwc).ok() && verify_plan(gc).ok();
        m.refinement = m.refinement && gc.groups.size() <= qwc.groups.size() && qwc.groups.size() <= red.size();
        m.n_jw += raw.size();
        m.n_qsr += red.size();
        m.n_qwc_qsr += qwc.groups.size();
        m.n_gc_qsr += gc.groups.size();
        groups += static_cast<int>(gc.groups.size());
        extra += gc.total_extra();
        ++m.n_alpha;
    }
    if (m.n_alpha) {
        m.n_jw /= m.n_alpha;
        m.n_qsr /= m.n_alpha;
        m.n_qwc_qsr /= m.n_alpha;
        m.n_gc_qsr /= m.n_alpha;
    }
    m.extra_gc = groups ? double(extra) / groups : 0.0;
    return m;
}

inline void write_measurement_plan(std::ostream& os, const MeasurementPlan& plan) {
    os << "kind=" << grouping_name(plan.kind) << "\n";
    os << "qubits=" << plan.n_qubits << "\n";
    os << "strings=" << plan.n_strings() << "\n";
    os << "groups=" << plan.groups.size() << "\n";
    os << "extra_two_qubit_total=" << plan.total_extra() << "\n";
    os << "extra_two_qubit_average=" << plan.average_extra() << "\n";
    for (size_t g = 0; g < plan.groups.size(); ++g) {
        os << "group " << g << " extra=" << plan.groups[g].extra_two_qubit << "\n";
        for (auto& s : plan.groups[g].members) os << "  " << s.letters() << "\n";
    }
}

}  // namespace fermiopt
