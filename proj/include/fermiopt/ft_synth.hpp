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
#include <bit>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fermiopt/circuit.hpp"
#include "fermiopt/fermion.hpp"

namespace fermiopt {

struct FTResourceReport {
    int t_count = 0;
    int rz_count = 0;
    int rz_depth = 0;
    int ancilla_count = 0;
    std::string variant;
    bool extrapolated = false;

    bool same_counts(const FTResourceReport& o) const {
        return t_count == o.t_count && rz_count == o.rz_count && rz_depth == o.rz_depth &&
               ancilla_count == o.ancilla_count;
    }
};

inline FTResourceReport report_of(const Circuit& c, std::string variant) {
    auto m = metrics(c);
    return {m.t_count, m.rz_count, m.rz_depth, m.ancilla_count, std::move(variant), false};
}

enum class Role : uint8_t { Plus, Minus, ZChain };

struct RoleAssignment {
    std::vector<Role> roles;

    int size() const { return static_cast<int>(roles.size()); }
    std::vector<int> with(Role r) const {
        std::vector<int> v;
        for (int q = 0; q < size(); ++q)
            if (roles[q] == r) v.push_back(q);
        return v;
    }
    // "++--", "+-z+-" and so on
    static RoleAssignment parse(const std::string& s) {
        RoleAssignment a;
        for (char ch : s) {
            if (ch == '+') a.roles.push_back(Role::Plus);
            else if (ch == '-') a.roles.push_back(Role::Minus);
            else if (ch == 'z' || ch == 'Z') a.roles.push_back(Role::ZChain);
            else throw ValidationError(std::string("unknown role '") + ch + "'");
        }
        return a;
    }
};

struct FTCircuit {
    Circuit circuit;
    FTResourceReport report;
};

// Triply controlled NOT with relative phases on controls c, target t.
inline Circuit rel_phase_toffoli3() {
    Circuit c(4);
    for (auto& g : rtof_expansion(rtof(0, 1, 2, 3))) c.add(g);
    return c;
}

namespace detail {

inline void check_two_body(const RoleAssignment& r, bool allow_z) {
    if (r.with(Role::Plus).size() != 2 || r.with(Role::Minus).size() != 2)
        throw ValidationError("two-body term needs exactly two plus and two minus roles");
    if (!allow_z && !r.with(Role::ZChain).empty()) throw ValidationError("z-chain roles need ft_two_body_with_z");
    if (r.size() > 12) throw ValidationError("at most 12 qubits");
}

// Rx(theta) on t controlled by cs, serial Rz pair.
inline void c3rx_serial(Circuit& c, const std::array<int, 3>& cs, int t, double theta) {
    c.add(g1(GateKind::H, t));
    c.add(rtof(cs[0], cs[1], cs[2], t));
    c.add(rz(t, -theta / 2));
    c.add(rtof(cs[0], cs[1], cs[2], t, true));
    c.add(rz(t, theta / 2));
    c.add(g1(GateKind::H, t));
}

// Same with the control product parked on an ancilla; both Rz land in one layer.
inline void c3rx_ancilla(Circuit& c, const std::array<int, 3>& cs, int t, int anc, double theta) {
    c.add(g1(GateKind::H, t));
    c.add(rtof(cs[0], cs[1], cs[2], anc));
    c.add(cnot(t, anc));
    c.add(rz(t, theta / 2)).add(rz(anc, -theta / 2));
    c.add(cnot(t, anc));
    c.add(rtof(cs[0], cs[1], cs[2], anc, true));
    c.add(g1(GateKind::H, t));
}

inline FTCircuit two_body_core(double theta, const RoleAssignment& r, bool depth_optimized, bool with_z) {
    check_two_body(r, with_z);
    auto p = r.with(Role::Plus), m = r.with(Role::Minus), z = r.with(Role::ZChain);
    const int a = p[0], b = p[1], cq = m[0], d = m[1];
    Circuit c(r.size(), depth_optimized ? 1 : 0);
    Circuit prefix(r.size(), c.n_ancilla);
    prefix.add(cnot(cq, b)).add(cnot(a, cq)).add(cnot(a, d));
    c.append(prefix);
    for (int q : z) c.add(cz(q, a));
    if (depth_optimized)
        c3rx_ancilla(c, {b, cq, d}, a, r.size(), theta);
    else
        c3rx_serial(c, {b, cq, d}, a, theta);
    for (int q : z) c.add(cz(q, a));
    c.append(prefix.inverse());
    std::string label = depth_optimized ? "ancilla-parallel-rz" : "serial-rz";
    if (!z.empty()) label += "+z" + std::to_string(z.size());
    auto rep = report_of(c, label);
    return {std::move(c), std::move(rep)};
}

}  // namespace detail

// exp(-i theta/2 (s+ s+ s- s- + h.c.)), s+ = |1><0| on the plus wires.
inline FTCircuit ft_two_body(double theta, const RoleAssignment& roles, bool depth_optimized) {
    return detail::two_body_core(theta, roles, depth_optimized, false);
}

// Same term times Z on every z-chain wire.
inline FTCircuit ft_two_body_with_z(double theta, const RoleAssignment& roles, bool depth_optimized = true) {
    return detail::two_body_core(theta, roles, depth_optimized, true);
}

// exp(-i theta/2 (s+ s- + h.c.)) with s+ on qubit 0.
inline FTCircuit ft_single_body(double theta) {
    using K = GateKind;
    Circuit c(2);
    const int p = 0, m = 1;
    c.add(g1(K::Sdg, p)).add(g1(K::H, m));
    c.add(cnot(m, p));
    c.add(g1(K::S, p)).add(g1(K::Sdg, m));
    c.add(g1(K::H, p)).add(g1(K::H, m));
    c.add(rz(p, theta / 2)).add(rz(m, -theta / 2));
    c.add(g1(K::H, p)).add(g1(K::H, m));
    c.add(g1(K::Sdg, p)).add(g1(K::S, m));
    c.add(cnot(m, p));
    c.add(g1(K::S, p)).add(g1(K::H, m));
    auto rep = report_of(c, "single-body");
    return {std::move(c), std::move(rep)};
}

// Resource totals for applying `count` equal-angle Rz in parallel through a
// Hamming-weight register. Only the eight-string figures are tabulated; other
// counts use an adder-tree estimate and are flagged.
inline FTResourceReport weight_sum_accounting(int count) {
    if (count < 1) throw ValidationError("count must be positive");
    if (count == 8) return {32, 4, 1, 11, "weight-sum", false};
    if (count <= 2) return {0, count, 1, 0, "naive-parallel", false};
    const int adders = count - std::popcount(static_cast<unsigned>(count));
    const int bits = std::bit_width(static_cast<unsigned>(count));
    return {4 * adders + 4, bits, 1, 4 + adders, "weight-sum-extrapolated", true};
}

// Input wires as bits a=0, b=1, ...; output form per wire as a mask.
inline std::vector<uint64_t> prefix_linear_functions(const Circuit& c) {
    std::vector<uint64_t> f(c.width());
    for (int q = 0; q < c.width(); ++q) f[q] = uint64_t{1} << q;
    for (auto& g : c.gates) {
        if (g.kind != GateKind::CNOT) throw ValidationError("linear-function tracking needs a CNOT-only circuit");
        f[g.q[1]] ^= f[g.q[0]];
    }
    return f;
}

inline std::string linear_form_string(uint64_t form) {
    std::string s;
    for (int q = 0; q < 64; ++q)
        if ((form >> q) & 1) {
            if (!s.empty()) s += "+";
            s += q < 26 ? std::string(1, static_cast<char>('a' + q)) : "x" + std::to_string(q);
        }
    return s.empty() ? "0" : s;
}

// The CNOT prefix used by ft_two_body for wires a,b (plus) and c,d (minus).
inline Circuit two_body_prefix(const RoleAssignment& r) {
    detail::check_two_body(r, true);
    auto p = r.with(Role::Plus), m = r.with(Role::Minus);
    Circuit c(r.size());
    c.add(cnot(m[0], p[1])).add(cnot(p[0], m[0])).add(cnot(p[0], m[1]));
    return c;
}

inline void write_resource_table(std::ostream& os, const std::vector<FTResourceReport>& rows) {
    os << "variant,t_count,rz_count,rz_depth,ancilla_count,extrapolated\n";
    for (auto& r : rows)
        os << r.variant << ',' << r.t_count << ',' << r.rz_count << ',' << r.rz_depth << ',' << r.ancilla_count << ','
           << (r.extrapolated ? 1 : 0) << '\n';
}

}  // namespace fermiopt
