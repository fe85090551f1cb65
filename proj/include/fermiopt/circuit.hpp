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

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fermiopt/pauli.hpp"

namespace fermiopt {

enum class GateKind { H, S, Sdg, T, Tdg, X, Z, Rz, Rx, CNOT, CZ, RTOF, RTOFdg };

inline const char* gate_name(GateKind k) {
    static const char* names[] = {"H", "S", "Sdg", "T", "Tdg", "X", "Z", "Rz", "Rx", "CNOT", "CZ", "RTOF", "RTOFdg"};
    return names[static_cast<int>(k)];
}

inline int gate_arity(GateKind k) {
    switch (k) {
        case GateKind::CNOT: case GateKind::CZ: return 2;
        case GateKind::RTOF: case GateKind::RTOFdg: return 4;
        default: return 1;
    }
}

inline bool is_rotation(GateKind k) { return k == GateKind::Rz || k == GateKind::Rx; }

struct Gate {
    GateKind kind = GateKind::H;
    std::array<int, 4> q{0, 0, 0, 0};
    double theta = 0.0;

    int arity() const { return gate_arity(kind); }
    bool touches(int w) const {
        for (int i = 0; i < arity(); ++i)
            if (q[i] == w) return true;
        return false;
    }
};

inline Gate g1(GateKind k, int a, double th = 0.0) { return {k, {a, 0, 0, 0}, th}; }
inline Gate cnot(int c, int t) { return {GateKind::CNOT, {c, t, 0, 0}, 0.0}; }
inline Gate cz(int a, int b) { return {GateKind::CZ, {a, b, 0, 0}, 0.0}; }
inline Gate rz(int a, double th) { return g1(GateKind::Rz, a, th); }
inline Gate rx(int a, double th) { return g1(GateKind::Rx, a, th); }
inline Gate rtof(int c0, int c1, int c2, int t, bool inverse = false) {
    return {inverse ? GateKind::RTOFdg : GateKind::RTOF, {c0, c1, c2, t}, 0.0};
}

inline Gate inverse_gate(const Gate& g) {
    Gate r = g;
    switch (g.kind) {
        case GateKind::S: r.kind = GateKind::Sdg; break;
        case GateKind::Sdg: r.kind = GateKind::S; break;
        case GateKind::T: r.kind = GateKind::Tdg; break;
        case GateKind::Tdg: r.kind = GateKind::T; break;
        case GateKind::Rz: case GateKind::Rx: r.theta = -g.theta; break;
        case GateKind::RTOF: r.kind = GateKind::RTOFdg; break;
        case GateKind::RTOFdg: r.kind = GateKind::RTOF; break;
        default: break;
    }
    return r;
}

struct Circuit {
    int n_data = 0;
    int n_ancilla = 0;
    std::vector<Gate> gates;

    Circuit() = default;
    Circuit(int nd, int na = 0) : n_data(nd), n_ancilla(na) {}

    int width() const { return n_data + n_ancilla; }

    Circuit& add(const Gate& g) {
        for (int i = 0; i < g.arity(); ++i) {
            if (g.q[i] < 0 || g.q[i] >= width()) throw std::out_of_range("gate operand out of range");
            for (int j = 0; j < i; ++j)
                if (g.q[i] == g.q[j]) throw std::invalid_argument("gate operands must be distinct");
        }
        gates.push_back(g);
        return *this;
    }
    Circuit& append(const Circuit& o) {
        for (auto& g : o.gates) add(g);
        return *this;
    }
    Circuit inverse() const {
        Circuit r(n_data, n_ancilla);
        for (auto it = gates.rbegin(); it != gates.rend(); ++it) r.gates.push_back(inverse_gate(*it));
        return r;
    }
};

// Three controls q[0..2], target q[3].
inline std::vector<Gate> rtof_expansion(const Gate& g) {
    const int a = g.q[0], b = g.q[1], c = g.q[2], t = g.q[3];
    using K = GateKind;
    std::vector<Gate> v = {g1(K::H, t),   g1(K::T, t),   cnot(c, t),    g1(K::Tdg, t), g1(K::H, t),
                           cnot(a, t),    g1(K::T, t),   cnot(b, t),    g1(K::Tdg, t), cnot(a, t),
                           g1(K::T, t),   cnot(b, t),    g1(K::Tdg, t), g1(K::H, t),   g1(K::T, t),
                           cnot(c, t),    g1(K::Tdg, t), g1(K::H, t)};
    if (g.kind == K::RTOFdg) {
        std::reverse(v.begin(), v.end());
        for (auto& x : v) x = inverse_gate(x);
    }
    return v;
}

inline Circuit expand_rtof(const Circuit& c) {
    Circuit r(c.n_data, c.n_ancilla);
    for (auto& g : c.gates) {
        if (g.kind == GateKind::RTOF || g.kind == GateKind::RTOFdg)
            for (auto& e : rtof_expansion(g)) r.gates.push_back(e);
        else
            r.gates.push_back(g);
    }
    return r;
}

struct Metrics {
    int two_qubit_count = 0;
    int rz_count = 0;
    int rz_depth = 0;
    int t_count = 0;
    int ancilla_count = 0;
    int rtof_count = 0;  // opaque markers when not expanded
    bool operator==(const Metrics&) const = default;
};

// rz_depth: number of Rz layers under as-soon-as-possible scheduling.
inline Metrics metrics(const Circuit& c0, bool expand = true) {
    Circuit c = expand ? expand_rtof(c0) : c0;
    Metrics m;
    m.ancilla_count = c.n_ancilla;
    std::vector<int> layer(c.width(), 0);
    for (auto& g : c.gates) {
        int k = g.arity();
        if (k == 2) ++m.two_qubit_count;
        if (g.kind == GateKind::T || g.kind == GateKind::Tdg) ++m.t_count;
        if (g.kind == GateKind::RTOF || g.kind == GateKind::RTOFdg) ++m.rtof_count;
        if (g.kind == GateKind::Rz) {
            ++m.rz_count;
            m.rz_depth = std::max(m.rz_depth, ++layer[g.q[0]]);
        } else if (k > 1) {
            int d = 0;
            for (int i = 0; i < k; ++i) d = std::max(d, layer[g.q[i]]);
            for (int i = 0; i < k; ++i) layer[g.q[i]] = d;
        }
    }
    return m;
}

using Mat2 = std::array<cplx, 4>;  // row-major

inline Mat2 mat2_mul(const Mat2& a, const Mat2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3]};
}

inline Mat2 gate_matrix(const Gate& g) {
    const double r = 1.0 / std::sqrt(2.0);
    const cplx i1{0, 1};
    switch (g.kind) {
        case GateKind::H: return {r, r, r, -r};
        case GateKind::S: return {1, 0, 0, i1};
        case GateKind::Sdg: return {1, 0, 0, -i1};
        case GateKind::T: return {1, 0, 0, std::polar(1.0, std::numbers::pi / 4)};
        case GateKind::Tdg: return {1, 0, 0, std::polar(1.0, -std::numbers::pi / 4)};
        case GateKind::X: return {0, 1, 1, 0};
        case GateKind::Z: return {1, 0, 0, -1};
        case GateKind::Rz: return {std::polar(1.0, -g.theta / 2), 0, 0, std::polar(1.0, g.theta / 2)};
        case GateKind::Rx: {
            double c = std::cos(g.theta / 2), s = std::sin(g.theta / 2);
            return {c, -i1 * s, -i1 * s, c};
        }
        default: throw std::invalid_argument("not a single-qubit gate");
    }
}

inline void apply_1q(const Mat2& m, int q, Statevector& s) {
    const size_t bit = size_t{1} << q;
    for (size_t b = 0; b < s.size(); ++b) {
        if (b & bit) continue;
        cplx a0 = s[b], a1 = s[b | bit];
        s[b] = m[0] * a0 + m[1] * a1;
        s[b | bit] = m[2] * a0 + m[3] * a1;
    }
}

inline void apply_gate(const Gate& g, Statevector& s) {
    switch (g.kind) {
        case GateKind::CNOT: {
            size_t c = size_t{1} << g.q[0], t = size_t{1} << g.q[1];
            for (size_t b = 0; b < s.size(); ++b)
                if ((b & c) && !(b & t)) std::swap(s[b], s[b | t]);
            return;
        }
        case GateKind::CZ: {
            size_t m = (size_t{1} << g.q[0]) | (size_t{1} << g.q[1]);
            for (size_t b = 0; b < s.size(); ++b)
                if ((b & m) == m) s[b] = -s[b];
            return;
        }
        case GateKind::RTOF: case GateKind::RTOFdg:
            for (auto& e : rtof_expansion(g)) apply_gate(e, s);
            return;
        default: apply_1q(gate_matrix(g), g.q[0], s);
    }
}

inline void simulate(const Circuit& c, Statevector& s) {
    check_state(s, c.width());
    for (auto& g : c.gates) apply_gate(g, s);
}

inline Eigen::MatrixXcd unitary(const Circuit& c) {
    if (c.width() > 12) throw std::invalid_argument("unitary extraction limited to 12 qubits");
    const size_t dim = size_t{1} << c.width();
    Eigen::MatrixXcd u(dim, dim);
    for (size_t col = 0; col < dim; ++col) {
        Statevector s(dim);
        s[col] = 1.0;
        simulate(c, s);
        for (size_t row = 0; row < dim; ++row) u(row, col) = s[row];
    }
    return u;
}

// Data-qubit block with ancillas (the high qubits) fixed to |0> on input and output.
inline Eigen::MatrixXcd data_block(const Eigen::MatrixXcd& u, int n_data) {
    const Eigen::Index d = Eigen::Index{1} << n_data;
    return u.topLeftCorner(d, d);
}

inline bool equal_up_to_phase(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, double tol = 1e-10) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    Eigen::Index r = 0, c = 0;
    a.cwiseAbs().maxCoeff(&r, &c);
    if (std::abs(b(r, c)) < 1e-12) return false;
    cplx ph = a(r, c) / b(r, c);
    if (std::abs(std::abs(ph) - 1.0) > tol) return false;
    return (a - ph * b).cwiseAbs().maxCoeff() < tol;
}

// ---- text format: one gate per line, "KIND q0 q1 ... [theta]"

inline void write_circuit(std::ostream& os, const Circuit& c) {
    os << "# qubits " << c.n_data << " ancilla " << c.n_ancilla << "\n";
    os.precision(17);
    for (auto& g : c.gates) {
        os << gate_name(g.kind);
        for (int i = 0; i < g.arity(); ++i) os << ' ' << g.q[i];
        if (is_rotation(g.kind)) os << ' ' << g.theta;
        os << '\n';
    }
}

inline Circuit read_circuit(std::istream& is) {
    Circuit c;
    std::vector<Gate> gs;
    int maxq = -1;
    bool header = false;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind.empty()) continue;
        if (kind == "#") {
            std::string w;
            if (ls >> w && w == "qubits") {
                ls >> c.n_data >> w >> c.n_ancilla;
                header = true;
            }
            continue;
        }
        Gate g;
        bool found = false;
        for (int k = 0; k <= static_cast<int>(GateKind::RTOFdg); ++k)
            if (kind == gate_name(static_cast<GateKind>(k))) {
                g.kind = static_cast<GateKind>(k);
                found = true;
            }
        if (!found) throw std::invalid_argument("unknown gate kind '" + kind + "'");
        for (int i = 0; i < g.arity(); ++i) {
            if (!(ls >> g.q[i])) throw std::invalid_argument("missing operand in '" + line + "'");
            maxq = std::max(maxq, g.q[i]);
        }
        if (is_rotation(g.kind) && !(ls >> g.theta)) throw std::invalid_argument("missing angle in '" + line + "'");
        gs.push_back(g);
    }
    if (!header) c.n_data = maxq + 1;
    for (auto& g : gs) c.add(g);
    return c;
}

// ---- peephole

namespace detail {

struct Clifford1 {
    Mat2 m;
    std::vector<GateKind> word;  // time order
};

inline bool mat2_equal_phase(const Mat2& a, const Mat2& b, double tol = 1e-9) {
    int k = 0;
    for (int i = 1; i < 4; ++i)
        if (std::abs(a[i]) > std::abs(a[k])) k = i;
    if (std::abs(b[k]) < 1e-12) return false;
    cplx ph = a[k] / b[k];
    for (int i = 0; i < 4; ++i)
        if (std::abs(a[i] - ph * b[i]) > tol) return false;
    return true;
}

inline const std::vector<Clifford1>& single_cliffords() {
    static const std::vector<Clifford1> table = [] {
        std::vector<Clifford1> out{{Mat2{1, 0, 0, 1}, {}}};
        const GateKind gens[] = {GateKind::H, GateKind::S, GateKind::Sdg, GateKind::X, GateKind::Z};
        for (size_t head = 0; head < out.size(); ++head)
            for (GateKind k : gens) {
                Mat2 m = mat2_mul(gate_matrix(g1(k, 0)), out[head].m);
                bool seen = false;
                for (auto& c : out) seen = seen || mat2_equal_phase(c.m, m);
                if (seen) continue;
                auto w = out[head].word;
                w.push_back(k);
                out.push_back({m, w});
            }
        return out;
    }();
    return table;
}

inline int clifford_index(const Mat2& m) {
    auto& t = single_cliffords();
    for (size_t i = 0; i < t.size(); ++i)
        if (mat2_equal_phase(t[i].m, m)) return static_cast<int>(i);
    return -1;
}

inline bool is_diagonal(const Mat2& m, double tol = 1e-10) { return std::abs(m[1]) < tol && std::abs(m[2]) < tol; }

// U X U^dagger == X
inline bool commutes_with_x(const Mat2& m, double tol = 1e-10) {
    Mat2 x{0, 1, 1, 0};
    Mat2 a = mat2_mul(m, x), b = mat2_mul(x, m);
    for (int i = 0; i < 4; ++i)
        if (std::abs(a[i] - b[i]) > tol) return false;
    return true;
}

using Mat4 = Eigen::Matrix4cd;

// Basis index = bit_c + 2 * bit_t.
inline Mat4 on_pair(const Mat2& c, const Mat2& t) {
    Mat4 r;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) r(i, j) = c[(i & 1) * 2 + (j & 1)] * t[(i >> 1) * 2 + (j >> 1)];
    return r;
}

inline Mat4 cnot_ct() {
    Mat4 r = Mat4::Zero();
    for (int b = 0; b < 4; ++b) r((b & 1) ? (b ^ 2) : b, b) = 1;
    return r;
}

struct OneCnotForm {
    int a = -1, b = -1, e = -1;  // clifford indices: a on c before, b on c after, e on t after
};

// Finds CNOT(c,t) U_c CNOT(c,t) == (b_c e_t) CNOT(c,t) a_c with e commuting with X.
inline std::optional<OneCnotForm> one_cnot_form(int u) {
    static std::map<int, std::optional<OneCnotForm>> cache;
    auto it = cache.find(u);
    if (it != cache.end()) return it->second;
    auto& t = single_cliffords();
    Mat2 id{1, 0, 0, 1};
    Mat4 cx = cnot_ct();
    Mat4 target = cx * on_pair(t[u].m, id) * cx;
    std::optional<OneCnotForm> best;
    size_t best_len = 1000;
    for (size_t e = 0; e < t.size(); ++e) {
        if (!commutes_with_x(t[e].m)) continue;
        for (size_t a = 0; a < t.size(); ++a)
            for (size_t b = 0; b < t.size(); ++b) {
                size_t len = t[a].word.size() + t[b].word.size() + t[e].word.size();
                if (len >= best_len) continue;
                Mat4 cand = on_pair(t[b].m, t[e].m) * cx * on_pair(t[a].m, id);
                Eigen::Index r = 0, cc = 0;
                target.cwiseAbs().maxCoeff(&r, &cc);
                if (std::abs(cand(r, cc)) < 1e-12) continue;
                cplx ph = target(r, cc) / cand(r, cc);
                if ((target - ph * cand).cwiseAbs().maxCoeff() < 1e-9) {
                    best = OneCnotForm{static_cast<int>(a), static_cast<int>(b), static_cast<int>(e)};
                    best_len = len;
                }
            }
    }
    cache[u] = best;
    return best;
}

inline bool same_operands(const Gate& a, const Gate& b) {
    if (a.arity() != b.arity()) return false;
    if (a.kind == GateKind::CZ && b.kind == GateKind::CZ)
        return (a.q[0] == b.q[0] && a.q[1] == b.q[1]) || (a.q[0] == b.q[1] && a.q[1] == b.q[0]);
    for (int i = 0; i < a.arity(); ++i)
        if (a.q[i] != b.q[i]) return false;
    return true;
}

inline bool is_inverse_pair(const Gate& a, const Gate& b) {
    if (!same_operands(a, b)) return false;
    using K = GateKind;
    switch (a.kind) {
        case K::H: case K::X: case K::Z: case K::CNOT: case K::CZ: return b.kind == a.kind;
        case K::S: return b.kind == K::Sdg;
        case K::Sdg: return b.kind == K::S;
        case K::T: return b.kind == K::Tdg;
        case K::Tdg: return b.kind == K::T;
        case K::RTOF: return b.kind == K::RTOFdg;
        case K::RTOFdg: return b.kind == K::RTOF;
        default: return false;
    }
}

inline bool angle_is_zero(double th) {
    double r = std::remainder(th, 2 * std::numbers::pi);
    return std::abs(r) < 1e-12;
}

struct WireIndex {
    std::vector<std::vector<int>> seq;           // per wire: gate indices in order
    std::vector<std::array<int, 4>> pos;         // per gate: position in each operand's list
    WireIndex(const std::vector<Gate>& gs, int width) : seq(width), pos(gs.size()) {
        for (int i = 0; i < static_cast<int>(gs.size()); ++i)
            for (int k = 0; k < gs[i].arity(); ++k) {
                pos[i][k] = static_cast<int>(seq[gs[i].q[k]].size());
                seq[gs[i].q[k]].push_back(i);
            }
    }
    int next_on(const std::vector<Gate>& gs, int i, int k) const {
        auto& s = seq[gs[i].q[k]];
        int p = pos[i][k] + 1;
        return p < static_cast<int>(s.size()) ? s[p] : -1;
    }
};

// Deletes adjacent inverse pairs and merges adjacent rotations on the same axis.
inline bool pair_pass(std::vector<Gate>& gs, int width) {
    WireIndex wi(gs, width);
    std::vector<char> dead(gs.size(), 0);
    bool changed = false;
    for (int i = 0; i < static_cast<int>(gs.size()); ++i) {
        if (dead[i]) continue;
        int j = wi.next_on(gs, i, 0);
        if (j < 0 || dead[j]) continue;
        bool adjacent = true;
        for (int k = 1; k < gs[i].arity(); ++k) adjacent = adjacent && wi.next_on(gs, i, k) == j;
        if (!adjacent || !same_operands(gs[i], gs[j])) continue;
        if (is_inverse_pair(gs[i], gs[j])) {
            dead[i] = dead[j] = 1;
            changed = true;
        } else if (is_rotation(gs[i].kind) && gs[j].kind == gs[i].kind) {
            // Merge into j so that a following rotation can keep merging.
            gs[j].theta += gs[i].theta;
            dead[i] = 1;
            if (angle_is_zero(gs[j].theta)) dead[j] = 1;
            changed = true;
        }
    }
    for (int i = 0; i < static_cast<int>(gs.size()); ++i)
        if (!dead[i] && is_rotation(gs[i].kind) && angle_is_zero(gs[i].theta)) dead[i] = 1, changed = true;
    if (changed) {
        std::vector<Gate> out;
        for (size_t i = 0; i < gs.size(); ++i)
            if (!dead[i]) out.push_back(gs[i]);
        gs.swap(out);
    }
    return changed;
}

// CNOT pairs on the same (c,t) separated by a middle that commutes with Z_c and X_t
// are deleted. If the control side holds one non-diagonal Clifford run instead, the
// pair is rewritten to a single CNOT.
inline bool cnot_pass(std::vector<Gate>& gs, int width) {
    WireIndex wi(gs, width);
    const Mat2 id{1, 0, 0, 1};
    for (int i = 0; i < static_cast<int>(gs.size()); ++i) {
        if (gs[i].kind != GateKind::CNOT) continue;
        const int c = gs[i].q[0], t = gs[i].q[1];
        // control wire
        auto& sc = wi.seq[c];
        Mat2 run = id;
        bool run_clifford = true, multi = false, ok = true;
        std::vector<int> run_gates;
        int j = -1;
        for (size_t p = wi.pos[i][0] + 1; p < sc.size() && ok; ++p) {
            const Gate& g = gs[sc[p]];
            if (g.arity() == 1) {
                run = mat2_mul(gate_matrix(g), run);
                run_clifford = run_clifford && !is_rotation(g.kind) && g.kind != GateKind::T && g.kind != GateKind::Tdg;
                run_gates.push_back(sc[p]);
                continue;
            }
            if (g.kind == GateKind::CNOT && g.q[0] == c && g.q[1] == t) {
                j = sc[p];
                break;
            }
            bool passes = (g.kind == GateKind::CNOT && g.q[0] == c && g.q[1] != t) ||
                          (g.kind == GateKind::CZ && !g.touches(t));
            if (!passes || !is_diagonal(run)) ok = false;
            multi = true;
            run = id;
            run_gates.clear();
        }
        if (!ok || j < 0) continue;
        bool two = is_diagonal(run);
        if (!two && (multi || !run_clifford)) continue;
        // target wire
        auto& st = wi.seq[t];
        Mat2 trun = id;
        bool tok = false;
        for (size_t p = wi.pos[i][1] + 1; p < st.size(); ++p) {
            const Gate& g = gs[st[p]];
            if (st[p] == j) {
                tok = commutes_with_x(trun);
                break;
            }
            if (g.arity() == 1) {
                trun = mat2_mul(gate_matrix(g), trun);
                continue;
            }
            if (g.kind == GateKind::CNOT && g.q[1] == t && g.q[0] != c && commutes_with_x(trun)) {
                trun = id;
                continue;
            }
            break;
        }
        if (!tok) continue;
        if (two) {
            std::vector<Gate> out;
            out.reserve(gs.size());
            for (int k = 0; k < static_cast<int>(gs.size()); ++k)
                if (k != i && k != j) out.push_back(gs[k]);
            gs.swap(out);
            return true;
        }
        int u = clifford_index(run);
        if (u < 0) continue;
        auto form = one_cnot_form(u);
        if (!form) {
            // Anti-diagonal run: CNOT X D CNOT = X_c X_t D, no CNOT left.
            continue;
        }
        auto& tab = single_cliffords();
        std::vector<char> drop(gs.size(), 0);
        drop[i] = 1;
        for (int k : run_gates) drop[k] = 1;
        std::vector<Gate> out;
        out.reserve(gs.size() + 8);
        for (int k = 0; k < static_cast<int>(gs.size()); ++k) {
            if (drop[k]) continue;
            if (k != j) {
                out.push_back(gs[k]);
                continue;
            }
            for (auto kk : tab[form->a].word) out.push_back(g1(kk, c));
            out.push_back(cnot(c, t));
            for (auto kk : tab[form->b].word) out.push_back(g1(kk, c));
            for (auto kk : tab[form->e].word) out.push_back(g1(kk, t));
        }
        gs.swap(out);
        return true;
    }
    return false;
}

}  // namespace detail

inline Circuit peephole_cancel(const Circuit& c) {
    Circuit r = c;
    bool changed = true;
    while (changed) {
        changed = false;
        while (detail::pair_pass(r.gates, r.width())) changed = true;
        if (detail::cnot_pass(r.gates, r.width())) changed = true;
    }
    return r;
}

}  // namespace fermiopt
