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
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "fermiopt/circuit.hpp"
#include "fermiopt/fermion.hpp"
#include "fermiopt/pauli.hpp"

namespace fermiopt {

// Square GF(2) matrix, rows as bit masks (bit j = column j).
struct BitMatrix {
    int n = 0;
    std::vector<uint64_t> rows;

    explicit BitMatrix(int n_ = 0) : n(n_), rows(n_, 0) {}
    static BitMatrix identity(int n) {
        BitMatrix m(n);
        for (int i = 0; i < n; ++i) m.rows[i] = uint64_t{1} << i;
        return m;
    }
    bool get(int i, int j) const { return (rows[i] >> j) & 1; }
    void set(int i, int j, bool v) {
        if (v) rows[i] |= uint64_t{1} << j;
        else rows[i] &= ~(uint64_t{1} << j);
    }
    BitMatrix operator*(const BitMatrix& o) const {
        BitMatrix r(n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                if (get(i, k)) r.rows[i] ^= o.rows[k];
        return r;
    }
    BitMatrix operator+(const BitMatrix& o) const {
        BitMatrix r(n);
        for (int i = 0; i < n; ++i) r.rows[i] = rows[i] ^ o.rows[i];
        return r;
    }
    bool operator==(const BitMatrix&) const = default;
    uint64_t apply(uint64_t v) const {
        uint64_t out = 0;
        for (int i = 0; i < n; ++i)
            if (std::popcount(rows[i] & v) & 1) out |= uint64_t{1} << i;
        return out;
    }
    uint64_t column(int j) const {
        uint64_t c = 0;
        for (int i = 0; i < n; ++i)
            if (get(i, j)) c |= uint64_t{1} << i;
        return c;
    }
};

// Gauss-Jordan inverse over GF(2); throws if singular.
inline BitMatrix gf2_inverse(const BitMatrix& m) {
    const int n = m.n;
    BitMatrix a = m, inv = BitMatrix::identity(n);
    for (int col = 0; col < n; ++col) {
        int piv = -1;
        for (int r = col; r < n; ++r)
            if (a.get(r, col)) {
                piv = r;
                break;
            }
        if (piv < 0) throw ValidationError("matrix is singular over GF(2)");
        std::swap(a.rows[col], a.rows[piv]);
        std::swap(inv.rows[col], inv.rows[piv]);
        for (int r = 0; r < n; ++r)
            if (r != col && a.get(r, col)) {
                a.rows[r] ^= a.rows[col];
                inv.rows[r] ^= inv.rows[col];
            }
    }
    return inv;
}

// Basis map b = beta x over GF(2). Entries beta(i,j) with i > j are free, the
// diagonal is 1. Printed with row n-1 on top and column n-1 on the left, the
// matrix is upper triangular.
struct BetaMatrix {
    BitMatrix m;

    BetaMatrix() = default;
    explicit BetaMatrix(int n) : m(BitMatrix::identity(n)) {}
    explicit BetaMatrix(BitMatrix bm) : m(std::move(bm)) { validate(); }

    int n() const { return m.n; }
    bool get(int i, int j) const { return m.get(i, j); }
    void set(int i, int j, bool v) {
        if (i <= j) throw ValidationError("only entries below the diagonal are free");
        m.set(i, j, v);
    }
    void validate() const {
        if (m.n < 1 || m.n > kMaxQubits) throw ValidationError("beta size out of range");
        for (int i = 0; i < m.n; ++i) {
            if (!m.get(i, i)) throw ValidationError("beta diagonal entry " + std::to_string(i) + " is zero");
            for (int j = i + 1; j < m.n; ++j)
                if (m.get(i, j)) throw ValidationError("beta is not triangular");
        }
    }
    bool is_identity() const { return m == BitMatrix::identity(m.n); }
    bool operator==(const BetaMatrix&) const = default;

    // Free bits in a fixed order: rows 1..n-1, columns 0..i-1.
    std::vector<uint8_t> to_bits() const {
        std::vector<uint8_t> v;
        for (int i = 1; i < n(); ++i)
            for (int j = 0; j < i; ++j) v.push_back(get(i, j));
        return v;
    }
    static BetaMatrix from_bits(int n, const std::vector<uint8_t>& bits) {
        if (bits.size() != static_cast<size_t>(n) * (n - 1) / 2) throw ValidationError("bit vector length mismatch");
        BetaMatrix b(n);
        size_t k = 0;
        for (int i = 1; i < n; ++i)
            for (int j = 0; j < i; ++j) b.set(i, j, bits[k++] != 0);
        return b;
    }
};

struct IndexSets {
    std::vector<uint64_t> U, P, R;  // per mode, as qubit masks
};

inline IndexSets derive_sets(const BetaMatrix& beta) {
    beta.validate();
    const int n = beta.n();
    BitMatrix binv = gf2_inverse(beta.m);
    BitMatrix pi(n);  // pi(i,j) = 1 for j <= i
    for (int i = 0; i < n; ++i) pi.rows[i] = (i + 1 >= 64) ? ~uint64_t{0} : ((uint64_t{1} << (i + 1)) - 1);
    BitMatrix pib = pi * binv;
    BitMatrix par = pib + binv;
    IndexSets s;
    for (int j = 0; j < n; ++j) {
        uint64_t self = uint64_t{1} << j;
        s.U.push_back(beta.m.column(j) & ~self);
        s.P.push_back(par.rows[j] & ~self);
        s.R.push_back(pib.rows[j] & ~self);
    }
    return s;
}

struct TransformSpec {
    BetaMatrix beta;
    IndexSets sets;
    std::string name = "gt";

    TransformSpec() = default;
    explicit TransformSpec(BetaMatrix b, std::string nm = "gt") : beta(std::move(b)), sets(derive_sets(beta)), name(std::move(nm)) {}
    int n() const { return beta.n(); }
};

inline TransformSpec jw(int n) {
    if (n < 1) throw ValidationError("n must be positive");
    return TransformSpec(BetaMatrix(n), "jw");
}

// Fenwick-tree update structure: qubit i stores the parity of modes (i & (i+1)) .. i.
inline TransformSpec bk(int n) {
    if (n < 1) throw ValidationError("n must be positive");
    BetaMatrix b(n);
    for (int i = 0; i < n; ++i)
        for (int j = (i & (i + 1)); j < i; ++j) b.set(i, j, true);
    return TransformSpec(b, "bk");
}

// a_j^dagger -> [X^U X_j Z^P - i X^U Y_j Z^R] / 2, a_j with +.
inline PauliSum map_ladder(const TransformSpec& t, int j, bool dagger) {
    const int n = t.n();
    if (j < 0 || j >= n) throw std::out_of_range("mode index out of range");
    const uint64_t bit = uint64_t{1} << j;
    const uint64_t u = t.sets.U[j];
    PauliSum s(n);
    s.add(PauliString(n, u | bit, t.sets.P[j], 0.5));
    s.add(PauliString(n, u | bit, t.sets.R[j] | bit, cplx{0, dagger ? -0.5 : 0.5}));
    return s;
}

// Cached two-string images of every ladder operator.
struct LadderTable {
    int n = 0;
    std::vector<std::array<PauliString, 2>> cre, ann;
    explicit LadderTable(const TransformSpec& t) : n(t.n()) {
        for (int j = 0; j < n; ++j) {
            for (int d = 0; d < 2; ++d) {
                auto terms = map_ladder(t, j, d == 0).terms();
                std::array<PauliString, 2> a{terms.at(0), terms.at(1)};
                (d == 0 ? cre : ann).push_back(a);
            }
        }
    }
    const std::array<PauliString, 2>& get(const LadderOp& op) const { return op.dagger ? cre[op.mode] : ann[op.mode]; }
};

inline void accumulate_term(const LadderTable& lt, const FermionTerm& term, PauliSum& out) {
    std::vector<PauliString> cur{PauliString::identity(lt.n, term.coeff)};
    for (auto& op : term.ops) {
        auto& pair = lt.get(op);
        std::vector<PauliString> next;
        next.reserve(cur.size() * 2);
        for (auto& a : cur)
            for (auto& b : pair) next.push_back(multiply(a, b));
        cur.swap(next);
    }
    for (auto& p : cur) out.add(p);
}

inline PauliSum map_operator(const FermionOperator& op, const TransformSpec& t) {
    if (op.n_modes != t.n()) throw DimensionError("operator mode count differs from transform size");
    LadderTable lt(t);
    PauliSum out(t.n());
    for (auto& term : op.terms) accumulate_term(lt, term, out);
    out.canonicalize();
    return out;
}

// Dense matrix in the little-endian computational basis.
inline Eigen::MatrixXcd to_dense(const PauliString& p) {
    const size_t dim = size_t{1} << p.n;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    cplx base = p.coeff * ipow(std::popcount(p.x & p.z));
    for (size_t b = 0; b < dim; ++b) {
        double sgn = (std::popcount(static_cast<uint64_t>(b) & p.z) & 1) ? -1.0 : 1.0;
        m(b ^ p.x, b) += base * sgn;
    }
    return m;
}

inline Eigen::MatrixXcd to_dense(const PauliSum& s) {
    const size_t dim = size_t{1} << s.num_qubits();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (auto& t : s.terms()) m += to_dense(t);
    return m;
}

struct AnticommutationReport {
    bool ok = true;
    std::vector<std::string> violations;
};

inline AnticommutationReport anticommutation_check(int n_modes, const TransformSpec& t, double tol = 1e-12) {
    if (n_modes != t.n()) throw DimensionError("mode count differs from transform size");
    if (n_modes > 6) throw std::invalid_argument("dense anticommutation check limited to 6 modes");
    std::vector<Eigen::MatrixXcd> a, ad;
    for (int j = 0; j < n_modes; ++j) {
        a.push_back(to_dense(map_ladder(t, j, false)));
        ad.push_back(to_dense(map_ladder(t, j, true)));
    }
    const Eigen::Index dim = a[0].rows();
    Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(dim, dim);
    AnticommutationReport rep;
    auto check = [&](const Eigen::MatrixXcd& m, const Eigen::MatrixXcd& expect, const std::string& what) {
        if ((m - expect).cwiseAbs().maxCoeff() > tol) {
            rep.ok = false;
            rep.violations.push_back(what);
        }
    };
    Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(dim, dim);
    for (int j = 0; j < n_modes; ++j)
        for (int k = 0; k < n_modes; ++k) {
            std::string jk = std::to_string(j) + "," + std::to_string(k);
            check(a[j] * a[k] + a[k] * a[j], zero, "{a" + jk + "}");
            check(ad[j] * ad[k] + ad[k] * ad[j], zero, "{a+" + jk + "}");
            check(a[j] * ad[k] + ad[k] * a[j], j == k ? id : zero, "{a,a+ " + jk + "}");
        }
    return rep;
}

// CNOT network with |x> -> |beta x>. Row reduction of beta to the identity; each
// row operation r_i ^= r_k is one CNOT(k -> i) in reverse order.
inline Circuit basis_prefix_circuit(const TransformSpec& t) {
    const int n = t.n();
    Circuit c(n);
    // beta is unit lower triangular: eliminating below-diagonal entries column by
    // column from the bottom gives x = E beta x, so beta = product of CNOTs.
    std::vector<std::pair<int, int>> ops;  // (control k, target i)
    BitMatrix a = t.beta.m;
    for (int j = n - 1; j >= 0; --j)
        for (int i = j + 1; i < n; ++i)
            if (a.get(i, j)) {
                a.rows[i] ^= a.rows[j];
                ops.push_back({j, i});
            }
    // Eliminations E_m ... E_1 beta = I, hence beta = E_1 ... E_m; applying CNOTs
    // in time order E_m first realizes beta.
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) c.add(cnot(it->first, it->second));
    return c;
}

// ---- beta file: n, then rows n-1..1 each listing beta(i,i-1) .. beta(i,0).

inline void write_beta(std::ostream& os, const BetaMatrix& b) {
    os << b.n() << "\n";
    for (int i = b.n() - 1; i >= 1; --i) {
        for (int j = i - 1; j >= 0; --j) os << (b.get(i, j) ? '1' : '0');
        os << "\n";
    }
}

inline BetaMatrix read_beta(std::istream& is) {
    int n = 0;
    if (!(is >> n) || n < 1 || n > kMaxQubits) throw ValidationError("beta file: bad size line");
    BetaMatrix b(n);
    for (int i = n - 1; i >= 1; --i) {
        std::string row;
        if (!(is >> row)) throw ValidationError("beta file: missing row for index " + std::to_string(i));
        if (static_cast<int>(row.size()) != i) throw ValidationError("beta file: row " + std::to_string(i) + " has wrong length");
        for (int k = 0; k < i; ++k) {
            char ch = row[k];
            if (ch != '0' && ch != '1') throw ValidationError("beta file: rows must contain only 0 and 1");
            b.set(i, i - 1 - k, ch == '1');
        }
    }
    return b;
}

}  // namespace fermiopt
