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
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace fermiopt {

using cplx = std::complex<double>;
using Statevector = std::vector<cplx>;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

inline constexpr double kDropTol = 1e-12;
inline constexpr int kMaxQubits = 64;

enum class Letter : uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

inline char letter_char(Letter l) { return "IXYZ"[static_cast<int>(l)]; }

// i^k for k mod 4.
inline cplx ipow(int k) {
    switch (((k % 4) + 4) % 4) {
        case 0: return {1, 0};
        case 1: return {0, 1};
        case 2: return {-1, 0};
        default: return {0, -1};
    }
}

// Letters stored as symplectic bit masks. Y has both bits set and means the
// Hermitian Y, so the operator is i^{|x&z|} X^x Z^z.
struct PauliString {
    int n = 0;
    uint64_t x = 0, z = 0;
    cplx coeff{1, 0};

    PauliString() = default;
    PauliString(int n_, uint64_t x_, uint64_t z_, cplx c = {1, 0}) : n(n_), x(x_), z(z_), coeff(c) {
        if (n < 0 || n > kMaxQubits) throw DimensionError("qubit count out of range");
    }

    static PauliString identity(int n, cplx c = {1, 0}) { return PauliString(n, 0, 0, c); }

    // Parses a dense letter string such as "XIZY" (qubit 0 first).
    static PauliString from_letters(const std::string& s, cplx c = {1, 0}) {
        PauliString p(static_cast<int>(s.size()), 0, 0, c);
        for (int q = 0; q < p.n; ++q) p.set(q, parse_letter(s[q]));
        return p;
    }

    static Letter parse_letter(char ch) {
        switch (ch) {
            case 'I': case '_': return Letter::I;
            case 'X': return Letter::X;
            case 'Y': return Letter::Y;
            case 'Z': return Letter::Z;
            default: throw std::invalid_argument(std::string("bad Pauli letter '") + ch + "'");
        }
    }

    Letter get(int q) const {
        bool bx = (x >> q) & 1, bz = (z >> q) & 1;
        if (bx && bz) return Letter::Y;
        if (bx) return Letter::X;
        if (bz) return Letter::Z;
        return Letter::I;
    }

    void set(int q, Letter l) {
        uint64_t m = uint64_t{1} << q;
        x &= ~m;
        z &= ~m;
        if (l == Letter::X || l == Letter::Y) x |= m;
        if (l == Letter::Z || l == Letter::Y) z |= m;
    }

    uint64_t support() const { return x | z; }
    int weight() const { return std::popcount(support()); }
    bool is_identity() const { return (x | z) == 0; }

    std::string letters() const {
        std::string s(n, 'I');
        for (int q = 0; q < n; ++q) s[q] = letter_char(get(q));
        return s;
    }

    // "coeff * X0 Z3 Y5"
    std::string str() const {
        std::ostringstream os;
        os.precision(12);
        if (coeff.imag() == 0.0) os << coeff.real();
        else os << "(" << coeff.real() << (coeff.imag() < 0 ? "" : "+") << coeff.imag() << "j)";
        os << " *";
        bool any = false;
        for (int q = 0; q < n; ++q) {
            Letter l = get(q);
            if (l == Letter::I) continue;
            os << ' ' << letter_char(l) << q;
            any = true;
        }
        if (!any) os << " I";
        return os.str();
    }

    bool same_letters(const PauliString& o) const { return n == o.n && x == o.x && z == o.z; }
};

inline void check_dims(const PauliString& a, const PauliString& b) {
    if (a.n != b.n) throw DimensionError("Pauli strings act on different qubit counts");
}

// Exponent k such that P_a P_b = i^k P_{a xor b} for unit-coefficient strings.
inline int product_phase_exponent(uint64_t ax, uint64_t az, uint64_t bx, uint64_t bz) {
    // Per qubit: XY=iZ, YZ=iX, ZX=iY and the reverse orders give -i.
    uint64_t ay = ax & az, by = bx & bz;
    uint64_t a_x = ax & ~az, a_z = az & ~ax;
    uint64_t b_x = bx & ~bz, b_z = bz & ~bx;
    uint64_t plus = (a_x & by) | (ay & b_z) | (a_z & b_x);
    uint64_t minus = (ay & b_x) | (a_z & by) | (a_x & b_z);
    return std::popcount(plus) - std::popcount(minus);
}

inline PauliString multiply(const PauliString& a, const PauliString& b) {
    check_dims(a, b);
    int k = product_phase_exponent(a.x, a.z, b.x, b.z);
    return PauliString(a.n, a.x ^ b.x, a.z ^ b.z, a.coeff * b.coeff * ipow(k));
}

inline PauliString operator*(const PauliString& a, const PauliString& b) { return multiply(a, b); }

inline bool commutes_general(const PauliString& a, const PauliString& b) {
    check_dims(a, b);
    return (std::popcount((a.x & b.z) ^ (a.z & b.x)) & 1) == 0;
}

inline bool commutes_qubitwise(const PauliString& a, const PauliString& b) {
    check_dims(a, b);
    uint64_t both = a.support() & b.support();
    return ((a.x ^ b.x) & both) == 0 && ((a.z ^ b.z) & both) == 0;
}

// Lexicographic order on letters, qubit 0 most significant, I<X<Y<Z.
struct LetterOrder {
    bool operator()(const std::pair<uint64_t, uint64_t>& a, const std::pair<uint64_t, uint64_t>& b) const {
        uint64_t d = (a.first ^ b.first) | (a.second ^ b.second);
        if (!d) return false;
        int q = std::countr_zero(d);
        auto code = [q](uint64_t xm, uint64_t zm) {
            bool bx = (xm >> q) & 1, bz = (zm >> q) & 1;
            return bx ? (bz ? 2 : 1) : (bz ? 3 : 0);
        };
        return code(a.first, a.second) < code(b.first, b.second);
    }
};

struct MaskHash {
    size_t operator()(const std::pair<uint64_t, uint64_t>& k) const {
        return std::hash<uint64_t>{}(k.first * 0x9E3779B97F4A7C15ULL ^ (k.second + 0x7F4A7C15ULL));
    }
};

class PauliSum {
public:
    PauliSum() = default;
    explicit PauliSum(int n) : n_(n) {}
    PauliSum(int n, std::initializer_list<PauliString> ts) : n_(n) {
        for (auto& t : ts) add(t);
    }

    int num_qubits() const { return n_; }

    void add(const PauliString& p) {
        if (p.n != n_) throw DimensionError("term qubit count does not match sum");
        acc_[{p.x, p.z}] += p.coeff;
    }
    void add(const PauliSum& s, cplx scale = {1, 0}) {
        if (s.n_ != n_) throw DimensionError("sum qubit counts differ");
        for (auto& [k, c] : s.acc_) acc_[k] += scale * c;
    }

    // Merged terms with |c| >= tol, in canonical order.
    std::vector<PauliString> terms(double tol = kDropTol) const {
        std::vector<std::pair<std::pair<uint64_t, uint64_t>, cplx>> v;
        v.reserve(acc_.size());
        for (auto& kv : acc_)
            if (std::abs(kv.second) >= tol) v.push_back(kv);
        std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return LetterOrder{}(a.first, b.first); });
        std::vector<PauliString> out;
        out.reserve(v.size());
        for (auto& [k, c] : v) out.emplace_back(n_, k.first, k.second, c);
        return out;
    }

    void canonicalize(double tol = kDropTol) {
        for (auto it = acc_.begin(); it != acc_.end();)
            it = std::abs(it->second) < tol ? acc_.erase(it) : std::next(it);
    }

    size_t size() const {
        size_t k = 0;
        for (auto& kv : acc_) k += std::abs(kv.second) >= kDropTol;
        return k;
    }
    bool empty() const { return size() == 0; }

    cplx coeff_of(const PauliString& p) const {
        auto it = acc_.find({p.x, p.z});
        return it == acc_.end() ? cplx{0, 0} : it->second;
    }

    PauliSum adjoint() const {
        PauliSum r(n_);
        for (auto& [k, c] : acc_) r.acc_[k] = std::conj(c);
        return r;
    }

    PauliSum operator*(const PauliSum& o) const {
        if (o.n_ != n_) throw DimensionError("sum qubit counts differ");
        PauliSum r(n_);
        for (auto& [ka, ca] : acc_) {
            if (std::abs(ca) < kDropTol) continue;
            for (auto& [kb, cb] : o.acc_) {
                if (std::abs(cb) < kDropTol) continue;
                int k = product_phase_exponent(ka.first, ka.second, kb.first, kb.second);
                r.acc_[{ka.first ^ kb.first, ka.second ^ kb.second}] += ca * cb * ipow(k);
            }
        }
        r.canonicalize();
        return r;
    }
    PauliSum operator+(const PauliSum& o) const {
        PauliSum r = *this;
        r.add(o);
        r.canonicalize();
        return r;
    }
    PauliSum operator-(const PauliSum& o) const {
        PauliSum r = *this;
        r.add(o, -1.0);
        r.canonicalize();
        return r;
    }
    PauliSum operator*(cplx s) const {
        PauliSum r(n_);
        for (auto& [k, c] : acc_) r.acc_[k] = c * s;
        return r;
    }

    double one_norm() const {
        double s = 0;
        for (auto& kv : acc_) s += std::abs(kv.second);
        return s;
    }

    bool is_hermitian(double tol = 1e-10) const {
        for (auto& kv : acc_)
            if (std::abs(kv.second.imag()) > tol) return false;
        return true;
    }

    std::string str() const {
        std::string s;
        for (auto& t : terms()) s += t.str() + "\n";
        return s;
    }

private:
    int n_ = 0;
    std::unordered_map<std::pair<uint64_t, uint64_t>, cplx, MaskHash> acc_;
};

// Little-endian: qubit q is bit q of the basis index.
inline void apply_pauli_add(const PauliString& p, const Statevector& in, Statevector& out, cplx scale = {1, 0}) {
    cplx base = p.coeff * scale * ipow(std::popcount(p.x & p.z));
    const size_t dim = in.size();
    for (size_t b = 0; b < dim; ++b) {
        if (in[b] == cplx{0, 0}) continue;
        double sgn = (std::popcount(static_cast<uint64_t>(b) & p.z) & 1) ? -1.0 : 1.0;
        out[b ^ p.x] += base * sgn * in[b];
    }
}

inline void check_state(const Statevector& s, int n) {
    if (n > 30 || s.size() != (size_t{1} << n)) throw DimensionError("statevector dimension mismatch");
}

inline Statevector apply(const PauliSum& op, const Statevector& s) {
    check_state(s, op.num_qubits());
    Statevector out(s.size());
    for (auto& t : op.terms()) apply_pauli_add(t, s, out);
    return out;
}

inline cplx inner(const Statevector& a, const Statevector& b) {
    if (a.size() != b.size()) throw DimensionError("statevector sizes differ");
    cplx s{0, 0};
    for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

inline double norm2(const Statevector& a) { return std::real(inner(a, a)); }

inline cplx expectation(const Statevector& s, const PauliString& p) {
    check_state(s, p.n);
    cplx base = p.coeff * ipow(std::popcount(p.x & p.z));
    cplx acc{0, 0};
    for (size_t b = 0; b < s.size(); ++b) {
        if (s[b] == cplx{0, 0}) continue;
        double sgn = (std::popcount(static_cast<uint64_t>(b) & p.z) & 1) ? -1.0 : 1.0;
        acc += std::conj(s[b ^ p.x]) * sgn * s[b];
    }
    return base * acc;
}

inline cplx expectation(const Statevector& s, const PauliSum& op) {
    check_state(s, op.num_qubits());
    if (std::abs(norm2(s) - 1.0) > 1e-12) throw ContractViolation("state is not normalized");
    cplx acc{0, 0};
    for (auto& t : op.terms()) acc += expectation(s, t);
    return acc;
}

// Statevector for a computational basis index.
inline Statevector basis_state(int n, uint64_t index) {
    Statevector s(size_t{1} << n);
    s[index] = 1.0;
    return s;
}

// Restriction of A0 A1 to span{|00>, |11>}, expressed on one qubit. The
// result is sign * letter, or nothing when every matrix element vanishes.
struct PairCompression {
    bool null = true;
    int sign = 1;
    Letter letter = Letter::I;
};

inline PairCompression compress_pair(Letter a0, Letter a1) {
    auto elem = [](Letter l, int r, int c) -> cplx {
        switch (l) {
            case Letter::I: return r == c ? 1.0 : 0.0;
            case Letter::X: return r != c ? 1.0 : 0.0;
            case Letter::Y: return r == c ? cplx(0) : (r == 0 ? cplx(0, -1) : cplx(0, 1));
            default: return r == c ? (r == 0 ? 1.0 : -1.0) : 0.0;
        }
    };
    cplx m[2][2];
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) m[r][c] = elem(a0, r, c) * elem(a1, r, c);
    for (Letter l : {Letter::I, Letter::X, Letter::Y, Letter::Z})
        for (int sg : {1, -1}) {
            bool ok = true;
            for (int r = 0; r < 2 && ok; ++r)
                for (int c = 0; c < 2 && ok; ++c) ok = std::abs(m[r][c] - double(sg) * elem(l, r, c)) < 1e-15;
            if (ok) return {false, sg, l};
        }
    return {};
}

}  // namespace fermiopt
