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

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fermiopt/circuit.hpp"
#include "oracles.hpp"

using namespace fermiopt;
using K = GateKind;

TEST(Circuit, EmptyMetrics) {
    Circuit c(3);
    EXPECT_EQ(metrics(c), Metrics{});
}

TEST(Circuit, RelativePhaseToffoliCounts) {
    Circuit c(4);
    c.add(rtof(0, 1, 2, 3));
    auto m = metrics(c);
    EXPECT_EQ(m.t_count, 8);
    EXPECT_EQ(m.two_qubit_count, 6);
    auto opaque = metrics(c, false);
    EXPECT_EQ(opaque.t_count, 0);
    EXPECT_EQ(opaque.rtof_count, 1);
}

TEST(Circuit, RzLayering) {
    Circuit c(2);
    c.add(rz(0, 0.1)).add(rz(1, 0.2));
    auto m = metrics(c);
    EXPECT_EQ(m.rz_count, 2);
    EXPECT_EQ(m.rz_depth, 1);
    c.add(cnot(0, 1)).add(rz(1, 0.3));
    m = metrics(c);
    EXPECT_EQ(m.rz_depth, 2);
    EXPECT_LE(m.rz_depth, m.rz_count);
}

TEST(Circuit, CnotAndHadamardUnitaries) {
    Circuit c(2);
    c.add(cnot(0, 1));
    oracle::Mat ref = oracle::Mat::Zero(4, 4);
    // little-endian: qubit 0 is the low bit and the control
    ref(0, 0) = ref(2, 2) = 1;
    ref(3, 1) = ref(1, 3) = 1;
    EXPECT_LT((unitary(c) - ref).cwiseAbs().maxCoeff(), 1e-15);
    Circuit h(1);
    h.add(g1(K::H, 0)).add(g1(K::H, 0));
    EXPECT_LT((unitary(h) - oracle::Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Circuit, SizeLimit) {
    Circuit c(13);
    EXPECT_THROW(unitary(c), std::invalid_argument);
}

TEST(Circuit, RelativePhaseToffoliIsToffoliUpToDiagonal) {
    Circuit c(4);
    c.add(rtof(0, 1, 2, 3));
    auto U = unitary(c);
    for (int col = 0; col < 16; ++col) {
        int expect = (col & 7) == 7 ? (col ^ 8) : col;
        EXPECT_NEAR(std::abs(U(expect, col)), 1.0, 1e-12);
    }
    Circuit cc(4);
    cc.add(rtof(0, 1, 2, 3)).add(rtof(0, 1, 2, 3, true));
    EXPECT_LT((unitary(cc) - oracle::Mat::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Circuit, PeepholeInversePairs) {
    Circuit c(2);
    c.add(cnot(0, 1)).add(cnot(0, 1));
    EXPECT_TRUE(peephole_cancel(c).gates.empty());
    Circuit d(1);
    d.add(g1(K::S, 0)).add(g1(K::T, 0)).add(g1(K::Tdg, 0)).add(g1(K::Sdg, 0)).add(rz(0, 0.2)).add(rz(0, -0.2));
    EXPECT_TRUE(peephole_cancel(d).gates.empty());
}

namespace {

// exp(-i theta/2 P) with a star ladder onto target t.
void pauli_block(Circuit& c, const std::string& letters, int t, double theta) {
    auto pre = [&](int q, char l) {
        if (l == 'X') c.add(g1(K::H, q));
        if (l == 'Y') c.add(g1(K::Sdg, q)).add(g1(K::H, q));
    };
    auto post = [&](int q, char l) {
        if (l == 'X') c.add(g1(K::H, q));
        if (l == 'Y') c.add(g1(K::H, q)).add(g1(K::S, q));
    };
    for (int q = 0; q < static_cast<int>(letters.size()); ++q) pre(q, letters[q]);
    for (int q = 0; q < static_cast<int>(letters.size()); ++q)
        if (q != t && letters[q] != 'I') c.add(cnot(q, t));
    c.add(rz(t, theta));
    for (int q = static_cast<int>(letters.size()) - 1; q >= 0; --q)
        if (q != t && letters[q] != 'I') c.add(cnot(q, t));
    for (int q = 0; q < static_cast<int>(letters.size()); ++q) post(q, letters[q]);
}

}  // namespace

TEST(Circuit, PeepholeBoundaryTwoCnot) {
    // Shared control letter X on qubit 0 (M0 = M2), target 1.
    Circuit c(2);
    pauli_block(c, "XX", 1, 0.3);
    pauli_block(c, "XY", 1, 0.7);
    auto before = metrics(c).two_qubit_count;
    auto opt = peephole_cancel(c);
    EXPECT_EQ(metrics(opt).two_qubit_count, before - 2);
    EXPECT_TRUE(equal_up_to_phase(unitary(opt), unitary(c)));
}

TEST(Circuit, PeepholeBoundaryOneCnot) {
    // Control letters X then Y (M0 != M2), both non-identity.
    Circuit c(2);
    pauli_block(c, "XX", 1, 0.3);
    pauli_block(c, "YX", 1, 0.7);
    auto before = metrics(c).two_qubit_count;
    auto opt = peephole_cancel(c);
    EXPECT_EQ(metrics(opt).two_qubit_count, before - 1);
    EXPECT_TRUE(equal_up_to_phase(unitary(opt), unitary(c)));
}

TEST(Circuit, PeepholeMultipleControlsAtOneBoundary) {
    Circuit c(4);
    pauli_block(c, "XZYX", 3, 0.3);
    pauli_block(c, "YZXY", 3, -0.4);
    // controls: 0 (X->Y, one), 1 (Z->Z, two), 2 (Y->X, one)
    auto before = metrics(c).two_qubit_count;
    auto opt = peephole_cancel(c);
    EXPECT_EQ(metrics(opt).two_qubit_count, before - 4);
    EXPECT_TRUE(equal_up_to_phase(unitary(opt), unitary(c)));
}

TEST(Circuit, PeepholePreservesUnitaryOnRandomCircuits) {
    std::mt19937_64 rng(2024);
    const K singles[] = {K::H, K::S, K::Sdg, K::T, K::Tdg, K::X, K::Z, K::Rz, K::Rx};
    for (int trial = 0; trial < 60; ++trial) {
        int n = 2 + trial % 5;
        Circuit c(n);
        int len = 10 + rng() % 50;
        for (int k = 0; k < len; ++k) {
            int r = rng() % 10;
            if (r < 4) {
                int a = rng() % n, b = rng() % n;
                if (a == b) b = (a + 1) % n;
                c.add(r == 3 ? cz(a, b) : cnot(a, b));
            } else {
                K kind = singles[rng() % 9];
                c.add(g1(kind, rng() % n, is_rotation(kind) ? 0.1 * (1 + rng() % 20) : 0.0));
            }
        }
        auto opt = peephole_cancel(c);
        EXPECT_LE(metrics(opt).two_qubit_count, metrics(c).two_qubit_count);
        EXPECT_TRUE(equal_up_to_phase(unitary(opt), unitary(c))) << "trial " << trial;
    }
}

TEST(Circuit, PeepholeOnRandomPauliBlockChains) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        int n = 3 + trial % 3;
        Circuit c(n);
        int t = rng() % n;
        for (int b = 0; b < 4; ++b) {
            std::string s(n, 'I');
            for (auto& ch : s) ch = "IXYZ"[rng() % 4];
            s[t] = "XY"[rng() % 2];
            pauli_block(c, s, t, 0.1 + 0.2 * b);
        }
        auto opt = peephole_cancel(c);
        EXPECT_TRUE(equal_up_to_phase(unitary(opt), unitary(c))) << "trial " << trial;
    }
}

TEST(Circuit, TextRoundTrip) {
    Circuit c(3, 1);
    c.add(g1(K::H, 0)).add(cnot(0, 3)).add(rz(1, 0.123456789)).add(rtof(0, 1, 2, 3)).add(g1(K::Sdg, 2));
    std::stringstream ss;
    write_circuit(ss, c);
    auto r = read_circuit(ss);
    EXPECT_EQ(r.n_data, 3);
    EXPECT_EQ(r.n_ancilla, 1);
    ASSERT_EQ(r.gates.size(), c.gates.size());
    for (size_t i = 0; i < c.gates.size(); ++i) {
        EXPECT_EQ(r.gates[i].kind, c.gates[i].kind);
        EXPECT_EQ(r.gates[i].q, c.gates[i].q);
        EXPECT_EQ(r.gates[i].theta, c.gates[i].theta);
    }
    std::stringstream bad("FOO 1 2\n");
    EXPECT_THROW(read_circuit(bad), std::invalid_argument);
}
