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
#include <unsupported/Eigen/MatrixFunctions>

#include "fermiopt/io.hpp"
#include "fermiopt/measure.hpp"
#include "oracles.hpp"

using namespace fermiopt;
using K = GateKind;

namespace {

oracle::Mat dense(const PauliString& p) { return oracle::pauli(p.letters(), p.coeff); }

PauliString random_string(int n, std::mt19937_64& rng) {
    std::string s(n, 'I');
    for (auto& c : s) c = "IXYZ"[rng() % 4];
    return PauliString::from_letters(s, std::uniform_real_distribution<double>(0.1, 1.0)(rng));
}

bool is_diagonal(const oracle::Mat& m, double tol = 1e-12) {
    oracle::Mat d = m;
    d.diagonal().setZero();
    return d.cwiseAbs().maxCoeff() < tol;
}

// Full basis index of a reduced basis index under the context layout.
uint64_t embed(const QSRContext& ctx, uint64_t r) {
    uint64_t full = 0;
    for (auto& [q, v] : ctx.classical) full |= uint64_t(v) << q;
    for (size_t i = 0; i < ctx.entangled.size(); ++i) full |= ((r >> i) & 1) << ctx.entangled[i];
    for (size_t k = 0; k < ctx.pairs.size(); ++k) {
        uint64_t b = (r >> (ctx.entangled.size() + k)) & 1;
        full |= (b << ctx.pairs[k].first) | (b << ctx.pairs[k].second);
    }
    return full;
}

// Every string: <Psi|S|Psi> = factor * <psi|S_red|psi>.
void expect_preserved(const Statevector& full, const QSRContext& ctx, int strings, std::mt19937_64& rng) {
    Statevector red(size_t{1} << ctx.reduced_qubits());
    for (uint64_t r = 0; r < red.size(); ++r) red[r] = full[embed(ctx, r)];
    double nrm = 0;
    for (auto& a : red) nrm += std::norm(a);
    ASSERT_NEAR(nrm, 1.0, 1e-12) << "state outside the declared form";
    for (int k = 0; k < strings; ++k) {
        PauliString s = random_string(ctx.n, rng);
        auto r = qsr_compress(s, ctx);
        cplx lhs = expectation(full, s);
        cplx rhs = r.null() ? cplx(0) : r.factor * expectation(red, r.reduced);
        EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-12) << s.letters();
    }
}

Statevector evolve(const std::vector<OrbitalSequence>& terms, const std::vector<double>& th, const TransformSpec& spec,
                   int ne) {
    const int n = spec.n();
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(size_t{1} << n);
    uint64_t occ = (uint64_t{1} << ne) - 1;
    v(spec.beta.m.apply(occ)) = 1.0;
    for (size_t j = 0; j < terms.size(); ++j) {
        oracle::Mat g = th[j] * to_dense(excitation_generator(terms[j], spec));
        oracle::Mat u = g.exp();
        v = u * v;
    }
    return Statevector(v.data(), v.data() + v.size());
}

}  // namespace

TEST(Measure, PairRowsThroughContext) {
    QSRContext ctx;
    ctx.n = 2;
    ctx.pairs = {{0, 1}};
    auto zz = qsr_compress(PauliString::from_letters("ZZ"), ctx);
    EXPECT_EQ(zz.factor, 1.0);
    EXPECT_EQ(zz.reduced.letters(), "I");
    auto yy = qsr_compress(PauliString::from_letters("YY"), ctx);
    EXPECT_EQ(yy.factor, -1.0);
    EXPECT_EQ(yy.reduced.letters(), "X");
    EXPECT_TRUE(qsr_compress(PauliString::from_letters("IX"), ctx).null());
}

TEST(Measure, ClassicalLetters) {
    QSRContext ctx;
    ctx.n = 3;
    ctx.entangled = {1};
    ctx.classical = {{0, 1}, {2, 0}};
    ctx.validate();
    auto r = qsr_compress(PauliString::from_letters("ZYZ", 0.5), ctx);
    EXPECT_EQ(r.factor, -1.0);
    EXPECT_EQ(r.reduced.letters(), "Y");
    EXPECT_EQ(r.reduced.coeff, cplx(0.5));
    EXPECT_TRUE(qsr_compress(PauliString::from_letters("XZI"), ctx).null());
    EXPECT_TRUE(qsr_compress(PauliString::from_letters("IZY"), ctx).null());
}

TEST(Measure, ContextValidation) {
    QSRContext c;
    c.n = 3;
    c.entangled = {0, 1};
    EXPECT_THROW(c.validate(), ValidationError);
    c.classical = {{1, 0}, {2, 0}};
    EXPECT_THROW(c.validate(), ValidationError);
    c.classical = {{2, 3}};
    EXPECT_THROW(c.validate(), ValidationError);
    c.classical = {{2, 1}};
    EXPECT_NO_THROW(c.validate());
    EXPECT_NO_THROW(QSRContext::trivial(5).validate());
}

TEST(Measure, ReductionPreservesExpectations) {
    std::mt19937_64 rng(3);
    QSRContext ctx;
    ctx.n = 6;
    ctx.entangled = {0, 3};
    ctx.classical = {{1, 1}, {4, 0}};
    ctx.pairs = {{2, 5}};
    ctx.validate();
    for (int trial = 0; trial < 4; ++trial) {
        oracle::Mat m = oracle::random_state_matrix(8, rng);
        Statevector red(8);
        for (int i = 0; i < 8; ++i) red[i] = m(i, 0);
        Statevector full(64);
        for (uint64_t r = 0; r < 8; ++r) full[embed(ctx, r)] = red[r];
        expect_preserved(full, ctx, 400, rng);
    }
}

TEST(Measure, ContextFromAnsatzSupport) {
    const int n = 8, ne = 4;
    std::vector<OrbitalSequence> terms{OrbitalSequence::dbl(5, 4, 1, 0)};
    auto ctx = qsr_context(terms, jw(n), ne);
    ctx.validate();
    EXPECT_TRUE(ctx.entangled.empty());
    EXPECT_EQ(ctx.pairs, (std::vector<std::pair<int, int>>{{0, 1}, {4, 5}}));
    EXPECT_EQ(ctx.classical, (std::vector<std::pair<int, int>>{{2, 1}, {3, 1}, {6, 0}, {7, 0}}));
    terms.push_back(OrbitalSequence::single(6, 2));
    ctx = qsr_context(terms, jw(n), ne);
    EXPECT_EQ(ctx.entangled, (std::vector<int>{2, 6}));
    EXPECT_EQ(ctx.pairs.size(), 2u);
    terms.push_back(OrbitalSequence::single(4, 0));
    ctx = qsr_context(terms, jw(n), ne);
    EXPECT_EQ(ctx.entangled, (std::vector<int>{0, 1, 2, 4, 5, 6}));
    EXPECT_TRUE(ctx.pairs.empty());
    EXPECT_EQ(ctx.reduced_qubits(), 6);
    EXPECT_TRUE(qsr_context({}, jw(n), ne).entangled.empty());
}

TEST(Measure, ContextMatchesEvolvedStates) {
    std::mt19937_64 rng(11);
    const int n = 8, ne = 4;
    std::vector<std::vector<OrbitalSequence>> sets{
        {OrbitalSequence::dbl(5, 4, 1, 0)},
        {OrbitalSequence::dbl(5, 4, 1, 0), OrbitalSequence::dbl(7, 6, 3, 2)},
        {OrbitalSequence::dbl(5, 4, 1, 0), OrbitalSequence::single(6, 2)},
        {OrbitalSequence::dbl(6, 5, 3, 0), OrbitalSequence::single(4, 2)},
    };
    std::vector<uint8_t> bits(n * (n - 1) / 2);
    for (auto& b : bits) b = rng() & 1;
    for (auto& spec : {jw(n), bk(n), TransformSpec(BetaMatrix::from_bits(n, bits))})
        for (auto& terms : sets) {
            std::vector<double> th;
            for (size_t j = 0; j < terms.size(); ++j) th.push_back(0.3 + 0.2 * j);
            auto ctx = qsr_context(terms, spec, ne);
            ctx.validate();
            expect_preserved(evolve(terms, th, spec, ne), ctx, 300, rng);
        }
}

TEST(Measure, ConjugationMatchesDense) {
    std::mt19937_64 rng(5);
    const K kinds[] = {K::H, K::S, K::Sdg, K::X, K::Z};
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 3;
        Circuit c(n);
        for (int k = 0; k < 12; ++k) {
            int r = rng() % 7;
            int a = rng() % n, b = (a + 1 + rng() % (n - 1)) % n;
            if (r < 5) c.add(g1(kinds[r], a));
            else c.add(r == 5 ? cnot(a, b) : cz(a, b));
        }
        auto U = unitary(c);
        auto p = random_string(n, rng);
        oracle::Mat ref = U * dense(p) * U.adjoint();
        EXPECT_LT((dense(conjugate(p, c)) - ref).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
    }
    Circuit t(1);
    t.add(g1(K::T, 0));
    EXPECT_THROW(conjugate(PauliString::from_letters("X"), t), std::invalid_argument);
}

TEST(Measure, BellGroupNeedsEntanglingGate) {
    std::vector<PauliString> s{PauliString::from_letters("XX"), PauliString::from_letters("YY"),
                               PauliString::from_letters("ZZ")};
    auto gc = partition_gc(s);
    ASSERT_EQ(gc.groups.size(), 1u);
    EXPECT_GE(gc.groups[0].extra_two_qubit, 1);
    EXPECT_TRUE(verify_plan(gc).ok());
    auto U = unitary(gc.groups[0].clifford);
    for (auto& p : s) EXPECT_TRUE(is_diagonal(U * dense(p) * U.adjoint()));
    // independent oracle: eigenvectors of a generic combination diagonalize every member
    oracle::Mat mix = 0.3 * dense(s[0]) + 0.7 * dense(s[1]) + 1.9 * dense(s[2]);
    Eigen::ComplexEigenSolver<oracle::Mat> es(mix);
    oracle::Mat V = es.eigenvectors();
    for (auto& p : s) EXPECT_TRUE(is_diagonal(V.inverse() * dense(p) * V, 1e-10));
    EXPECT_EQ(partition_qwc(s).groups.size(), 3u);
}

TEST(Measure, AllZStringsFormOneQwcGroup) {
    std::vector<PauliString> s;
    for (auto l : {"ZII", "IZI", "ZZZ", "IIZ", "ZIZ"}) s.push_back(PauliString::from_letters(l));
    auto q = partition_qwc(s);
    ASSERT_EQ(q.groups.size(), 1u);
    EXPECT_EQ(q.total_extra(), 0);
    EXPECT_TRUE(q.groups[0].clifford.gates.empty());
    auto g = partition_gc(s);
    EXPECT_EQ(g.groups.size(), 1u);
    EXPECT_EQ(g.total_extra(), 0);
}

TEST(Measure, RandomCommutingSetsDiagonalize) {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 2 + trial % 4;
        std::vector<PauliString> set;
        for (int k = 0; k < 4 * n; ++k) {
            auto p = random_string(n, rng);
            bool ok = true;
            for (auto& q : set) ok = ok && commutes_general(p, q);
            if (ok) set.push_back(p);
        }
        auto c = diagonalizing_clifford(n, set);
        auto U = unitary(c);
        for (auto& p : set) {
            auto img = conjugate(p, c);
            EXPECT_TRUE(is_z_type(img)) << p.letters();
            EXPECT_TRUE(is_diagonal(U * dense(p) * U.adjoint()));
            EXPECT_LT((dense(img) - U * dense(p) * U.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
    EXPECT_THROW(diagonalizing_clifford(1, {PauliString::from_letters("X"), PauliString::from_letters("Z")}),
                 ValidationError);
}

TEST(Measure, PartitionInvariants) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + trial % 4;
        PauliSum sum(n);
        for (int k = 0; k < 40; ++k) sum.add(random_string(n, rng));
        auto strings = measured_strings(sum);
        auto q = partition_qwc(strings);
        auto g = partition_gc(strings);
        EXPECT_TRUE(verify_plan(q).ok());
        EXPECT_TRUE(verify_plan(g).ok());
        EXPECT_LE(g.groups.size(), q.groups.size());
        EXPECT_LE(q.groups.size(), strings.size());
        for (auto* plan : {&q, &g}) {
            std::multiset<std::pair<uint64_t, uint64_t>> a, b;
            for (auto& s : strings) a.insert({s.x, s.z});
            for (auto& grp : plan->groups)
                for (auto& s : grp.members) b.insert({s.x, s.z});
            EXPECT_EQ(a, b);
        }
        // QWC basis changes diagonalize in the dense picture too
        for (auto& grp : q.groups) {
            auto U = unitary(grp.clifford);
            for (auto& s : grp.members) EXPECT_TRUE(is_diagonal(U * dense(s) * U.adjoint()));
        }
    }
}

TEST(Measure, GreedyOrderFollowsCoefficientMagnitude) {
    std::vector<PauliString> s{PauliString::from_letters("XI", 0.1), PauliString::from_letters("ZI", 0.9),
                               PauliString::from_letters("ZZ", 0.5)};
    auto g = partition_gc(s);
    ASSERT_EQ(g.groups.size(), 2u);
    EXPECT_EQ(g.groups[0].members[0].letters(), "ZI");
    EXPECT_EQ(g.groups[0].members[1].letters(), "ZZ");
    EXPECT_EQ(g.groups[1].members[0].letters(), "XI");
}

TEST(Measure, H2MeasurementSummary) {
    auto s = to_integrals(read_fcidump_file(FERMIOPT_DATA_DIR "/h2_sto3g.fcidump"));
    auto H = map_operator(build_hamiltonian(spin_hamiltonian(s)), jw(4));
    auto pool = all_excitations({0, 1}, {2, 3});
    auto hf = measurement_summary(pool, {}, {}, H, jw(4), 2);
    EXPECT_EQ(hf.reduced_qubits, 0);
    EXPECT_EQ(hf.n_qsr, 0.0);
    EXPECT_GT(hf.n_jw, 0.0);
    std::vector<OrbitalSequence> terms{OrbitalSequence::dbl(3, 2, 1, 0)};
    auto m = measurement_summary(pool, terms, {0.11}, H, jw(4), 2);
    EXPECT_EQ(m.n_alpha, 3);
    EXPECT_EQ(m.reduced_qubits, 2);
    EXPECT_TRUE(m.plans_valid);
    EXPECT_TRUE(m.refinement);
    EXPECT_LE(m.n_gc_qsr, m.n_qwc_qsr);
    EXPECT_LE(m.n_qsr, m.n_jw);
    EXPECT_GT(m.r_measure(), 0.0);
    EXPECT_LT(m.r_measure(), 0.5);
    auto b = measurement_summary(pool, terms, {0.11}, H, bk(4), 2);
    EXPECT_TRUE(b.plans_valid && b.refinement);
}

TEST(Measure, NumeratorOperatorMatchesEmulator) {
    // <psi|(D~^dag + [Z~, D~^dag]) H|psi> against the dense sandwich.
    auto s = to_integrals(read_fcidump_file(FERMIOPT_DATA_DIR "/h2_sto3g.fcidump"));
    auto spec = bk(4);
    auto H = map_operator(build_hamiltonian(spin_hamiltonian(s)), spec);
    std::vector<OrbitalSequence> terms{OrbitalSequence::dbl(3, 2, 1, 0)};
    auto psi = evolve(terms, {0.2}, spec, 2);
    auto al = OrbitalSequence::single(2, 0);
    auto op = hmp2_measurement_operator(al, terms, {0.2}, H, spec);
    oracle::Mat D = to_dense(excitation_generator(al, spec));
    oracle::Mat Z = 0.2 * to_dense(excitation_generator(terms[0], spec));
    oracle::Mat Dd = D.adjoint();
    oracle::Mat M = (Dd - Dd * Z + Z * Dd) * to_dense(H);
    Eigen::Map<const Eigen::VectorXcd> v(psi.data(), psi.size());
    cplx ref = v.dot(M * v);
    EXPECT_NEAR(std::abs(expectation(psi, op) - ref), 0.0, 1e-12);
}
