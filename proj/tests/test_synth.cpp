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

#include <numeric>
#include <random>
#include <set>
#include <unsupported/Eigen/MatrixFunctions>

#include "fermiopt/synth_trotter.hpp"
#include "oracles.hpp"

using namespace fermiopt;
using oracle::Mat;

namespace {

TransformSpec random_spec(int n, std::mt19937_64& rng) {
    std::vector<uint8_t> bits(n * (n - 1) / 2);
    for (auto& b : bits) b = rng() & 1;
    return TransformSpec(BetaMatrix::from_bits(n, bits));
}

OrbitalSequence random_excitation(int n, std::mt19937_64& rng, bool dbl) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    if (dbl) return OrbitalSequence::dbl(idx[0], idx[1], idx[2], idx[3]);
    return OrbitalSequence::single(idx[0], idx[1]);
}

// |x> -> |beta x> on occupation bit strings.
Mat encoding(const BetaMatrix& b) {
    const int n = b.n();
    Mat P = Mat::Zero(1 << n, 1 << n);
    for (uint64_t x = 0; x < (uint64_t{1} << n); ++x) {
        uint64_t y = 0;
        for (int i = 0; i < n; ++i) {
            int bit = 0;
            for (int j = 0; j < n; ++j) bit ^= b.get(i, j) & ((x >> j) & 1);
            y |= uint64_t(bit) << i;
        }
        P(y, x) = 1;
    }
    return P;
}

Mat occupation_generator(int n, const OrbitalSequence& s) {
    Mat T = Mat::Identity(1 << n, 1 << n);
    for (auto& op : s.ops()) T = T * oracle::jw_ladder(n, op.mode, op.dagger);
    return T - T.adjoint();
}

Mat term_dense(const TrotterTerm& t) {
    Mat U = Mat::Identity(1 << t.n, 1 << t.n);
    for (size_t j = 0; j < t.strings.size(); ++j) {
        Mat P = oracle::pauli(t.strings[j].letters());
        Mat E = (cplx(0, -t.angles[j] / 2) * P).exp();
        U = E * U;
    }
    return U;
}

std::vector<Block> chosen_blocks(const TrotterTerm& t, const IntraOption& o) {
    std::vector<Block> bs;
    for (int j : o.order()) bs.push_back({t.strings[j], t.angles[j], o.target});
    return bs;
}

}  // namespace

TEST(Synth, ProductFormulaSequences) {
    std::vector<std::pair<char, double>> terms{{'a', 1.0}, {'b', 2.0}};
    auto s1 = pf_sequence(terms, {1, 1});
    ASSERT_EQ(s1.size(), 2u);
    EXPECT_EQ(s1[0], std::make_pair('a', 1.0));
    EXPECT_EQ(s1[1], std::make_pair('b', 2.0));
    auto s2 = pf_sequence(terms, {2, 1});
    std::vector<std::pair<char, double>> expect{{'a', 0.5}, {'b', 1.0}, {'b', 1.0}, {'a', 0.5}};
    EXPECT_EQ(s2, expect);
    EXPECT_NEAR(pf_coefficient(2), 0.4144907717943757, 1e-12);
    auto s4 = pf_sequence(terms, {4, 3});
    EXPECT_EQ(s4.size(), 3u * 5u * 4u);
    double sum_a = 0;
    for (auto& [c, th] : s4)
        if (c == 'a') sum_a += th;
    EXPECT_NEAR(sum_a, 1.0, 1e-12);
    EXPECT_THROW(pf_sequence(terms, {3, 1}), std::invalid_argument);
    EXPECT_THROW(pf_sequence(terms, {2, 0}), std::invalid_argument);
}

TEST(Synth, SecondOrderErrorSlope) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 5; ++trial) {
        // resample until some pair anticommutes, otherwise the formula is exact
        std::vector<std::pair<std::string, double>> terms;
        bool commuting = true;
        while (commuting) {
            terms.clear();
            for (int k = 0; k < 3; ++k) {
                std::string s(4, 'I');
                for (auto& c : s) c = "IXYZ"[rng() % 4];
                terms.push_back({s, nd(rng)});
            }
            for (int a = 0; a < 3; ++a)
                for (int b = a + 1; b < 3; ++b)
                    if (!commutes_general(PauliString::from_letters(terms[a].first),
                                          PauliString::from_letters(terms[b].first)))
                        commuting = false;
        }
        Mat H = Mat::Zero(16, 16);
        for (auto& [s, th] : terms) H += th / 2 * oracle::pauli(s);
        Mat exact = (cplx(0, -1) * H).exp();
        std::vector<double> lx, ly;
        for (int r : {2, 4, 8, 16}) {
            Mat U = Mat::Identity(16, 16);
            for (auto& [s, th] : pf_sequence(terms, {2, r})) U = (cplx(0, -th / 2) * oracle::pauli(s)).exp() * U;
            lx.push_back(std::log(double(r)));
            ly.push_back(std::log((U - exact).operatorNorm()));
        }
        double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / 4, my = std::accumulate(ly.begin(), ly.end(), 0.0) / 4;
        double sxy = 0, sxx = 0;
        for (int i = 0; i < 4; ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
        double slope = sxy / sxx;
        EXPECT_NEAR(slope, -2.0, 0.4) << "trial " << trial;
    }
}

TEST(Synth, TwoBodyJordanWignerStrings) {
    auto spec = jw(4);
    auto t = expand_term(OrbitalSequence::dbl(3, 2, 1, 0), spec, 0.4, TermForm::Hermitian);
    ASSERT_EQ(t.strings.size(), 8u);
    std::set<std::string> got;
    for (auto& s : t.strings) got.insert(s.letters());
    std::set<std::string> want{"XXXX", "XXYY", "XYYX", "XYXY", "YYXX", "YXXY", "YXYX", "YYYY"};
    EXPECT_EQ(got, want);
    for (double a : t.angles) EXPECT_NEAR(std::abs(a), 0.4 / 8, 1e-15);

    auto u = expand_term(OrbitalSequence::dbl(3, 2, 1, 0), spec, 0.4);
    ASSERT_EQ(u.strings.size(), 8u);
    for (auto& s : u.strings) {
        int ny = 0;
        for (char c : s.letters()) ny += c == 'Y';
        EXPECT_EQ(ny % 2, 1);
    }
    EXPECT_EQ(u.eligible, 0xFu);
}

TEST(Synth, OneBodyHasTwoStrings) {
    auto t = expand_term(OrbitalSequence::single(3, 0), jw(4), 0.2);
    ASSERT_EQ(t.strings.size(), 2u);
    EXPECT_EQ(t.strings[0].letters(), "XZZY");
    EXPECT_EQ(t.strings[1].letters(), "YZZX");
    auto r = intra_order(t);
    EXPECT_TRUE(r.eligible);
    // 2 * 2 * 3, minus two Z controls (2 each) and one X/Y control
    EXPECT_EQ(r.cost, 7);
    EXPECT_THROW(expand_term(OrbitalSequence::single(5, 0), jw(4), 0.1), DimensionError);
}

TEST(Synth, ExpandedTermMatchesDenseUnderRandomBeta) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 8; ++trial) {
        auto spec = random_spec(4, rng);
        auto seq = random_excitation(4, rng, trial % 2 == 0);
        const double th = 0.37;
        auto t = expand_term(seq, spec, th);
        EXPECT_EQ(t.strings.size(), seq.kind == OrbitalSequence::Double ? 8u : 2u);
        Mat G = Mat::Zero(16, 16);
        for (size_t j = 0; j < t.strings.size(); ++j)
            G += cplx(0, -t.angles[j] / (2 * th)) * oracle::pauli(t.strings[j].letters());
        Mat P = encoding(spec.beta);
        Mat ref = P * occupation_generator(4, seq) * P.adjoint();
        EXPECT_LT((G - ref).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
        EXPECT_LT((term_dense(t) - (th * ref).exp()).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Synth, PauliExponentialCircuits) {
    auto z0 = synth_pauli_exp(PauliString::from_letters("Z"), 0.3, 0);
    ASSERT_EQ(z0.gates.size(), 1u);
    EXPECT_EQ(z0.gates[0].kind, GateKind::Rz);
    auto zz = synth_pauli_exp(PauliString::from_letters("ZZ"), 0.3, 1);
    ASSERT_EQ(zz.gates.size(), 3u);
    EXPECT_EQ(zz.gates[0].kind, GateKind::CNOT);
    EXPECT_EQ(zz.gates[1].kind, GateKind::Rz);
    EXPECT_EQ(zz.gates[2].kind, GateKind::CNOT);
    for (double th : {0.0, 0.3, -1.2, 3.0}) {
        auto c = synth_pauli_exp(PauliString::from_letters("XYZ"), th, 2);
        EXPECT_EQ(metrics(c).two_qubit_count, 4);
        Mat ref = std::cos(th / 2) * Mat::Identity(8, 8) - cplx(0, std::sin(th / 2)) * oracle::pauli("XYZ");
        EXPECT_LT((unitary(c) - ref).cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_THROW(synth_pauli_exp(PauliString::from_letters("XIZ"), 0.1, 1), IneligibleTarget);
}

TEST(Synth, IneligibleTargetExcluded) {
    // Under BK the double on modes 0..3 leaves some labels with identity letters.
    bool saw_gap = false;
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto spec = random_spec(6, rng);
        auto t = expand_term(random_excitation(6, rng, true), spec, 0.2);
        for (uint64_t e = t.labels; e; e &= e - 1) {
            int q = std::countr_zero(e);
            bool all = true;
            for (auto& s : t.strings) all = all && s.get(q) != Letter::I;
            EXPECT_EQ(bool(t.eligible >> q & 1), all);
            if (!all) saw_gap = true;
        }
        auto r = intra_order(t);
        for (auto& o : r.minima) EXPECT_TRUE(t.eligible >> o.target & 1);
    }
    EXPECT_TRUE(saw_gap);
}

TEST(Synth, CostModelMatchesOptimizedCircuit) {
    std::mt19937_64 rng(2026);
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        int n = 4 + trial % 5;
        TransformSpec spec = trial % 3 == 0 ? jw(n) : trial % 3 == 1 ? bk(n) : random_spec(n, rng);
        auto t = expand_term(random_excitation(n, rng, trial % 4 != 0), spec, 0.1 + 0.01 * trial);
        if (!t.eligible) continue;
        auto r = intra_order(t);
        ASSERT_FALSE(r.minima.empty());
        EXPECT_EQ(intra_cost(t), r.cost);
        for (const IntraOption* o : {&r.minima.front(), &r.minima.back()}) {
            auto bs = chosen_blocks(t, *o);
            EXPECT_EQ(realized_cnots(bs, n), r.cost) << "trial " << trial;
            EXPECT_EQ(cost_breakdown(t, o->order(), o->target).total, r.cost);
        }
        ++checked;
    }
    EXPECT_GT(checked, 30);
}

TEST(Synth, BreakdownIdentity) {
    auto t = expand_term(OrbitalSequence::dbl(5, 4, 1, 0), jw(6), 0.3);
    auto cb = cost_breakdown(t, {0, 1, 2, 3, 4, 5, 6, 7}, 5);
    int s = 0;
    for (int N : cb.N) s += 2 * (N - 1);
    for (size_t j = 0; j < cb.m.size(); ++j) s -= 2 * cb.m[j] + cb.n[j];
    EXPECT_EQ(s, cb.total);
    EXPECT_EQ(cb.m.size(), 7u);
}

TEST(Synth, SwapCandidateCounts) {
    auto brute = [](int s, int k) {
        std::vector<int> p(s);
        std::iota(p.begin(), p.end(), 0);
        int count = 0;
        do {
            int swaps = 0, fixed = 0;
            bool ok = true;
            for (int i = 0; i < s; ++i) {
                if (p[i] == i) ++fixed;
                else if (p[p[i]] == i) ++swaps;
                else ok = false;
            }
            if (ok && swaps == 2 * k) ++count;
        } while (std::next_permutation(p.begin(), p.end()));
        return count;
    };
    for (int s = 2; s <= 7; ++s)
        for (int k = 1; k <= 3; ++k) EXPECT_EQ(static_cast<int>(kswap_candidates(s, k).size()), brute(s, k));
    EXPECT_EQ(kswap_candidates(4, 2).size(), 3u);
}

TEST(Synth, RelabelingDescends) {
    EXPECT_THROW(relabel_levels({}, jw(5)), ValidationError);
    auto idle = relabel_levels({}, jw(8));
    EXPECT_EQ(idle.rounds, 1);
    EXPECT_EQ(idle.labels, (std::vector<int>{0, 1, 2, 3}));

    // Excitations between far-apart levels profit from moving them together.
    std::vector<OrbitalSequence> seqs{OrbitalSequence::dbl(7, 6, 1, 0), OrbitalSequence::single(6, 0),
                                      OrbitalSequence::single(7, 1)};
    auto spec = jw(8);
    std::vector<int> id{0, 1, 2, 3};
    int before = labeling_cost(seqs, spec, id);
    auto st = relabel_levels(seqs, spec, 1);
    EXPECT_LT(st.cost, before);
    EXPECT_EQ(labeling_cost(seqs, spec, st.positions()), st.cost);
    std::vector<int> sorted = st.labels;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, id);
    EXPECT_GE(st.rounds, 2);
}

TEST(Synth, InterOrderClasses) {
    auto spec = jw(6);
    std::vector<TrotterTerm> ts{expand_term(OrbitalSequence::single(2, 0), spec, 0.1),
                                expand_term(OrbitalSequence::single(4, 0), spec, 0.2),
                                expand_term(OrbitalSequence::single(5, 0), spec, 0.3)};
    auto plan = inter_order(ts);
    EXPECT_EQ(plan.items.size(), 3u);
    EXPECT_TRUE(plan.excluded.empty());
    // every term names qubit 0; with equal cost targets the class forms on the
    // most frequent one
    ASSERT_GE(plan.classes.size(), 1u);
    std::set<int> seen;
    for (auto& c : plan.classes)
        for (int t : c.terms) EXPECT_TRUE(seen.insert(t).second);
    EXPECT_EQ(seen.size(), 3u);

    // Disjoint supports: no savings at the boundary, either order.
    std::vector<TrotterTerm> dj{expand_term(OrbitalSequence::single(1, 0), spec, 0.1),
                                expand_term(OrbitalSequence::single(5, 4), spec, 0.2)};
    EXPECT_EQ(boundary_savings(dj[0].strings[0], 1, dj[1].strings[0], 5), 0);
    EXPECT_EQ(boundary_savings(dj[1].strings[0], 5, dj[0].strings[0], 1), 0);
    auto pc = plan_cost(inter_order(dj), dj);
    EXPECT_EQ(pc.boundary, 0);
}

TEST(Synth, InterOrderNotWorseThanGivenOrder) {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 8;
        std::vector<int> occ{0, 1, 2, 3}, virt{4, 5, 6, 7};
        auto all = all_excitations(occ, virt);
        std::shuffle(all.begin(), all.end(), rng);
        all.resize(6);
        std::vector<TrotterTerm> ts;
        for (auto& s : all) ts.push_back(expand_term(s, jw(n), 0.3));
        auto ordered = plan_cost(inter_order(ts), ts).total();
        auto given = plan_cost(inter_order(ts, {true, false}), ts).total();
        EXPECT_LE(ordered, given);
        auto p = inter_order(ts);
        Circuit c(n);
        append_plan(c, p, ts);
        EXPECT_LE(metrics(peephole_cancel(c)).two_qubit_count, ordered);
    }
}

TEST(Synth, PairCompressionTable) {
    using L = Letter;
    struct Row {
        L a0, a1;
        bool null;
        int sign;
        L out;
    };
    const Row rows[] = {
        {L::I, L::I, false, 1, L::I}, {L::I, L::X, true, 1, L::I},  {L::I, L::Y, true, 1, L::I},
        {L::I, L::Z, false, 1, L::Z}, {L::X, L::I, true, 1, L::I},  {L::X, L::X, false, 1, L::X},
        {L::X, L::Y, false, 1, L::Y}, {L::X, L::Z, true, 1, L::I},  {L::Y, L::I, true, 1, L::I},
        {L::Y, L::X, false, 1, L::Y}, {L::Y, L::Y, false, -1, L::X}, {L::Y, L::Z, true, 1, L::I},
        {L::Z, L::I, false, 1, L::Z}, {L::Z, L::X, true, 1, L::I},  {L::Z, L::Y, true, 1, L::I},
        {L::Z, L::Z, false, 1, L::I},
    };
    for (auto& r : rows) {
        auto pc = compress_pair(r.a0, r.a1);
        EXPECT_EQ(pc.null, r.null);
        if (!r.null) {
            EXPECT_EQ(pc.sign, r.sign);
            EXPECT_EQ(pc.letter, r.out);
        }
    }
}

TEST(Synth, BosonicCompressionLiftsToFullSpace) {
    const int n = 8;
    std::vector<OrbitalSequence> seqs{OrbitalSequence::dbl(5, 4, 1, 0), OrbitalSequence::dbl(7, 6, 3, 2),
                                      OrbitalSequence::single(4, 0), OrbitalSequence::dbl(7, 4, 3, 0)};
    std::vector<double> th{0.3, -0.5, 0.2, 0.1};
    uint64_t occ = 0xF;
    auto br = bosonic_reduce(seqs, th, n, occ);
    EXPECT_EQ(br.reduced, (std::vector<int>{0, 1}));
    EXPECT_EQ(br.kept, (std::vector<int>{2, 3}));
    EXPECT_EQ(br.pairs, (std::vector<int>{0, 1, 2, 3}));
    EXPECT_LE(br.restoration_cnots, n / 2);
    for (size_t k = 0; k < br.compressed.size(); ++k) {
        const auto& ct = br.compressed[k];
        ASSERT_EQ(ct.strings.size(), 2u);
        for (auto& s : ct.strings) EXPECT_EQ(s.weight(), 2);
        auto r = intra_order(ct);
        ASSERT_TRUE(r.eligible);

        // compress, run the compressed term, restore; compare on the pair-symmetric subspace
        Circuit c(n);
        for (int p : br.pairs) c.add(cnot(2 * p, 2 * p + 1));
        append_blocks(c, chosen_blocks(ct, r.minima.front()));
        for (int p : br.pairs) c.add(cnot(2 * p, 2 * p + 1));
        Mat U = unitary(c);
        Mat ref = (th[br.reduced[k]] * occupation_generator(n, seqs[br.reduced[k]])).exp();
        for (uint64_t x = 0; x < 256; ++x) {
            bool sym = true;
            for (int p = 0; p < 4; ++p) sym = sym && ((x >> 2 * p) & 1) == ((x >> (2 * p + 1)) & 1);
            if (!sym) continue;
            EXPECT_LT((U.col(x) - ref.col(x)).cwiseAbs().maxCoeff(), 1e-10) << "term " << k << " col " << x;
        }
    }
    // An open-shell pair blocks compression.
    auto open = bosonic_reduce(seqs, th, n, 0b0111);
    EXPECT_EQ(open.reduced, (std::vector<int>{0}));
}

TEST(Synth, FullAnsatzMatchesJordanWignerReference) {
    std::mt19937_64 rng(9);
    for (int n : {4, 5}) {
        std::vector<int> occ{0, 1}, virt;
        for (int p = 2; p < n; ++p) virt.push_back(p);
        auto seqs = all_excitations(occ, virt, false);
        std::vector<double> th;
        for (size_t i = 0; i < seqs.size(); ++i) th.push_back(0.1 * (1 + i % 5));
        SynthOptions opt;
        opt.inter = false;
        auto ref = compile_ansatz(seqs, th, jw(n), 0b11, opt);
        Mat UJ = unitary(ref.circuit);
        for (int trial = 0; trial < 3; ++trial) {
            auto spec = random_spec(n, rng);
            auto res = compile_ansatz(seqs, th, spec, 0b11, opt);
            Mat B = unitary(basis_prefix_circuit(spec));
            Mat lhs = B.adjoint() * unitary(res.circuit);
            EXPECT_TRUE(equal_up_to_phase(lhs, UJ, 1e-10)) << "n=" << n << " trial " << trial;
        }
    }
}

TEST(Synth, HeuristicsNeverRegressOnSmallSets) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 4; ++trial) {
        const int n = 8;
        auto all = all_excitations({0, 1, 2, 3}, {4, 5, 6, 7});
        std::shuffle(all.begin(), all.end(), rng);
        all.resize(5);
        std::vector<double> th(all.size(), 0.25);
        SynthOptions off;
        off.intra = off.inter = false;
        SynthOptions on;
        on.relabel = on.bosonic = true;
        int base = compile_ansatz(all, th, jw(n), 0xF, off).two_qubit_count;
        auto opt = compile_ansatz(all, th, jw(n), 0xF, on);
        EXPECT_LE(opt.two_qubit_count, base);
        EXPECT_LE(opt.two_qubit_count, opt.model_cost);
    }
}
