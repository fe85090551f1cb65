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
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fermiopt/circuit.hpp"
#include "fermiopt/transform.hpp"

namespace fermiopt {

// ---------------------------------------------------------------- product formulas

struct PFConfig {
    int order = 1;
    int r = 1;
    void validate() const {
        if (r < 1) throw std::invalid_argument("repetition count must be at least 1");
        if (order != 1 && (order < 2 || order % 2 != 0))
            throw std::invalid_argument("product-formula order must be 1 or a positive even number");
    }
};

inline double pf_coefficient(int k) { return 1.0 / (4.0 - std::pow(4.0, 1.0 / (2 * k - 1))); }

namespace detail {

inline void pf_scales(int order, double lambda, int L, std::vector<std::pair<int, double>>& out) {
    if (order == 1) {
        for (int j = 0; j < L; ++j) out.push_back({j, lambda});
        return;
    }
    if (order == 2) {
        for (int j = 0; j < L; ++j) out.push_back({j, lambda / 2});
        for (int j = L - 1; j >= 0; --j) out.push_back({j, lambda / 2});
        return;
    }
    const double p = pf_coefficient(order / 2);
    pf_scales(order - 2, p * lambda, L, out);
    pf_scales(order - 2, p * lambda, L, out);
    pf_scales(order - 2, (1 - 4 * p) * lambda, L, out);
    pf_scales(order - 2, p * lambda, L, out);
    pf_scales(order - 2, p * lambda, L, out);
}

}  // namespace detail

// Flattened [S_order(1/r)]^r with each angle scaled.
template <class T>
std::vector<std::pair<T, double>> pf_sequence(const std::vector<std::pair<T, double>>& terms, const PFConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<int, double>> one;
    detail::pf_scales(cfg.order, 1.0 / cfg.r, static_cast<int>(terms.size()), one);
    std::vector<std::pair<T, double>> out;
    out.reserve(one.size() * cfg.r);
    for (int rep = 0; rep < cfg.r; ++rep)
        for (auto [j, s] : one) out.push_back({terms[j].first, terms[j].second * s});
    return out;
}

// ---------------------------------------------------------------- Trotter terms

struct IneligibleTarget : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// exp(theta (T - T^dagger)) as a product of exp(-i angle/2 sigma) over commuting strings.
struct TrotterTerm {
    OrbitalSequence source;
    int n = 0;
    std::vector<PauliString> strings;  // unit coefficients, canonical order
    std::vector<double> angles;
    uint64_t labels = 0;    // qubits named by the excitation
    uint64_t eligible = 0;  // labels carrying a non-identity letter in every string
    bool compressed = false;
};

inline uint64_t common_support(const std::vector<PauliString>& v) {
    if (v.empty()) return 0;
    uint64_t m = ~uint64_t{0};
    for (auto& s : v) m &= s.support();
    return m;
}

// Anti-Hermitian g = i sum c_k sigma_k gives exp(theta g); Hermitian g = sum h_k sigma_k
// gives exp(-i theta/2 g).
enum class TermForm { AntiHermitian, Hermitian };

inline TrotterTerm term_from_generator(const PauliSum& g, double theta, uint64_t labels,
                                       TermForm form = TermForm::AntiHermitian) {
    TrotterTerm t;
    t.n = g.num_qubits();
    for (auto& p : g.terms()) {
        bool herm = form == TermForm::Hermitian;
        if (std::abs(herm ? p.coeff.imag() : p.coeff.real()) > 1e-12)
            throw ContractViolation(herm ? "generator is not Hermitian" : "generator is not anti-Hermitian");
        PauliString s = p;
        s.coeff = 1.0;
        t.strings.push_back(s);
        t.angles.push_back(herm ? theta * p.coeff.real() : -2.0 * theta * p.coeff.imag());
    }
    t.labels = labels;
    t.eligible = labels & common_support(t.strings);
    return t;
}

// T - T^dagger, or T + T^dagger for the Hermitian form.
inline PauliSum excitation_generator(const OrbitalSequence& seq, const TransformSpec& spec,
                                     TermForm form = TermForm::AntiHermitian) {
    FermionOperator op{spec.n(), {}};
    op.add(1.0, seq.ops());
    double sign = form == TermForm::Hermitian ? 1.0 : -1.0;
    for (auto& t : op.adjoint().terms) op.terms.push_back({sign * t.coeff, t.ops});
    return map_operator(op, spec);
}

inline TrotterTerm expand_term(const OrbitalSequence& seq, const TransformSpec& spec, double theta,
                               TermForm form = TermForm::AntiHermitian) {
    uint64_t labels = 0;
    for (int p : seq.idx) {
        if (p < 0 || p >= spec.n()) throw DimensionError("excitation " + seq.id() + " exceeds the register");
        labels |= uint64_t{1} << p;
    }
    auto t = term_from_generator(excitation_generator(seq, spec, form), theta, labels, form);
    t.source = seq;
    return t;
}

// ---------------------------------------------------------------- single-string synthesis

inline void append_pauli_exp(Circuit& c, const PauliString& s, double theta, int t) {
    using K = GateKind;
    if (t < 0 || t >= s.n || s.get(t) == Letter::I)
        throw IneligibleTarget("target " + std::to_string(t) + " carries identity in " + s.letters());
    for (int q = 0; q < s.n; ++q) {
        Letter l = s.get(q);
        if (l == Letter::X) c.add(g1(K::H, q));
        if (l == Letter::Y) c.add(g1(K::Sdg, q)).add(g1(K::H, q));
    }
    for (int q = 0; q < s.n; ++q)
        if (q != t && s.get(q) != Letter::I) c.add(cnot(q, t));
    c.add(rz(t, theta));
    for (int q = s.n - 1; q >= 0; --q)
        if (q != t && s.get(q) != Letter::I) c.add(cnot(q, t));
    for (int q = 0; q < s.n; ++q) {
        Letter l = s.get(q);
        if (l == Letter::X) c.add(g1(K::H, q));
        if (l == Letter::Y) c.add(g1(K::H, q)).add(g1(K::S, q));
    }
}

inline Circuit synth_pauli_exp(const PauliString& s, double theta, int t) {
    Circuit c(s.n);
    append_pauli_exp(c, s, theta, t);
    return c;
}

// ---------------------------------------------------------------- cost model

struct Reduction {
    int two = 0;  // controls whose CNOT pair cancels entirely
    int one = 0;  // controls saving a single CNOT
    int total() const { return 2 * two + one; }
};

// Savings at the boundary between adjacent strings sharing target t. Both target
// letters must lie on the same side of the X/Y versus Z split for the ladders to meet.
inline Reduction boundary_reduction(const PauliString& a, const PauliString& b, int t) {
    Letter la = a.get(t), lb = b.get(t);
    auto xy = [](Letter l) { return l == Letter::X || l == Letter::Y; };
    Reduction r;
    if (!((xy(la) && xy(lb)) || (la == Letter::Z && lb == Letter::Z))) return r;
    uint64_t both = a.support() & b.support() & ~(uint64_t{1} << t);
    for (; both; both &= both - 1) {
        int q = std::countr_zero(both);
        (a.get(q) == b.get(q) ? r.two : r.one)++;
    }
    return r;
}

struct CostBreakdown {
    int target = -1;
    std::vector<int> order;
    std::vector<int> N;     // non-identity letters per string, in order
    std::vector<int> m, n;  // per adjacent pair
    int total = 0;
};

inline CostBreakdown cost_breakdown(const TrotterTerm& term, const std::vector<int>& order, int t) {
    CostBreakdown cb;
    cb.target = t;
    cb.order = order;
    for (int j : order) {
        const auto& s = term.strings.at(j);
        if (s.get(t) == Letter::I) throw IneligibleTarget("target " + std::to_string(t) + " is not eligible");
        cb.N.push_back(s.weight());
        cb.total += 2 * (s.weight() - 1);
    }
    for (size_t j = 0; j + 1 < order.size(); ++j) {
        auto r = boundary_reduction(term.strings[order[j]], term.strings[order[j + 1]], t);
        cb.m.push_back(r.two);
        cb.n.push_back(r.one);
        cb.total -= r.total();
    }
    return cb;
}

// ---------------------------------------------------------------- intra-term ordering

struct IntraOption {
    std::array<uint8_t, 8> perm{};
    uint8_t len = 0;
    int target = -1;
    std::vector<int> order() const { return std::vector<int>(perm.begin(), perm.begin() + len); }
};

struct IntraResult {
    bool eligible = false;
    int cost = 0;
    uint64_t optimal_targets = 0;
    std::vector<IntraOption> minima;  // by target, then lexicographic ordering

    const IntraOption* first_for(int t) const {
        for (auto& o : minima)
            if (o.target == t) return &o;
        return nullptr;
    }
};

namespace detail {

inline std::string term_signature(const TrotterTerm& term) {
    std::string key = std::to_string(term.eligible) + "#";
    for (auto& s : term.strings) key += s.letters() + "|";
    return key;
}

inline int base_cost(const TrotterTerm& term) {
    int b = 0;
    for (auto& s : term.strings) b += 2 * (s.weight() - 1);
    return b;
}

inline std::vector<std::vector<int>> reduction_table(const TrotterTerm& term, int t) {
    const int L = static_cast<int>(term.strings.size());
    std::vector<std::vector<int>> red(L, std::vector<int>(L, 0));
    for (int a = 0; a < L; ++a)
        for (int b = 0; b < L; ++b)
            if (a != b) red[a][b] = boundary_reduction(term.strings[a], term.strings[b], t).total();
    return red;
}

}  // namespace detail

// Exhaustive search over orderings and eligible targets; returns every minimum.
inline IntraResult intra_order(const TrotterTerm& term) {
    static thread_local std::unordered_map<std::string, IntraResult> memo;
    const int L = static_cast<int>(term.strings.size());
    if (L > 8) throw std::invalid_argument("intra ordering supports at most 8 strings");
    IntraResult res;
    if (!term.eligible || L == 0) return res;
    auto key = detail::term_signature(term);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    res.eligible = true;
    const int base = detail::base_cost(term);
    int best = std::numeric_limits<int>::max();
    for (uint64_t e = term.eligible; e; e &= e - 1) {
        int t = std::countr_zero(e);
        auto red = detail::reduction_table(term, t);
        std::array<uint8_t, 8> p{};
        for (int i = 0; i < L; ++i) p[i] = static_cast<uint8_t>(i);
        do {
            int s = 0;
            for (int i = 0; i + 1 < L; ++i) s += red[p[i]][p[i + 1]];
            int cost = base - s;
            if (cost < best) {
                best = cost;
                res.minima.clear();
            }
            if (cost == best) res.minima.push_back({p, static_cast<uint8_t>(L), t});
        } while (std::next_permutation(p.begin(), p.begin() + L));
    }
    res.cost = best;
    for (auto& o : res.minima) res.optimal_targets |= uint64_t{1} << o.target;
    memo.emplace(std::move(key), res);
    return res;
}

// Minimum only, by dynamic programming over subsets.
inline int intra_cost(const TrotterTerm& term) {
    static thread_local std::unordered_map<std::string, int> memo;
    const int L = static_cast<int>(term.strings.size());
    if (!term.eligible) throw IneligibleTarget("term has no eligible target");
    auto key = detail::term_signature(term);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    int best_red = 0;
    for (uint64_t e = term.eligible; e; e &= e - 1) {
        auto red = detail::reduction_table(term, std::countr_zero(e));
        const int full = 1 << L;
        std::vector<int> dp(static_cast<size_t>(full) * L, -1);
        for (int j = 0; j < L; ++j) dp[(size_t{1} << j) * L + j] = 0;
        for (int mask = 1; mask < full; ++mask)
            for (int j = 0; j < L; ++j) {
                int v = dp[static_cast<size_t>(mask) * L + j];
                if (v < 0) continue;
                for (int k = 0; k < L; ++k) {
                    if (mask >> k & 1) continue;
                    int nm = mask | (1 << k);
                    int& d = dp[static_cast<size_t>(nm) * L + k];
                    d = std::max(d, v + red[j][k]);
                }
            }
        for (int j = 0; j < L; ++j) best_red = std::max(best_red, dp[static_cast<size_t>(full - 1) * L + j]);
    }
    int cost = detail::base_cost(term) - best_red;
    memo.emplace(std::move(key), cost);
    return cost;
}

// ---------------------------------------------------------------- blocks and boundaries

struct Block {
    PauliString s;
    double angle = 0.0;
    int target = -1;
};

inline void append_blocks(Circuit& c, const std::vector<Block>& bs) {
    for (auto& b : bs) append_pauli_exp(c, b.s, b.angle, b.target);
}

inline int naive_cnots(const std::vector<Block>& bs) {
    int k = 0;
    for (auto& b : bs) k += 2 * (b.s.weight() - 1);
    return k;
}

inline int realized_cnots(const std::vector<Block>& bs, int n) {
    Circuit c(n);
    append_blocks(c, bs);
    return metrics(peephole_cancel(c)).two_qubit_count;
}

// CNOTs removed by the optimizer when block b directly follows block a.
inline int boundary_savings(const PauliString& a, int ta, const PauliString& b, int tb) {
    static thread_local std::unordered_map<std::string, int> memo;
    std::string key = a.letters() + ":" + std::to_string(ta) + "|" + b.letters() + ":" + std::to_string(tb);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::vector<Block> bs{{a, 0.3, ta}, {b, 0.7, tb}};
    int s = naive_cnots(bs) - realized_cnots(bs, a.n);
    memo.emplace(std::move(key), s);
    return s;
}

// Strings with no common eligible target each take their own highest label, or
// their highest non-identity qubit.
inline std::vector<Block> fallback_blocks(const TrotterTerm& term) {
    std::vector<Block> bs;
    for (size_t j = 0; j < term.strings.size(); ++j) {
        const auto& s = term.strings[j];
        uint64_t pick = s.support() & term.labels;
        if (!pick) pick = s.support();
        if (!pick) continue;  // identity contributes a global phase only
        bs.push_back({s, term.angles[j], 63 - std::countl_zero(pick)});
    }
    return bs;
}

// ---------------------------------------------------------------- inter-term ordering

struct PlanItem {
    int term = -1;
    int target = -1;
    std::vector<int> order;  // string indices in circuit order
    bool fallback = false;
};

struct PlanClass {
    int target = -1;
    std::vector<int> terms;
};

struct Plan {
    std::vector<PlanItem> items;
    std::vector<PlanClass> classes;
    std::vector<int> excluded;
};

inline std::vector<Block> item_blocks(const PlanItem& it, const std::vector<TrotterTerm>& terms) {
    const auto& term = terms[it.term];
    if (it.fallback) return fallback_blocks(term);
    std::vector<Block> bs;
    for (int j : it.order) bs.push_back({term.strings[j], term.angles[j], it.target});
    return bs;
}

struct PlanOptions {
    bool intra = true;
    bool inter = true;
};

namespace detail {

inline std::vector<int> identity_order(size_t L) {
    std::vector<int> v(L);
    for (size_t i = 0; i < L; ++i) v[i] = static_cast<int>(i);
    return v;
}

// Targets a term may use and the string ordering it brings for each.
struct TermChoices {
    uint64_t targets = 0;
    std::vector<int> order_for(const TrotterTerm& term, const IntraResult* intra, int t) const {
        if (intra) return intra->first_for(t)->order();
        return identity_order(term.strings.size());
    }
};

inline int item_cost(const PlanItem& it, const std::vector<TrotterTerm>& terms) {
    if (it.fallback) return realized_cnots(fallback_blocks(terms[it.term]), terms[it.term].n);
    return cost_breakdown(terms[it.term], it.order, it.target).total;
}

}  // namespace detail

// Groups terms by their most frequent eligible target and greedily concatenates
// each group so that neighbouring blocks share as many cancellations as possible.
inline Plan inter_order(const std::vector<TrotterTerm>& terms, const PlanOptions& opt = {}) {
    Plan plan;
    const int T = static_cast<int>(terms.size());
    std::vector<std::optional<IntraResult>> intra(T);
    std::vector<uint64_t> targets(T, 0);
    for (int i = 0; i < T; ++i) {
        if (!terms[i].eligible) continue;
        if (opt.intra) {
            intra[i] = intra_order(terms[i]);
            targets[i] = intra[i]->optimal_targets;
        } else {
            targets[i] = terms[i].eligible;
        }
    }
    auto make_item = [&](int i, int t) {
        PlanItem it;
        it.term = i;
        it.target = t;
        it.order = opt.intra ? intra[i]->first_for(t)->order() : detail::identity_order(terms[i].strings.size());
        return it;
    };
    if (!opt.inter) {
        for (int i = 0; i < T; ++i) {
            if (!targets[i]) {
                plan.items.push_back({i, -1, {}, true});
                plan.excluded.push_back(i);
                continue;
            }
            plan.items.push_back(make_item(i, std::countr_zero(targets[i])));
        }
        return plan;
    }
    std::vector<int> remaining;
    for (int i = 0; i < T; ++i) {
        if (targets[i]) remaining.push_back(i);
        else plan.excluded.push_back(i);
    }
    while (!remaining.empty()) {
        std::array<int, 64> freq{};
        for (int i : remaining)
            for (uint64_t e = targets[i]; e; e &= e - 1) ++freq[std::countr_zero(e)];
        int p = static_cast<int>(std::max_element(freq.begin(), freq.end()) - freq.begin());
        PlanClass cls;
        cls.target = p;
        std::vector<int> rest;
        for (int i : remaining) ((targets[i] >> p & 1) ? cls.terms : rest).push_back(i);
        remaining.swap(rest);

        // Greedy chain. Each element is (term, reversed).
        std::vector<PlanItem> base;
        for (int i : cls.terms) base.push_back(make_item(i, p));
        auto first_s = [&](size_t k, bool rev) -> const PauliString& {
            auto& o = base[k].order;
            return terms[base[k].term].strings[rev ? o.back() : o.front()];
        };
        auto last_s = [&](size_t k, bool rev) -> const PauliString& { return first_s(k, !rev); };
        auto sav = [&](size_t a, bool ra, size_t b, bool rb) {
            return boundary_savings(last_s(a, ra), p, first_s(b, rb), p);
        };
        std::deque<std::pair<size_t, bool>> chain;
        std::vector<bool> used(base.size(), false);
        if (base.size() == 1) {
            chain.push_back({0, false});
            used[0] = true;
        } else {
            int best = -1;
            std::pair<size_t, bool> sa, sb;
            for (size_t a = 0; a < base.size(); ++a)
                for (size_t b = 0; b < base.size(); ++b) {
                    if (a == b) continue;
                    for (int ra = 0; ra < 2; ++ra)
                        for (int rb = 0; rb < 2; ++rb) {
                            int s = sav(a, ra, b, rb);
                            if (s > best) {
                                best = s;
                                sa = {a, ra};
                                sb = {b, rb};
                            }
                        }
                }
            chain.push_back(sa);
            chain.push_back(sb);
            used[sa.first] = used[sb.first] = true;
        }
        for (size_t added = chain.size(); added < base.size(); ++added) {
            int best = -1;
            size_t pick = 0;
            bool pick_rev = false, pick_prefix = false;
            for (size_t e = 0; e < base.size(); ++e) {
                if (used[e]) continue;
                for (int c = 0; c < 4; ++c) {
                    bool prefix = c >= 2, rev = c % 2;
                    int s = prefix ? sav(e, rev, chain.front().first, chain.front().second)
                                   : sav(chain.back().first, chain.back().second, e, rev);
                    if (s > best) {
                        best = s;
                        pick = e;
                        pick_rev = rev;
                        pick_prefix = prefix;
                    }
                }
            }
            used[pick] = true;
            if (pick_prefix) chain.push_front({pick, pick_rev});
            else chain.push_back({pick, pick_rev});
        }
        cls.terms.clear();
        for (auto [k, rev] : chain) {
            PlanItem it = base[k];
            if (rev) std::reverse(it.order.begin(), it.order.end());
            cls.terms.push_back(it.term);
            plan.items.push_back(std::move(it));
        }
        plan.classes.push_back(std::move(cls));
    }
    for (int i : plan.excluded) plan.items.push_back({i, -1, {}, true});
    return plan;
}

struct PlanCost {
    int term_sum = 0;
    int boundary = 0;
    int total() const { return term_sum - boundary; }
};

inline PlanCost plan_cost(const Plan& plan, const std::vector<TrotterTerm>& terms) {
    PlanCost pc;
    std::vector<Block> prev;
    for (auto& it : plan.items) {
        pc.term_sum += detail::item_cost(it, terms);
        auto bs = item_blocks(it, terms);
        if (!prev.empty() && !bs.empty())
            pc.boundary += boundary_savings(prev.back().s, prev.back().target, bs.front().s, bs.front().target);
        if (!bs.empty()) prev = std::move(bs);
    }
    return pc;
}

inline void append_plan(Circuit& c, const Plan& plan, const std::vector<TrotterTerm>& terms) {
    for (auto& it : plan.items) append_blocks(c, item_blocks(it, terms));
}

// ---------------------------------------------------------------- level relabeling

// Mode p moves to spin orbital 2 pos[p/2] + p%2.
inline OrbitalSequence relabel(const OrbitalSequence& s, const std::vector<int>& pos) {
    OrbitalSequence r = s;
    for (auto& p : r.idx) p = 2 * pos.at(p / 2) + p % 2;
    return r;
}

inline uint64_t relabel_mask(uint64_t modes, const std::vector<int>& pos) {
    uint64_t out = 0;
    for (; modes; modes &= modes - 1) {
        int p = std::countr_zero(modes);
        out |= uint64_t{1} << (2 * pos.at(p / 2) + p % 2);
    }
    return out;
}

// Sets of k disjoint spatial-orbital transpositions (l < m), each set listed once.
inline std::vector<std::vector<std::pair<int, int>>> kswap_candidates(int n_spatial, int k) {
    if (k < 1) throw std::invalid_argument("swap arity must be at least 1");
    std::vector<std::pair<int, int>> pairs;
    for (int l = 0; l + 1 < n_spatial; ++l)
        for (int m = l + 1; m < n_spatial; ++m) pairs.push_back({l, m});
    std::vector<std::vector<std::pair<int, int>>> out;
    std::vector<std::pair<int, int>> cur;
    auto rec = [&](auto&& self, size_t from, uint64_t used) -> void {
        if (static_cast<int>(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (size_t i = from; i < pairs.size(); ++i) {
            auto [l, m] = pairs[i];
            if ((used >> l & 1) || (used >> m & 1)) continue;
            cur.push_back(pairs[i]);
            self(self, i + 1, used | (uint64_t{1} << l) | (uint64_t{1} << m));
            cur.pop_back();
        }
    };
    rec(rec, 0, 0);
    return out;
}

struct LabelingState {
    std::vector<int> labels;  // labels[slot] = spatial orbital placed on qubit pair slot
    int cost = 0;
    int rounds = 0;
    std::vector<int> positions() const {
        std::vector<int> pos(labels.size());
        for (size_t q = 0; q < labels.size(); ++q) pos[labels[q]] = static_cast<int>(q);
        return pos;
    }
};

inline int term_cost(const TrotterTerm& t) {
    return t.eligible ? intra_cost(t) : realized_cnots(fallback_blocks(t), t.n);
}

inline int labeling_cost(const std::vector<OrbitalSequence>& seqs, const TransformSpec& spec, const std::vector<int>& pos) {
    int c = 0;
    for (auto& s : seqs) c += term_cost(expand_term(relabel(s, pos), spec, 1.0));
    return c;
}

// Greedy descent over k-swaps; each adopted round strictly lowers the cost.
inline LabelingState relabel_levels(const std::vector<OrbitalSequence>& seqs, const TransformSpec& spec, int k = 2) {
    const int n = spec.n();
    if (n % 2) throw ValidationError("relabeling needs an even number of spin orbitals");
    const int ns = n / 2;
    LabelingState st;
    st.labels.resize(ns);
    for (int i = 0; i < ns; ++i) st.labels[i] = i;
    st.cost = labeling_cost(seqs, spec, st.positions());
    auto cands = kswap_candidates(ns, k);
    for (;;) {
        ++st.rounds;
        LabelingState best = st;
        for (auto& c : cands) {
            LabelingState trial = st;
            for (auto [l, m] : c) std::swap(trial.labels[l], trial.labels[m]);
            trial.cost = labeling_cost(seqs, spec, trial.positions());
            if (trial.cost < best.cost) best = trial;
        }
        if (best.cost >= st.cost) break;
        st.labels = best.labels;
        st.cost = best.cost;
    }
    return st;
}

// ---------------------------------------------------------------- bosonic compression

// (m, l) when s moves the full pair on spatial orbital l to spatial orbital m.
inline std::optional<std::pair<int, int>> bosonic_pairing(const OrbitalSequence& s) {
    if (s.kind != OrbitalSequence::Double) return std::nullopt;
    auto c = s.creators(), a = s.annihilators();
    auto pair_of = [](std::vector<int> v) -> int {
        std::sort(v.begin(), v.end());
        return (v[0] % 2 == 0 && v[1] == v[0] + 1) ? v[0] / 2 : -1;
    };
    int m = pair_of(c), l = pair_of(a);
    if (m < 0 || l < 0 || m == l) return std::nullopt;
    return std::make_pair(m, l);
}

// Restricts every string to the symmetric subspace of each compressed pair; the
// pair lives on its even qubit and the odd partner becomes identity.
inline TrotterTerm compress_term(const TrotterTerm& unit, const std::vector<int>& pairs, double theta) {
    PauliSum g(unit.n);
    for (size_t j = 0; j < unit.strings.size(); ++j) {
        PauliString s = unit.strings[j];
        int sign = 1;
        bool null = false;
        for (int k : pairs) {
            auto pc = compress_pair(s.get(2 * k), s.get(2 * k + 1));
            if (pc.null) {
                null = true;
                break;
            }
            sign *= pc.sign;
            s.set(2 * k, pc.letter);
            s.set(2 * k + 1, Letter::I);
        }
        if (null) continue;
        // unit angles are -2 c_k, so the generator coefficient is i c_k
        s.coeff = cplx(0, -unit.angles[j] / 2 * sign);
        g.add(s);
    }
    uint64_t labels = 0;
    for (uint64_t e = unit.labels; e; e &= e - 1) {
        int p = std::countr_zero(e);
        labels |= uint64_t{1} << (p & ~1);
    }
    auto t = term_from_generator(g, theta, labels);
    t.source = unit.source;
    t.compressed = true;
    return t;
}

struct BosonicResult {
    std::vector<int> reduced;  // input indices handled in the compressed space
    std::vector<int> kept;     // input indices left to the regular pipeline
    std::vector<TrotterTerm> compressed;
    std::vector<int> pairs;  // compressed spatial orbitals, ascending
    int restoration_cnots = 0;
};

// Paired doubles between spatial orbitals whose initial occupation is symmetric.
inline BosonicResult bosonic_reduce(const std::vector<OrbitalSequence>& seqs, const std::vector<double>& thetas,
                                    int n_modes, uint64_t occupied) {
    BosonicResult br;
    auto symmetric = [&](int k) { return ((occupied >> (2 * k)) & 1) == ((occupied >> (2 * k + 1)) & 1); };
    std::set<int> pairs;
    for (size_t i = 0; i < seqs.size(); ++i) {
        auto pm = bosonic_pairing(seqs[i]);
        if (pm && symmetric(pm->first) && symmetric(pm->second)) {
            br.reduced.push_back(static_cast<int>(i));
            pairs.insert(pm->first);
            pairs.insert(pm->second);
        } else {
            br.kept.push_back(static_cast<int>(i));
        }
    }
    br.pairs.assign(pairs.begin(), pairs.end());
    auto spec = jw(n_modes);
    for (int i : br.reduced) {
        auto unit = expand_term(seqs[i], spec, 1.0);
        br.compressed.push_back(compress_term(unit, br.pairs, thetas.at(i)));
    }
    br.restoration_cnots = static_cast<int>(br.pairs.size());
    return br;
}

// ---------------------------------------------------------------- full ansatz

struct SynthOptions {
    bool relabel = false;
    bool intra = true;
    bool inter = true;
    bool bosonic = false;
    int k_swap = 2;
    bool realize = true;  // build the circuit and run the optimizer over it
};

struct CompileResult {
    std::vector<int> labels;
    int relabel_rounds = 0;
    std::vector<TrotterTerm> terms, bosonic_terms;
    Plan plan, bosonic_plan;
    std::vector<int> bosonic_pairs;
    int prefix_cnots = 0;
    int restoration_cnots = 0;
    int model_cost = 0;
    int two_qubit_count = 0;  // after the optimizer when realized, else model_cost
    Circuit circuit;
};

// Circuit order: compressed bosonic block (Jordan-Wigner), pair restoration,
// the basis prefix for beta, then the remaining terms in the beta basis.
inline CompileResult compile_ansatz(const std::vector<OrbitalSequence>& seqs, const std::vector<double>& thetas,
                                    const TransformSpec& spec, uint64_t occupied, const SynthOptions& opt = {}) {
    const int n = spec.n();
    if (thetas.size() != seqs.size()) throw DimensionError("one angle per excitation is required");
    CompileResult res;
    std::vector<OrbitalSequence> work = seqs;
    res.labels.resize(n / 2);
    for (int i = 0; i < n / 2; ++i) res.labels[i] = i;
    if (opt.relabel) {
        std::vector<OrbitalSequence> costed;
        for (auto& s : seqs)
            if (!(opt.bosonic && bosonic_pairing(s))) costed.push_back(s);
        auto st = relabel_levels(costed, spec, opt.k_swap);
        res.labels = st.labels;
        res.relabel_rounds = st.rounds;
        auto pos = st.positions();
        for (auto& s : work) s = relabel(s, pos);
        occupied = relabel_mask(occupied, pos);
    }
    std::vector<int> kept;
    if (opt.bosonic) {
        auto br = bosonic_reduce(work, thetas, n, occupied);
        res.bosonic_terms = br.compressed;
        res.bosonic_pairs = br.pairs;
        res.restoration_cnots = br.restoration_cnots;
        kept = br.kept;
    } else {
        for (size_t i = 0; i < work.size(); ++i) kept.push_back(static_cast<int>(i));
    }
    for (int i : kept) res.terms.push_back(expand_term(work[i], spec, thetas[i]));
    PlanOptions po{opt.intra, opt.inter};
    res.bosonic_plan = inter_order(res.bosonic_terms, po);
    res.plan = inter_order(res.terms, po);
    auto prefix = basis_prefix_circuit(spec);
    res.prefix_cnots = static_cast<int>(prefix.gates.size());
    res.model_cost = plan_cost(res.bosonic_plan, res.bosonic_terms).total() + res.restoration_cnots +
                     res.prefix_cnots + plan_cost(res.plan, res.terms).total();
    res.two_qubit_count = res.model_cost;
    if (opt.realize) {
        Circuit c(n);
        append_plan(c, res.bosonic_plan, res.bosonic_terms);
        for (int k : res.bosonic_pairs) c.add(cnot(2 * k, 2 * k + 1));
        c.append(prefix);
        append_plan(c, res.plan, res.terms);
        res.circuit = peephole_cancel(c);
        res.two_qubit_count = metrics(res.circuit).two_qubit_count;
    }
    return res;
}

// key=value header followed by one CSV row per planned term.
inline void write_plan_report(std::ostream& os, const CompileResult& r) {
    os << "two_qubit_count=" << r.two_qubit_count << "\n";
    os << "model_cost=" << r.model_cost << "\n";
    os << "prefix_cnots=" << r.prefix_cnots << "\n";
    os << "restoration_cnots=" << r.restoration_cnots << "\n";
    os << "relabel_rounds=" << r.relabel_rounds << "\n";
    os << "labels=";
    for (size_t i = 0; i < r.labels.size(); ++i) os << (i ? "," : "") << r.labels[i];
    os << "\n";
    os << "section,class_target,term,target,ordering,cost\n";
    auto rows = [&](const char* sec, const Plan& plan, const std::vector<TrotterTerm>& terms) {
        std::vector<int> cls_of(terms.size(), -1);
        for (auto& c : plan.classes)
            for (int t : c.terms) cls_of[t] = c.target;
        for (auto& it : plan.items) {
            os << sec << "," << cls_of[it.term] << ",\"" << terms[it.term].source.id() << "\"," << it.target << ",";
            for (size_t k = 0; k < it.order.size(); ++k) os << (k ? " " : "") << it.order[k];
            os << "," << detail::item_cost(it, terms) << "\n";
        }
    };
    rows("bosonic", r.bosonic_plan, r.bosonic_terms);
    rows("main", r.plan, r.terms);
}

}  // namespace fermiopt
