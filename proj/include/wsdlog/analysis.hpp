#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wsdlog/model.hpp"

namespace wsdlog {

/// Body-variable marking. A marked pair (rule index, variable) means every
/// body occurrence of that variable in that rule is marked.
struct Marking {
    std::set<std::pair<std::size_t, std::string>> marked;

    bool is_marked(std::size_t rule, const std::string& var) const {
        return marked.count({rule, var}) != 0;
    }

    friend bool operator==(const Marking&, const Marking&) = default;
};

/// Least fixpoint of the two-step marking procedure. Preliminary: mark body
/// variables missing from the head. Propagation: a marked body occurrence at
/// position pi marks, in every rule, the body variables that reach pi
/// through the head.
inline Marking mark_variables(const std::vector<Rule>& rules) {
    Marking marking;

    for (std::size_t i = 0; i < rules.size(); ++i) {
        const std::set<Term> head_vars = rules[i].head_variables();
        for (const Term& v : rules[i].body_variables())
            if (!head_vars.count(v)) marking.marked.emplace(i, v.name());
    }

    bool changed = true;
    while (changed) {
        changed = false;
        // Positions currently holding a marked body occurrence.
        std::set<Position> marked_positions;
        for (std::size_t i = 0; i < rules.size(); ++i)
            for (const Atom& a : rules[i].body)
                for (std::size_t k = 0; k < a.args.size(); ++k)
                    if (a.args[k].is_variable() && marking.is_marked(i, a.args[k].name()))
                        marked_positions.insert(Position{a.predicate, k});

        for (std::size_t i = 0; i < rules.size(); ++i) {
            const std::set<Term> body_vars = rules[i].body_variables();
            const Atom& head = rules[i].head;
            for (std::size_t k = 0; k < head.args.size(); ++k) {
                const Term& t = head.args[k];
                if (!t.is_variable() || !body_vars.count(t)) continue;
                if (!marked_positions.count(Position{head.predicate, k})) continue;
                if (marking.marked.emplace(i, t.name()).second) changed = true;
            }
        }
    }
    return marking;
}

struct DependencyGraph {
    std::set<Position> vertices;
    std::set<std::pair<Position, Position>> normal_edges;
    std::set<std::pair<Position, Position>> special_edges;
};

/// Positions are the vertices; for every rule and non-existential head
/// variable x at body position pi: a normal edge pi -> pi' for each head
/// occurrence of x, and a special edge pi -> pi'' for each existential head
/// position. `extra` declares positions of predicates outside the rules
/// (database or query predicates) so they exist in the rank map.
inline DependencyGraph build_dependency_graph(const std::vector<Rule>& rules,
                                              const Schema& extra = {}) {
    DependencyGraph g;
    for (const auto& [pred, arity] : schema_of(rules))
        for (std::size_t i = 0; i < arity; ++i) g.vertices.insert(Position{pred, i});
    for (const auto& [pred, arity] : extra)
        for (std::size_t i = 0; i < arity; ++i) g.vertices.insert(Position{pred, i});

    for (const Rule& rule : rules) {
        std::vector<Position> existential_positions;
        std::map<Term, std::vector<Position>> head_occurrences;
        for (std::size_t k = 0; k < rule.head.args.size(); ++k) {
            const Term& t = rule.head.args[k];
            if (!t.is_variable()) continue;
            Position pos{rule.head.predicate, k};
            if (rule.existential_vars.count(t))
                existential_positions.push_back(pos);
            else
                head_occurrences[t].push_back(pos);
        }
        for (const Atom& a : rule.body) {
            for (std::size_t k = 0; k < a.args.size(); ++k) {
                const Term& t = a.args[k];
                if (!t.is_variable()) continue;
                auto it = head_occurrences.find(t);
                if (it == head_occurrences.end()) continue;
                Position from{a.predicate, k};
                for (const Position& to : it->second) g.normal_edges.emplace(from, to);
                for (const Position& to : existential_positions) g.special_edges.emplace(from, to);
            }
        }
    }
    return g;
}

/// Rank of a position: maximum special-edge count over all finite or
/// infinite paths ending there; std::nullopt encodes infinity.
using Rank = std::optional<std::size_t>;

struct RankMap {
    std::map<Position, Rank> rank;

    bool is_finite(const Position& p) const {
        auto it = rank.find(p);
        return it != rank.end() && it->second.has_value();
    }

    std::set<Position> pi_f() const {
        std::set<Position> out;
        for (const auto& [pos, r] : rank)
            if (r.has_value()) out.insert(pos);
        return out;
    }

    std::set<Position> pi_inf() const {
        std::set<Position> out;
        for (const auto& [pos, r] : rank)
            if (!r.has_value()) out.insert(pos);
        return out;
    }
};

/// A position has infinite rank iff it is reachable from a strongly
/// connected component containing a special edge; otherwise its rank is the
/// longest special-edge count over the acyclic condensation.
inline RankMap compute_ranks(const DependencyGraph& g) {
    std::vector<Position> verts(g.vertices.begin(), g.vertices.end());
    std::map<Position, std::size_t> id;
    for (std::size_t i = 0; i < verts.size(); ++i) id[verts[i]] = i;
    const std::size_t n = verts.size();

    // weight 1 = special edge; parallel normal+special collapse to special.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
    {
        std::map<std::pair<std::size_t, std::size_t>, std::size_t> weight;
        for (const auto& [u, v] : g.normal_edges) weight[{id.at(u), id.at(v)}];
        for (const auto& [u, v] : g.special_edges) weight[{id.at(u), id.at(v)}] = 1;
        for (const auto& [edge, w] : weight) adj[edge.first].push_back({edge.second, w});
    }

    // Iterative Tarjan; components are finalized sinks-first.
    std::vector<std::size_t> comp(n, SIZE_MAX), low(n), disc(n, SIZE_MAX);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::size_t timer = 0, ncomp = 0;
    std::vector<std::size_t> comp_order;  // component ids in completion order

    struct Frame {
        std::size_t v;
        std::size_t edge = 0;
    };
    for (std::size_t root = 0; root < n; ++root) {
        if (disc[root] != SIZE_MAX) continue;
        std::vector<Frame> frames{{root}};
        disc[root] = low[root] = timer++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!frames.empty()) {
            Frame& f = frames.back();
            if (f.edge < adj[f.v].size()) {
                std::size_t w = adj[f.v][f.edge++].first;
                if (disc[w] == SIZE_MAX) {
                    disc[w] = low[w] = timer++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.push_back({w});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], disc[w]);
                }
            } else {
                if (low[f.v] == disc[f.v]) {
                    std::size_t c = ncomp++;
                    for (;;) {
                        std::size_t w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp[w] = c;
                        if (w == f.v) break;
                    }
                    comp_order.push_back(c);
                }
                std::size_t v = f.v;
                frames.pop_back();
                if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
            }
        }
    }

    std::vector<bool> comp_special(ncomp, false);
    for (const auto& [u, v] : g.special_edges)
        if (comp[id.at(u)] == comp[id.at(v)]) comp_special[comp[id.at(u)]] = true;

    // Condensation edges with max weight per component pair.
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> cedges;
    for (std::size_t u = 0; u < n; ++u)
        for (const auto& [v, w] : adj[u])
            if (comp[u] != comp[v]) {
                auto& slot = cedges[{comp[u], comp[v]}];
                slot = std::max(slot, w);
            }

    // Topological order of components = reverse completion order.
    std::vector<std::size_t> topo(comp_order.rbegin(), comp_order.rend());
    std::vector<std::size_t> topo_pos(ncomp);
    for (std::size_t i = 0; i < ncomp; ++i) topo_pos[topo[i]] = i;

    std::vector<bool> infinite(ncomp, false);
    std::vector<std::size_t> best(ncomp, 0);
    for (std::size_t c : topo) {
        if (comp_special[c]) infinite[c] = true;
        // relax outgoing condensation edges
        for (const auto& [edge, w] : cedges) {
            if (edge.first != c) continue;
            if (infinite[c])
                infinite[edge.second] = true;
            else
                best[edge.second] = std::max(best[edge.second], best[c] + w);
        }
    }

    RankMap out;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = comp[i];
        out.rank[verts[i]] = infinite[c] ? Rank{} : Rank{best[c]};
    }
    return out;
}

struct ClassReport {
    bool sticky = false;
    bool weakly_acyclic = false;
    bool weakly_sticky = false;
    bool zero_infinity = false;
};

namespace detail {

inline std::map<std::string, std::size_t> body_occurrence_counts(const Rule& rule) {
    std::map<std::string, std::size_t> counts;
    for (const Atom& a : rule.body)
        for (const Term& t : a.args)
            if (t.is_variable()) ++counts[t.name()];
    return counts;
}

}  // namespace detail

inline ClassReport classify(const std::vector<Rule>& rules, const Schema& extra = {}) {
    const Marking marking = mark_variables(rules);
    const RankMap ranks = compute_ranks(build_dependency_graph(rules, extra));

    ClassReport report;
    report.sticky = true;
    report.weakly_sticky = true;
    report.zero_infinity = true;

    report.weakly_acyclic =
        std::all_of(ranks.rank.begin(), ranks.rank.end(),
                    [](const auto& entry) { return entry.second.has_value(); });

    for (std::size_t i = 0; i < rules.size(); ++i) {
        const Rule& rule = rules[i];
        for (const auto& [var, count] : detail::body_occurrence_counts(rule)) {
            if (count < 2 || !marking.is_marked(i, var)) continue;
            report.sticky = false;
            bool finite_occurrence = false;
            for (const Atom& a : rule.body)
                for (std::size_t k = 0; k < a.args.size(); ++k)
                    if (a.args[k].is_variable() && a.args[k].name() == var &&
                        ranks.is_finite(Position{a.predicate, k}))
                        finite_occurrence = true;
            if (!finite_occurrence) report.weakly_sticky = false;
        }
        for (std::size_t k = 0; k < rule.head.args.size(); ++k) {
            const Term& t = rule.head.args[k];
            if (t.is_variable() && rule.existential_vars.count(t) &&
                ranks.is_finite(Position{rule.head.predicate, k}))
                report.zero_infinity = false;
        }
    }
    return report;
}

}  // namespace wsdlog
