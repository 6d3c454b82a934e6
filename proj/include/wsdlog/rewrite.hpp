#pragma once

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wsdlog/analysis.hpp"
#include "wsdlog/chase.hpp"
#include "wsdlog/errors.hpp"
#include "wsdlog/model.hpp"
#include "wsdlog/printer.hpp"
#include "wsdlog/transform.hpp"

namespace wsdlog {

/// A finite union of conjunctive queries, pairwise non-isomorphic, all with
/// the head signature of the query it rewrites.
struct UCQRewriting {
    std::string head_predicate;
    std::size_t arity = 0;
    std::vector<ConjunctiveQuery> disjuncts;  // canonical forms, sorted
};

namespace detail {

/// Canonical form modulo variable renaming and body-atom order. Answer
/// variables are renamed first (in head order), body variables by first
/// occurrence; among permutations of same-shape atoms the least
/// serialization wins. The serialized form doubles as the isomorphism key.
inline std::pair<ConjunctiveQuery, std::string> canonical_cq(const ConjunctiveQuery& q) {
    std::vector<Atom> atoms;
    {
        std::set<Atom> dedup(q.body.begin(), q.body.end());
        atoms.assign(dedup.begin(), dedup.end());
    }

    // Shape signature: predicate plus rigid terms, variables abstracted.
    auto signature = [](const Atom& a) {
        std::string sig = a.predicate;
        for (const Term& t : a.args) {
            sig.push_back('|');
            sig += t.is_variable() ? "*" : to_string(t);
        }
        return sig;
    };
    std::stable_sort(atoms.begin(), atoms.end(), [&](const Atom& a, const Atom& b) {
        return std::make_pair(signature(a), a) < std::make_pair(signature(b), b);
    });

    std::vector<std::pair<std::size_t, std::size_t>> groups;  // [begin, end)
    for (std::size_t i = 0; i < atoms.size();) {
        std::size_t j = i + 1;
        while (j < atoms.size() && signature(atoms[j]) == signature(atoms[i])) ++j;
        groups.push_back({i, j});
        i = j;
    }

    auto rename_and_serialize = [&](const std::vector<Atom>& ordered)
        -> std::pair<ConjunctiveQuery, std::string> {
        std::map<Term, Term> names;
        std::size_t next = 0;
        auto canon = [&](const Term& t) {
            if (!t.is_variable()) return t;
            auto [it, inserted] = names.try_emplace(t);
            if (inserted) it->second = Term::variable("V" + std::to_string(next++));
            return it->second;
        };
        ConjunctiveQuery out;
        out.head_predicate = q.head_predicate;
        for (const Term& t : q.answer_terms) out.answer_terms.push_back(canon(t));
        for (const Atom& a : ordered) {
            Atom na;
            na.predicate = a.predicate;
            for (const Term& t : a.args) na.args.push_back(canon(t));
            out.body.push_back(std::move(na));
        }
        return {out, to_string(out)};
    };

    // Permute only within same-signature groups, capped; beyond the cap the
    // sorted order alone is used (extra isomorphic duplicates are harmless).
    std::size_t variants = 1;
    for (const auto& [b, e] : groups) {
        std::size_t f = 1;
        for (std::size_t k = 2; k <= e - b; ++k) f *= k;
        if (variants > 5040 / std::max<std::size_t>(f, 1)) {
            variants = SIZE_MAX;
            break;
        }
        variants *= f;
    }

    std::optional<std::pair<ConjunctiveQuery, std::string>> best;
    if (variants == SIZE_MAX || variants <= 1) {
        best = rename_and_serialize(atoms);
    } else {
        std::vector<Atom> work = atoms;
        std::vector<std::size_t> group_of;
        std::function<void(std::size_t)> permute = [&](std::size_t g) {
            if (g == groups.size()) {
                auto cand = rename_and_serialize(work);
                if (!best || cand.second < best->second) best = std::move(cand);
                return;
            }
            auto [b, e] = groups[g];
            std::sort(work.begin() + b, work.begin() + e);
            do {
                permute(g + 1);
            } while (std::next_permutation(work.begin() + b, work.begin() + e));
        };
        permute(0);
    }
    return *best;
}

/// Union-find over terms for simultaneous unification.
class TermUnion {
public:
    Term find(const Term& t) {
        auto it = parent_.find(t);
        if (it == parent_.end()) return t;
        Term root = find(it->second);
        parent_[t] = root;
        return root;
    }

    bool unite(const Term& a, const Term& b) {
        Term ra = find(a), rb = find(b);
        if (ra == rb) return true;
        if (ra.is_rigid() && rb.is_rigid()) return false;  // two distinct rigid terms
        if (ra.is_rigid())
            parent_[rb] = ra;
        else
            parent_[ra] = rb;
        return true;
    }

    std::map<Term, std::vector<Term>> classes() {
        std::map<Term, std::vector<Term>> out;
        for (const auto& [t, _] : parent_) out[find(t)].push_back(t), (void)_;
        for (auto& [root, members] : out)
            if (std::find(members.begin(), members.end(), root) == members.end())
                members.push_back(root);
        return out;
    }

private:
    std::map<Term, Term> parent_;
};

}  // namespace detail

/// All one-step rewritings of `q` with `rule`: unify a nonempty subset of
/// body atoms with the (freshly renamed) rule head, subject to the standard
/// restriction that a class touching an existential variable contains only
/// query variables that occur nowhere else in the query and are not answer
/// variables; replace the unified atoms by the rule body. Results are
/// canonical forms.
inline std::vector<ConjunctiveQuery> rewrite_step(const ConjunctiveQuery& q, const Rule& rule) {
    std::vector<ConjunctiveQuery> out;
    if (rule.head.arity() > 0 && q.body.empty()) return out;

    // Rename the rule apart from the query.
    std::set<std::string> taken;
    for (const Term& v : q.variables()) taken.insert(v.name());
    detail::NamePool pool(std::move(taken));
    Substitution rename;
    for (const Term& v : rule.body_variables()) rename.bind(v, Term::variable(pool.fresh(v.name(), 0)));
    for (const Term& v : rule.existential_vars) rename.bind(v, Term::variable(pool.fresh(v.name(), 0)));
    const Rule fresh = apply(rename, rule);

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < q.body.size(); ++i)
        if (q.body[i].predicate == fresh.head.predicate &&
            q.body[i].arity() == fresh.head.arity())
            candidates.push_back(i);
    if (candidates.empty()) return out;
    if (candidates.size() > 16) throw InternalError("query too wide for piece enumeration");

    std::map<Term, std::vector<std::size_t>> occurrences;  // query var -> body atoms
    for (std::size_t i = 0; i < q.body.size(); ++i)
        for (const Term& t : q.body[i].args)
            if (t.is_variable()) occurrences[t].push_back(i);
    std::set<Term> answer_vars;
    for (const Term& t : q.answer_terms)
        if (t.is_variable()) answer_vars.insert(t);

    const std::set<Term> rule_universals = fresh.body_variables();

    for (std::size_t mask = 1; mask < (1u << candidates.size()); ++mask) {
        std::set<std::size_t> piece;
        for (std::size_t b = 0; b < candidates.size(); ++b)
            if (mask & (1u << b)) piece.insert(candidates[b]);

        detail::TermUnion uf;
        bool ok = true;
        for (std::size_t idx : piece)
            for (std::size_t k = 0; k < fresh.head.args.size() && ok; ++k)
                ok = uf.unite(q.body[idx].args[k], fresh.head.args[k]);
        if (!ok) continue;

        // Validate classes that touch an existential variable.
        auto classes = uf.classes();
        for (const auto& [root, members] : classes) {
            std::size_t existentials = 0;
            bool rigid = false, universal = false, bad_query_var = false;
            for (const Term& m : members) {
                if (fresh.existential_vars.count(m)) {
                    ++existentials;
                } else if (m.is_rigid()) {
                    rigid = true;
                } else if (rule_universals.count(m)) {
                    universal = true;
                } else {
                    // query variable
                    if (answer_vars.count(m)) bad_query_var = true;
                    for (std::size_t at : occurrences[m])
                        if (!piece.count(at)) bad_query_var = true;
                }
            }
            if (existentials == 0) continue;
            if (existentials > 1 || rigid || universal || bad_query_var) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;

        // Representatives: a rigid term if present, else the least variable,
        // answer variables preferred so heads stay readable.
        std::map<Term, Term> rep;
        for (const auto& [root, members] : classes) {
            Term chosen = root;
            bool have_rigid = false, have_answer = false;
            for (const Term& m : members) {
                if (m.is_rigid()) {
                    chosen = m;
                    have_rigid = true;
                    break;
                }
            }
            if (!have_rigid) {
                for (const Term& m : members) {
                    bool is_answer = answer_vars.count(m) != 0;
                    if (is_answer && !have_answer) {
                        chosen = m;
                        have_answer = true;
                    } else if (is_answer == have_answer && m < chosen) {
                        chosen = m;
                    }
                }
            }
            rep[root] = chosen;
        }
        Substitution theta;
        for (const auto& [root, members] : classes) {
            for (const Term& m : members)
                if (m.is_variable() && m != rep[root]) theta.bind(m, rep[root]);
        }

        ConjunctiveQuery next;
        next.head_predicate = q.head_predicate;
        for (const Term& t : q.answer_terms) next.answer_terms.push_back(theta(t));
        for (std::size_t i = 0; i < q.body.size(); ++i)
            if (!piece.count(i)) next.body.push_back(apply(theta, q.body[i]));
        for (const Atom& a : fresh.body) next.body.push_back(apply(theta, a));
        out.push_back(detail::canonical_cq(next).first);
    }
    return out;
}

/// True iff `general` maps homomorphically into `specific` (body into body,
/// answer terms onto answer terms): every answer of `specific` is one of
/// `general`, so `specific` is redundant in a union.
inline bool subsumes(const ConjunctiveQuery& general, const ConjunctiveQuery& specific) {
    if (general.answer_terms.size() != specific.answer_terms.size()) return false;
    std::map<Term, Term> seed;
    for (std::size_t i = 0; i < general.answer_terms.size(); ++i) {
        const Term& g = general.answer_terms[i];
        const Term& s = specific.answer_terms[i];
        if (g.is_variable()) {
            auto [it, inserted] = seed.emplace(g, s);
            if (!inserted && it->second != s) return false;
        } else if (g != s) {
            return false;
        }
    }
    AtomIndex index(std::set<Atom>(specific.body.begin(), specific.body.end()));
    bool found = false;
    match_conjunction(general.body, index,
                      [&](const std::map<Term, Term>&) { found = true; }, seed);
    return found;
}

/// Saturating resolution rewriting for sticky rule sets: evaluating the
/// result directly on any database yields the certain answers. Disjuncts
/// subsumed by a more general one are pruned as they appear; that keeps the
/// saturation finite. The zero-step original query is always retained.
inline UCQRewriting rewrite_sticky(const ConjunctiveQuery& q, const std::vector<Rule>& rules,
                                   std::size_t max_disjuncts = 100000) {
    if (!classify(rules).sticky) throw NotSticky();

    UCQRewriting out;
    out.head_predicate = q.head_predicate;
    out.arity = q.answer_terms.size();

    std::map<std::string, ConjunctiveQuery> live;
    std::deque<std::string> worklist;
    const std::string origin_key = [&] {
        auto [canon, key] = detail::canonical_cq(q);
        live.emplace(key, canon);
        worklist.push_back(key);
        return key;
    }();

    while (!worklist.empty()) {
        std::string key = std::move(worklist.front());
        worklist.pop_front();
        auto cur = live.find(key);
        if (cur == live.end()) continue;  // pruned while queued
        ConjunctiveQuery current = cur->second;
        for (const Rule& rule : rules) {
            for (ConjunctiveQuery& next : rewrite_step(current, rule)) {
                std::string nkey = to_string(next);
                if (live.count(nkey)) continue;
                bool redundant = false;
                for (const auto& [k, kept] : live) {
                    if (subsumes(kept, next)) {
                        redundant = true;
                        break;
                    }
                }
                if (redundant) continue;
                for (auto it = live.begin(); it != live.end();) {
                    if (it->first != origin_key && subsumes(next, it->second))
                        it = live.erase(it);
                    else
                        ++it;
                }
                live.emplace(nkey, next);
                if (live.size() > max_disjuncts) throw DisjunctCapExceeded(max_disjuncts);
                worklist.push_back(std::move(nkey));
            }
        }
    }

    for (const auto& [k, cq] : live) out.disjuncts.push_back(cq), (void)k;
    return out;
}

/// Union of the disjuncts' answers over the plain database; no rules apply.
inline std::set<std::vector<Term>> evaluate_ucq(const UCQRewriting& u,
                                                const std::set<Atom>& database) {
    AtomIndex index(database);
    std::set<std::vector<Term>> answers;
    for (const ConjunctiveQuery& cq : u.disjuncts) {
        auto part = evaluate_cq(cq, index);
        answers.insert(part.begin(), part.end());
    }
    return answers;
}

struct SqlSchema {
    std::map<std::string, std::string> table;    // predicate -> table name
    std::map<Position, std::string> column;      // position -> column name
};

inline SqlSchema default_sql_schema(const Schema& schema) {
    SqlSchema out;
    for (const auto& [pred, arity] : schema) {
        out.table[pred] = pred;
        for (std::size_t i = 0; i < arity; ++i)
            out.column[Position{pred, i}] = "c" + std::to_string(i + 1);
    }
    return out;
}

namespace detail {

inline std::string sql_literal(const Term& t) {
    std::string raw = t.is_constant() ? t.name() : to_string(t);
    std::string out = "'";
    for (char c : raw) {
        if (c == '\'') out.push_back('\'');
        out.push_back(c);
    }
    out.push_back('\'');
    return out;
}

inline std::string sql_alias(const Term& var, std::map<std::string, std::size_t>& used) {
    std::string base;
    for (char c : var.name()) base.push_back(static_cast<char>(std::tolower(c)));
    std::size_t n = used[base]++;
    return n == 0 ? base : base + "_" + std::to_string(n + 1);
}

}  // namespace detail

/// One SELECT per disjunct, combined with UNION. Join conditions come from
/// repeated variables, constants become WHERE equalities.
inline std::string emit_sql(const UCQRewriting& u, const SqlSchema& schema) {
    std::vector<std::string> selects;
    for (const ConjunctiveQuery& cq : u.disjuncts) {
        auto col = [&](std::size_t atom_idx, std::size_t arg_idx) {
            const Atom& a = cq.body[atom_idx];
            auto it = schema.column.find(Position{a.predicate, arg_idx});
            if (it == schema.column.end()) throw UnknownPredicate(a.predicate);
            return "t" + std::to_string(atom_idx) + "." + it->second;
        };

        std::map<Term, std::pair<std::size_t, std::size_t>> first_seen;
        std::vector<std::string> conditions;
        for (std::size_t i = 0; i < cq.body.size(); ++i) {
            for (std::size_t k = 0; k < cq.body[i].args.size(); ++k) {
                const Term& t = cq.body[i].args[k];
                if (t.is_variable()) {
                    auto [it, inserted] = first_seen.try_emplace(t, std::make_pair(i, k));
                    if (!inserted)
                        conditions.push_back(col(i, k) + " = " +
                                             col(it->second.first, it->second.second));
                } else {
                    conditions.push_back(col(i, k) + " = " + detail::sql_literal(t));
                }
            }
        }

        std::map<std::string, std::size_t> alias_pool;
        std::vector<std::string> select_items;
        for (const Term& t : cq.answer_terms) {
            if (t.is_variable()) {
                auto it = first_seen.find(t);
                if (it == first_seen.end()) throw InternalError("unsafe answer variable in UCQ");
                select_items.push_back(col(it->second.first, it->second.second) + " AS " +
                                       detail::sql_alias(t, alias_pool));
            } else {
                select_items.push_back(detail::sql_literal(t) + " AS " +
                                       detail::sql_alias(Term::variable("C"), alias_pool));
            }
        }
        if (select_items.empty()) select_items.push_back("1 AS positive");

        std::string sql = "SELECT ";
        for (std::size_t i = 0; i < select_items.size(); ++i) {
            if (i) sql += ", ";
            sql += select_items[i];
        }
        sql += " FROM ";
        for (std::size_t i = 0; i < cq.body.size(); ++i) {
            auto it = schema.table.find(cq.body[i].predicate);
            if (it == schema.table.end()) throw UnknownPredicate(cq.body[i].predicate);
            if (i) sql += ", ";
            sql += it->second + " AS t" + std::to_string(i);
        }
        if (!conditions.empty()) {
            sql += " WHERE ";
            for (std::size_t i = 0; i < conditions.size(); ++i) {
                if (i) sql += " AND ";
                sql += conditions[i];
            }
        }
        selects.push_back(std::move(sql));
    }

    std::string out;
    for (std::size_t i = 0; i < selects.size(); ++i) {
        if (i) out += " UNION ";
        out += selects[i];
    }
    return out;
}

/// End-to-end hybrid answering: reduce ranks, ground the weak variables,
/// rewrite over the sticky result and evaluate the union on the database.
inline std::set<std::vector<Term>> hybrid_answer(const Program& program,
                                                 const ConjunctiveQuery& q,
                                                 std::size_t max_disjuncts = 100000) {
    if (!classify(program.rules).weakly_sticky) throw NotWeaklySticky();
    ReduceRankResult reduced = reduce_rank(program, q);
    Program sticky = partial_grounding(reduced.program);
    UCQRewriting ucq = rewrite_sticky(*reduced.query, sticky.rules, max_disjuncts);
    return evaluate_ucq(ucq, sticky.database);
}

}  // namespace wsdlog
