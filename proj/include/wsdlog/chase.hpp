#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wsdlog/analysis.hpp"
#include "wsdlog/errors.hpp"
#include "wsdlog/homomorphism.hpp"
#include "wsdlog/model.hpp"

namespace wsdlog {

struct GroundingConfig {
    std::size_t resumptions = 0;
    std::size_t max_rules = 1'000'000;
};

/// Output of the grounding: ground rules in production order over the input
/// database, plus bookkeeping used by tests (levels, per-phase head
/// snapshots). Serializes through the syntax module for off-line reuse.
struct GroundProgram {
    std::vector<Rule> ground_rules;
    std::set<Atom> database;
    std::size_t resumptions_performed = 0;
    std::map<Atom, std::size_t> level;            // 0 for database atoms
    std::vector<std::size_t> rule_phase;          // phase that produced each rule
    std::vector<std::size_t> rule_head_level;     // 1 + max body level at creation
    std::vector<std::vector<Atom>> phase_heads;   // head atoms as of each phase end

    Program as_program() const { return Program{ground_rules, database}; }
};

/// Number of distinct variables of the query body; the resumption count that
/// makes the grounding complete for it.
inline std::size_t resumptions_for(const ConjunctiveQuery& q) {
    return q.variables().size();
}

namespace detail {

inline Substitution to_substitution(const std::map<Term, Term>& binding) {
    Substitution s;
    for (const auto& [from, to] : binding) s.bind(from, to);
    return s;
}

inline bool unify_pattern(const Atom& pattern, const Atom& fact, std::map<Term, Term>& binding) {
    if (pattern.predicate != fact.predicate || pattern.args.size() != fact.args.size())
        return false;
    for (std::size_t i = 0; i < pattern.args.size(); ++i) {
        const Term& p = pattern.args[i];
        if (p.is_variable()) {
            auto [it, inserted] = binding.emplace(p, fact.args[i]);
            if (!inserted && it->second != fact.args[i]) return false;
        } else if (p != fact.args[i]) {
            return false;
        }
    }
    return true;
}

/// Existential variables in order of first occurrence in the head.
inline std::vector<Term> existential_order(const Rule& rule) {
    std::vector<Term> out;
    for (const Term& t : rule.head.args)
        if (rule.existential_vars.count(t) && std::find(out.begin(), out.end(), t) == out.end())
            out.push_back(t);
    for (const Term& t : rule.existential_vars)
        if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    return out;
}

}  // namespace detail

/// Query-driven grounding. Repeatedly applies (rule, homomorphism) pairs in
/// level-saturating order, each pair at most once, blocking a pair whenever
/// an existing head atom is pi_F-homomorphic to the candidate head; after a
/// phase exhausts, every labeled null is frozen and the blocked pairs are
/// retried, cfg.resumptions times in total.
inline GroundProgram ground_ws(const Program& program, const GroundingConfig& cfg) {
    if (!classify(program.rules).weakly_sticky) throw NotWeaklySticky();

    const std::set<Position> pi_f =
        compute_ranks(build_dependency_graph(program.rules)).pi_f();

    struct QueueEntry {
        std::size_t level;
        std::size_t rule;
        std::vector<Atom> body;          // substituted body, the tie-breaker
        std::map<Term, Term> binding;

        bool operator<(const QueueEntry& other) const {
            return std::tie(level, rule, body) < std::tie(other.level, other.rule, other.body);
        }
    };
    using PairKey = std::pair<std::size_t, std::vector<Term>>;

    // Per-rule metadata.
    std::vector<std::vector<Term>> rule_vars(program.rules.size());
    std::vector<std::vector<Term>> rule_exists(program.rules.size());
    for (std::size_t i = 0; i < program.rules.size(); ++i) {
        const std::set<Term> bv = program.rules[i].body_variables();
        rule_vars[i].assign(bv.begin(), bv.end());
        rule_exists[i] = detail::existential_order(program.rules[i]);
    }

    GroundProgram out;
    out.database = program.database;

    AtomIndex instance(program.database);
    AtomIndex heads;                      // head atoms of produced rules
    std::vector<Atom> heads_in_order;
    std::map<Atom, std::size_t> level;
    for (const Atom& a : program.database) level[a] = 0;

    std::set<PairKey> seen;               // enqueued or applied, current naming
    std::set<QueueEntry> queue;
    std::vector<std::pair<std::size_t, std::map<Term, Term>>> blocked;
    std::uint64_t null_counter = 0;
    std::uint64_t frozen_counter = 0;

    auto make_key = [&](std::size_t rule, const std::map<Term, Term>& binding) {
        std::vector<Term> values;
        values.reserve(rule_vars[rule].size());
        for (const Term& v : rule_vars[rule]) {
            auto it = binding.find(v);
            values.push_back(it == binding.end() ? v : it->second);
        }
        return PairKey{rule, std::move(values)};
    };

    auto enqueue = [&](std::size_t rule, const std::map<Term, Term>& binding) {
        PairKey key = make_key(rule, binding);
        if (!seen.insert(key).second) return;
        std::vector<Atom> body = wsdlog::apply(detail::to_substitution(binding), program.rules[rule].body);
        std::size_t lvl = 0;
        for (const Atom& a : body) lvl = std::max(lvl, level.at(a));
        queue.insert(QueueEntry{lvl, rule, std::move(body), binding});
    };

    // New-atom driven discovery: pairs whose body uses the new atom.
    auto discover_with = [&](const Atom& added) {
        for (std::size_t i = 0; i < program.rules.size(); ++i) {
            const Rule& rule = program.rules[i];
            for (std::size_t j = 0; j < rule.body.size(); ++j) {
                std::map<Term, Term> binding;
                if (!detail::unify_pattern(rule.body[j], added, binding)) continue;
                std::vector<Atom> rest;
                rest.reserve(rule.body.size() - 1);
                for (std::size_t k = 0; k < rule.body.size(); ++k)
                    if (k != j) rest.push_back(rule.body[k]);
                match_conjunction(rest, instance,
                                  [&](const std::map<Term, Term>& full) { enqueue(i, full); },
                                  binding);
            }
        }
    };

    // Candidate head under a binding, existentials taken by probe nulls that
    // become real only if the pair is applied.
    auto candidate_head = [&](std::size_t rule, const std::map<Term, Term>& binding,
                              std::set<Term>& fresh) {
        std::map<Term, Term> extended = binding;
        std::uint64_t probe = null_counter;
        for (const Term& v : rule_exists[rule]) {
            Term n = Term::labeled_null(++probe);
            extended[v] = n;
            fresh.insert(n);
        }
        return apply(detail::to_substitution(extended), program.rules[rule].head);
    };

    // Like pi_homomorphic over pi_F, except that the candidate's own fresh
    // witnesses stay remappable even at finite-rank positions; only values
    // inherited from the body match are pinned there. Without the exemption
    // a rule whose head drops every universal variable grounds forever.
    auto blocked_by_existing = [&](const Atom& cand, const std::set<Term>& fresh) {
        std::set<Term> fixed;
        for (std::size_t i = 0; i < cand.args.size(); ++i)
            if (pi_f.count(Position{cand.predicate, i}) && !fresh.count(cand.args[i]))
                fixed.insert(cand.args[i]);
        auto maps_onto = [&](const Atom& target) {
            std::map<Term, Term> m;
            for (std::size_t i = 0; i < cand.args.size(); ++i) {
                const Term& src = cand.args[i];
                const Term& dst = target.args[i];
                if (src.is_labeled_null() && !fixed.count(src)) {
                    auto [it, inserted] = m.emplace(src, dst);
                    if (!inserted && it->second != dst) return false;
                } else if (src != dst) {
                    return false;
                }
            }
            return true;
        };
        // Scan the tightest bucket: a position whose term the homomorphism
        // cannot remap pins the target's term exactly.
        std::map<Term, Term> no_binding;
        Atom probe = cand;
        for (std::size_t i = 0; i < probe.args.size(); ++i)
            if (probe.args[i].is_labeled_null() && !fixed.count(probe.args[i]))
                probe.args[i] = Term::variable("_");  // wildcard for bucket choice
        for (const Atom& a : heads.candidates(probe, no_binding))
            if (a.args.size() == cand.args.size() && maps_onto(a)) return true;
        return false;
    };

    // Seed with pairs over the database alone.
    for (std::size_t i = 0; i < program.rules.size(); ++i)
        match_conjunction(program.rules[i].body, instance,
                          [&](const std::map<Term, Term>& b) { enqueue(i, b); });

    for (std::size_t phase = 0;; ++phase) {
        while (!queue.empty()) {
            QueueEntry entry = *queue.begin();
            queue.erase(queue.begin());

            std::set<Term> fresh;
            Atom head = candidate_head(entry.rule, entry.binding, fresh);
            if (blocked_by_existing(head, fresh)) {
                blocked.emplace_back(entry.rule, entry.binding);
                continue;
            }
            null_counter += rule_exists[entry.rule].size();  // commit probes

            out.ground_rules.push_back(Rule{entry.body, head, {}});
            out.rule_phase.push_back(phase);
            out.rule_head_level.push_back(entry.level + 1);
            if (out.ground_rules.size() > cfg.max_rules) throw RuleCapExceeded(cfg.max_rules);

            heads.insert(head);
            heads_in_order.push_back(head);
            if (instance.insert(head)) {
                level.emplace(head, entry.level + 1);
                discover_with(head);
            }
        }

        out.phase_heads.push_back(heads_in_order);
        if (phase == cfg.resumptions) break;

        // Freeze every labeled null of the produced rules, rename all
        // bookkeeping accordingly, and retry the blocked pairs.
        std::set<Term> nulls;
        for (const Rule& r : out.ground_rules) {
            for (const Atom& a : r.body)
                for (const Term& t : a.args)
                    if (t.is_labeled_null()) nulls.insert(t);
            for (const Term& t : r.head.args)
                if (t.is_labeled_null()) nulls.insert(t);
        }
        Substitution freeze;
        for (const Term& n : nulls) freeze.bind(n, Term::frozen_null(++frozen_counter));

        for (Rule& r : out.ground_rules) r = apply(freeze, r);
        for (Atom& a : heads_in_order) a = apply(freeze, a);

        instance = AtomIndex(program.database);
        heads = AtomIndex();
        std::map<Atom, std::size_t> new_level;
        for (const Atom& a : program.database) new_level[a] = 0;
        for (std::size_t i = 0; i < out.ground_rules.size(); ++i) {
            const Atom& h = out.ground_rules[i].head;
            heads.insert(h);
            if (instance.insert(h)) new_level.emplace(h, out.rule_head_level[i]);
        }
        level = std::move(new_level);

        std::set<PairKey> new_seen;
        for (const PairKey& key : seen) {
            std::vector<Term> values;
            values.reserve(key.second.size());
            for (const Term& t : key.second) values.push_back(freeze(t));
            new_seen.insert(PairKey{key.first, std::move(values)});
        }
        seen = std::move(new_seen);

        auto retry = std::move(blocked);
        blocked.clear();
        for (auto& [rule, binding] : retry) {
            std::map<Term, Term> renamed;
            for (const auto& [from, to] : binding) renamed.emplace(from, freeze(to));
            PairKey key = make_key(rule, renamed);
            seen.erase(key);  // allow the retried pair back in
            enqueue(rule, renamed);
        }
    }

    out.resumptions_performed = cfg.resumptions;
    for (const auto& [atom, lvl] : level) out.level.emplace(atom, lvl);
    return out;
}

/// Least fixpoint of the database under the ground rules.
inline std::set<Atom> minimal_model(const GroundProgram& gp) {
    std::set<Atom> model = gp.database;
    std::map<Atom, std::vector<std::size_t>> waiters;
    std::vector<std::size_t> missing(gp.ground_rules.size(), 0);
    std::vector<std::size_t> ready;

    for (std::size_t i = 0; i < gp.ground_rules.size(); ++i) {
        std::set<Atom> need(gp.ground_rules[i].body.begin(), gp.ground_rules[i].body.end());
        for (const Atom& a : need) {
            if (model.count(a)) continue;
            ++missing[i];
            waiters[a].push_back(i);
        }
        if (missing[i] == 0) ready.push_back(i);
    }

    while (!ready.empty()) {
        std::size_t i = ready.back();
        ready.pop_back();
        const Atom& head = gp.ground_rules[i].head;
        if (!model.insert(head).second) continue;
        auto it = waiters.find(head);
        if (it == waiters.end()) continue;
        for (std::size_t j : it->second)
            if (--missing[j] == 0) ready.push_back(j);
    }
    return model;
}

/// Evaluate a query over a set of atoms. Boolean queries answer with the
/// empty tuple; tuples containing any generated term are discarded.
inline std::set<std::vector<Term>> evaluate_cq(const ConjunctiveQuery& q,
                                               const AtomIndex& instance) {
    std::set<std::vector<Term>> answers;
    bool boolean_hit = false;
    match_conjunction(q.body, instance, [&](const std::map<Term, Term>& binding) {
        if (q.is_boolean()) {
            boolean_hit = true;
            return;
        }
        std::vector<Term> tuple;
        tuple.reserve(q.answer_terms.size());
        for (const Term& t : q.answer_terms) {
            auto it = t.is_variable() ? binding.find(t) : binding.end();
            tuple.push_back(it == binding.end() ? t : it->second);
        }
        if (std::all_of(tuple.begin(), tuple.end(), [](const Term& t) { return t.is_constant(); }))
            answers.insert(std::move(tuple));
    });
    if (q.is_boolean() && boolean_hit) answers.insert(std::vector<Term>{});
    return answers;
}

inline std::set<std::vector<Term>> evaluate_cq(const ConjunctiveQuery& q,
                                               const std::set<Atom>& atoms) {
    return evaluate_cq(q, AtomIndex(atoms));
}

inline std::set<std::vector<Term>> answer_over_ground(const ConjunctiveQuery& q,
                                                      const GroundProgram& gp) {
    return evaluate_cq(q, AtomIndex(minimal_model(gp)));
}

/// Bounded breadth-first restricted chase, the test oracle. Applies the
/// deterministically smallest (level, rule, body) step whose head is not yet
/// satisfiable in the instance; atoms beyond max_depth are not produced.
struct ChaseResult {
    std::set<Atom> atoms;
    std::map<Atom, std::size_t> level;
    bool saturated = false;   // no applicable step was cut off by the depth bound
    bool overflowed = false;  // max_atoms hit; result truncated
};

inline ChaseResult oracle_chase_detail(const Program& program, std::size_t max_depth,
                                       std::size_t max_atoms = 100000) {
    ChaseResult res;
    AtomIndex instance(program.database);
    for (const Atom& a : program.database) res.level[a] = 0;
    std::uint64_t null_counter = 0;

    std::vector<std::vector<Term>> rule_exists(program.rules.size());
    for (std::size_t i = 0; i < program.rules.size(); ++i)
        rule_exists[i] = detail::existential_order(program.rules[i]);

    for (;;) {
        struct Candidate {
            std::size_t level;
            std::size_t rule;
            std::vector<Atom> body;
            std::map<Term, Term> binding;
        };
        std::optional<Candidate> best;
        bool truncated = false;

        for (std::size_t i = 0; i < program.rules.size(); ++i) {
            const Rule& rule = program.rules[i];
            match_conjunction(rule.body, instance, [&](const std::map<Term, Term>& binding) {
                std::vector<Atom> body = wsdlog::apply(detail::to_substitution(binding), rule.body);
                std::size_t lvl = 0;
                for (const Atom& a : body) lvl = std::max(lvl, res.level.at(a));
                if (lvl + 1 > max_depth) {
                    truncated = true;
                    return;
                }
                // Restricted-chase check: some extension already satisfies
                // the head in the current instance.
                Atom pattern = apply(detail::to_substitution(binding), rule.head);
                bool satisfied = false;
                match_conjunction({pattern}, instance,
                                  [&](const std::map<Term, Term>&) { satisfied = true; });
                if (satisfied) return;
                Candidate cand{lvl + 1, i, std::move(body), binding};
                if (!best || std::tie(cand.level, cand.rule, cand.body) <
                                 std::tie(best->level, best->rule, best->body))
                    best = std::move(cand);
            });
        }

        if (!best) {
            res.saturated = !truncated;
            break;
        }
        std::map<Term, Term> extended = best->binding;
        for (const Term& v : rule_exists[best->rule]) extended[v] = Term::labeled_null(++null_counter);
        Atom head = apply(detail::to_substitution(extended), program.rules[best->rule].head);
        instance.insert(head);
        res.level.emplace(head, best->level);
        if (instance.size() > max_atoms) {
            res.overflowed = true;
            break;
        }
    }

    res.atoms = instance.atoms();
    return res;
}

inline std::set<Atom> oracle_chase(const Program& program, std::size_t max_depth) {
    return oracle_chase_detail(program, max_depth).atoms;
}

inline std::set<std::vector<Term>> certain_answers_oracle(const ConjunctiveQuery& q,
                                                          const Program& program,
                                                          std::size_t max_depth) {
    return evaluate_cq(q, AtomIndex(oracle_chase(program, max_depth)));
}

}  // namespace wsdlog
