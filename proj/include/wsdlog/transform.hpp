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
#include "wsdlog/chase.hpp"
#include "wsdlog/errors.hpp"
#include "wsdlog/homomorphism.hpp"
#include "wsdlog/model.hpp"

namespace wsdlog {

/// Per-rule weak variables: marked body variables occurring more than once
/// in the body with at least one occurrence at a finite-rank position.
struct WeakVariableReport {
    std::vector<std::set<std::string>> per_rule;

    bool any() const {
        return std::any_of(per_rule.begin(), per_rule.end(),
                           [](const auto& s) { return !s.empty(); });
    }
};

inline WeakVariableReport weak_variables(const std::vector<Rule>& rules, const Marking& marking,
                                         const RankMap& ranks) {
    WeakVariableReport report;
    report.per_rule.resize(rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        std::map<std::string, std::size_t> counts;
        std::map<std::string, bool> finite_occurrence;
        for (const Atom& a : rules[i].body)
            for (std::size_t k = 0; k < a.args.size(); ++k) {
                const Term& t = a.args[k];
                if (!t.is_variable()) continue;
                ++counts[t.name()];
                if (ranks.is_finite(Position{a.predicate, k})) finite_occurrence[t.name()] = true;
            }
        for (const auto& [var, count] : counts)
            if (count >= 2 && marking.is_marked(i, var) && finite_occurrence[var])
                report.per_rule[i].insert(var);
    }
    return report;
}

namespace detail {

/// Fresh-name helpers for the expansion rewrite.
class NamePool {
public:
    explicit NamePool(std::set<std::string> taken) : taken_(std::move(taken)) {}

    std::string fresh(const std::string& base, std::size_t slot) {
        std::string candidate = base + "_" + std::to_string(slot);
        while (!taken_.insert(candidate).second) candidate += "_";
        return candidate;
    }

private:
    std::set<std::string> taken_;
};

inline std::string next_expanded_name(const std::string& pred,
                                      const std::set<std::string>& taken) {
    std::string base = pred;
    std::size_t generation = 1;
    auto pos = pred.rfind("_x");
    if (pos != std::string::npos && pos + 2 < pred.size()) {
        bool digits = true;
        for (std::size_t i = pos + 2; i < pred.size(); ++i)
            digits = digits && std::isdigit(static_cast<unsigned char>(pred[i]));
        if (digits) {
            base = pred.substr(0, pos);
            generation = std::stoull(pred.substr(pos + 2)) + 1;
        }
    }
    std::string candidate = base + "_x" + std::to_string(generation);
    while (taken.count(candidate)) candidate = base + "_x" + std::to_string(++generation);
    return candidate;
}

/// One expansion round: which positions widen, to what width, and the
/// replacement predicate names.
struct ExpansionPlan {
    std::set<Position> positions;
    std::size_t width = 1;
    std::map<std::string, std::string> renamed;  // old predicate -> expanded

    bool expands(const Position& p) const { return positions.count(p) != 0; }
};

/// Variables of a rule/query with at least one body occurrence at an
/// expanded position; these carry the widened blocks.
inline std::set<Term> block_carriers(const std::vector<Atom>& body, const ExpansionPlan& plan) {
    std::set<Term> out;
    for (const Atom& a : body)
        for (std::size_t k = 0; k < a.args.size(); ++k)
            if (a.args[k].is_variable() && plan.expands(Position{a.predicate, k}))
                out.insert(a.args[k]);
    return out;
}

}  // namespace detail

/// Records, per expansion round, how original positions map into widened
/// predicates. Width 1 means untouched.
struct ExpansionMap {
    std::map<Position, std::size_t> width;
    std::map<std::string, std::string> renamed_predicates;
};

struct ReduceRankResult {
    Program program;
    std::optional<ConjunctiveQuery> query;
    std::vector<ExpansionMap> rounds;
};

/// Eliminates existential variables from finite-rank positions by Skolem
/// expansion, one existential per round: the witness becomes a fresh
/// function constant followed by the frontier variables, every position the
/// witness can flow to widens accordingly, joins are preserved by shared
/// companion variables, and extensional data is bridged by load rules.
/// The query, when given, is widened by the same plan with fresh companions.
inline ReduceRankResult reduce_rank(const Program& input,
                                    std::optional<ConjunctiveQuery> query = std::nullopt) {
    ReduceRankResult out;
    out.program = input;
    out.query = std::move(query);

    std::set<std::string> taken;
    for (const auto& [pred, arity] : schema_of(out.program)) taken.insert(pred), (void)arity;
    if (out.query)
        for (const Atom& a : out.query->body) taken.insert(a.predicate);

    const Schema db_schema = [&] {
        Schema s;
        for (const Atom& a : input.database) schema_add(s, a);
        return s;
    }();
    std::set<std::string> load_ruled;
    std::uint64_t function_counter = 0;

    constexpr std::size_t kIterationCap = 100000;
    for (std::size_t iteration = 0;; ++iteration) {
        if (iteration >= kIterationCap) throw InternalError("reduce_rank failed to converge");

        std::vector<Rule>& rules = out.program.rules;
        const RankMap ranks = compute_ranks(build_dependency_graph(rules));

        // Pick the minimal (rank, rule, head arg) existential occurrence at
        // a finite-rank position. Rank-1 positions exist whenever the head
        // carries a universal variable; all-existential heads can sit at
        // rank 0 and are handled the same way.
        struct Pick {
            std::size_t rank, rule, arg;
        };
        std::optional<Pick> pick;
        for (std::size_t i = 0; i < rules.size(); ++i)
            for (std::size_t k = 0; k < rules[i].head.args.size(); ++k) {
                const Term& t = rules[i].head.args[k];
                if (!t.is_variable() || !rules[i].existential_vars.count(t)) continue;
                Rank r = ranks.rank.at(Position{rules[i].head.predicate, k});
                if (!r.has_value()) continue;
                Pick cand{*r, i, k};
                if (!pick || std::tie(cand.rank, cand.rule, cand.arg) <
                                 std::tie(pick->rank, pick->rule, pick->arg))
                    pick = cand;
            }
        if (!pick) break;

        Rule& sigma = rules[pick->rule];
        const Term z = sigma.head.args[pick->arg];
        const Term fc = Term::function_constant(++function_counter);

        // Frontier в order of first body occurrence.
        std::vector<Term> frontier;
        {
            const std::set<Term> head_vars = sigma.head_variables();
            for (const Atom& a : sigma.body)
                for (const Term& t : a.args)
                    if (t.is_variable() && head_vars.count(t) &&
                        std::find(frontier.begin(), frontier.end(), t) == frontier.end())
                        frontier.push_back(t);
        }

        const std::size_t width = 1 + frontier.size();
        if (width == 1) {
            for (Term& t : sigma.head.args)
                if (t == z) t = fc;
            sigma.existential_vars.erase(z);
            ExpansionMap em;
            out.rounds.push_back(em);
            continue;
        }

        detail::ExpansionPlan plan;
        plan.width = width;
        for (std::size_t k = 0; k < sigma.head.args.size(); ++k)
            if (sigma.head.args[k] == z)
                plan.positions.insert(Position{sigma.head.predicate, k});

        // Flow closure: a variable bound at an expanded body position drags
        // every position it occupies, in that rule or query, into the plan.
        for (bool changed = true; changed;) {
            changed = false;
            auto absorb = [&](const std::vector<Atom>& body, const Atom* head) {
                std::set<Term> carriers = detail::block_carriers(body, plan);
                if (carriers.empty()) return;
                auto widen = [&](const Atom& a) {
                    for (std::size_t k = 0; k < a.args.size(); ++k)
                        if (a.args[k].is_variable() && carriers.count(a.args[k]))
                            if (plan.positions.insert(Position{a.predicate, k}).second)
                                changed = true;
                };
                for (const Atom& a : body) widen(a);
                if (head) widen(*head);
            };
            for (const Rule& r : rules) absorb(r.body, &r.head);
            if (out.query) absorb(out.query->body, nullptr);
        }

        for (const Position& p : plan.positions)
            if (!plan.renamed.count(p.predicate))
                plan.renamed[p.predicate] = detail::next_expanded_name(p.predicate, taken);
        for (const auto& [old_name, new_name] : plan.renamed) taken.insert(new_name), (void)old_name;

        // Rewrite one atom under the plan. `carriers` are the rule's block
        // carrying variables; `skolem_head` marks sigma's head.
        auto rewrite_atom = [&](const Atom& a, const std::set<Term>& carriers,
                                detail::NamePool& pool,
                                std::map<Term, std::vector<Term>>& blocks, bool in_head,
                                const std::set<Term>* existentials, bool skolem_head) {
            bool touched = false;
            for (std::size_t k = 0; k < a.args.size(); ++k)
                touched = touched || plan.expands(Position{a.predicate, k});
            if (!touched) return a;

            Atom outa;
            outa.predicate = plan.renamed.at(a.predicate);
            for (std::size_t k = 0; k < a.args.size(); ++k) {
                const Term& t = a.args[k];
                if (!plan.expands(Position{a.predicate, k})) {
                    outa.args.push_back(t);
                    continue;
                }
                if (skolem_head && t == z) {
                    outa.args.push_back(fc);
                    for (const Term& f : frontier) outa.args.push_back(f);
                    continue;
                }
                const bool existential =
                    in_head && t.is_variable() && existentials && existentials->count(t);
                if (t.is_variable() && !existential && carriers.count(t)) {
                    auto [it, inserted] = blocks.try_emplace(t);
                    if (inserted) {
                        it->second.push_back(t);
                        for (std::size_t s = 1; s < plan.width; ++s)
                            it->second.push_back(Term::variable(pool.fresh(t.name(), s)));
                    }
                    for (const Term& b : it->second) outa.args.push_back(b);
                    continue;
                }
                if (!in_head && t.is_variable()) {
                    // Carrier by construction: its own occurrence is at an
                    // expanded body position. Handled above.
                    throw InternalError("body occupant escaped the carrier set");
                }
                if (!in_head) {
                    // Constant in a body slot: the tail is unconstrained.
                    outa.args.push_back(t);
                    for (std::size_t s = 1; s < plan.width; ++s)
                        outa.args.push_back(Term::variable(pool.fresh("U", s)));
                    continue;
                }
                // Head write without a block: pad with fillers.
                outa.args.push_back(t);
                for (std::size_t s = 1; s < plan.width; ++s) outa.args.push_back(Term::filler());
            }
            return outa;
        };

        auto rule_names = [](const Rule& r) {
            std::set<std::string> names;
            for (const Atom& a : r.body)
                for (const Term& t : a.args)
                    if (t.is_variable()) names.insert(t.name());
            for (const Term& t : r.head.args)
                if (t.is_variable()) names.insert(t.name());
            for (const Term& t : r.existential_vars) names.insert(t.name());
            return names;
        };

        std::vector<Rule> rewritten;
        rewritten.reserve(rules.size());
        for (std::size_t i = 0; i < rules.size(); ++i) {
            const Rule& r = rules[i];
            const bool is_sigma = (i == pick->rule);
            detail::NamePool pool(rule_names(r));
            std::map<Term, std::vector<Term>> blocks;
            const std::set<Term> carriers = detail::block_carriers(r.body, plan);
            Rule nr;
            for (const Atom& a : r.body)
                nr.body.push_back(rewrite_atom(a, carriers, pool, blocks, false, nullptr, false));
            nr.head = rewrite_atom(r.head, carriers, pool, blocks, true, &r.existential_vars,
                                   is_sigma);
            nr.existential_vars = r.existential_vars;
            if (is_sigma) nr.existential_vars.erase(z);
            rewritten.push_back(std::move(nr));
        }
        rules = std::move(rewritten);

        if (out.query) {
            ConjunctiveQuery& q = *out.query;
            std::set<std::string> names;
            for (const Atom& a : q.body)
                for (const Term& t : a.args)
                    if (t.is_variable()) names.insert(t.name());
            for (const Term& t : q.answer_terms)
                if (t.is_variable()) names.insert(t.name());
            detail::NamePool pool(std::move(names));
            std::map<Term, std::vector<Term>> blocks;
            const std::set<Term> carriers = detail::block_carriers(q.body, plan);
            std::vector<Atom> body;
            for (const Atom& a : q.body) {
                // Query constants behave like carriers with fresh tails: the
                // instance may hold either a padded or a carried block.
                body.push_back(rewrite_atom(a, carriers, pool, blocks, false, nullptr, false));
            }
            q.body = std::move(body);
        }

        // Load rules bridge extensional data of freshly expanded predicates.
        for (const auto& [old_name, new_name] : plan.renamed) {
            auto it = db_schema.find(old_name);
            if (it == db_schema.end() || load_ruled.count(old_name)) continue;
            load_ruled.insert(old_name);
            Rule load;
            Atom body_atom;
            body_atom.predicate = old_name;
            for (std::size_t k = 0; k < it->second; ++k)
                body_atom.args.push_back(Term::variable("X" + std::to_string(k + 1)));
            load.body.push_back(body_atom);
            load.head.predicate = new_name;
            for (std::size_t k = 0; k < it->second; ++k) {
                load.head.args.push_back(body_atom.args[k]);
                if (plan.expands(Position{old_name, k}))
                    for (std::size_t s = 1; s < plan.width; ++s)
                        load.head.args.push_back(Term::filler());
            }
            out.program.rules.push_back(std::move(load));
        }

        ExpansionMap em;
        for (const Position& p : plan.positions) em.width[p] = plan.width;
        em.renamed_predicates = plan.renamed;
        out.rounds.push_back(std::move(em));
    }

    return out;
}

/// Grounds the weak variables of every weak rule over the active domain;
/// requires a weakly-sticky input with no existential variable at a
/// finite-rank position, and produces a sticky program with the same
/// database and the same certain answers.
inline Program partial_grounding(const Program& input) {
    const ClassReport report = classify(input.rules);
    if (!report.weakly_sticky) throw NotWeaklySticky();
    if (!report.zero_infinity)
        throw PreconditionViolated(
            "existential variable at a finite-rank position; run rank reduction first");

    const Marking marking = mark_variables(input.rules);
    const RankMap ranks = compute_ranks(build_dependency_graph(input.rules));
    const WeakVariableReport weak = weak_variables(input.rules, marking, ranks);
    const std::set<Term> domain = active_domain(input.database);

    Program out;
    out.database = input.database;
    for (std::size_t i = 0; i < input.rules.size(); ++i) {
        const Rule& rule = input.rules[i];
        if (weak.per_rule[i].empty()) {
            out.rules.push_back(rule);
            continue;
        }
        const std::vector<std::string> vars(weak.per_rule[i].begin(), weak.per_rule[i].end());
        const std::vector<Term> constants(domain.begin(), domain.end());
        std::vector<std::size_t> odometer(vars.size(), 0);
        if (constants.empty()) continue;  // no instantiation can ever fire
        for (;;) {
            Substitution subst;
            for (std::size_t v = 0; v < vars.size(); ++v)
                subst.bind(Term::variable(vars[v]), constants[odometer[v]]);
            out.rules.push_back(apply(subst, rule));
            std::size_t v = vars.size();
            while (v > 0 && ++odometer[v - 1] == constants.size()) odometer[--v] = 0;
            if (v == 0) break;
        }
    }
    return out;
}

/// Constants that can actually reach `var` in `rule`'s body, computed by
/// answering the auxiliary query made of the rule body over the grounding.
/// A sound pruning of the cartesian grounding domain.
inline std::set<Term> restrict_grounding_domain(const Program& program, const Rule& rule,
                                                const Term& var, const GroundingConfig& cfg) {
    const ClassReport report = classify(program.rules);
    if (!report.weakly_sticky) throw NotWeaklySticky();
    if (!report.zero_infinity)
        throw PreconditionViolated(
            "existential variable at a finite-rank position; run rank reduction first");

    ConjunctiveQuery aux;
    aux.head_predicate = "q_g";
    aux.answer_terms.push_back(var);
    aux.body = rule.body;
    check_query_safety(aux);

    GroundingConfig aux_cfg = cfg;
    aux_cfg.resumptions = resumptions_for(aux);
    const GroundProgram gp = ground_ws(program, aux_cfg);

    std::set<Term> out;
    for (const std::vector<Term>& tuple : answer_over_ground(aux, gp)) out.insert(tuple.at(0));
    return out;
}

}  // namespace wsdlog
