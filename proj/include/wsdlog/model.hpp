#pragma once

#include <algorithm>
#include <compare>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wsdlog/errors.hpp"
#include "wsdlog/term.hpp"

namespace wsdlog {

struct Atom {
    std::string predicate;
    std::vector<Term> args;

    std::size_t arity() const { return args.size(); }

    friend auto operator<=>(const Atom&, const Atom&) = default;
    friend bool operator==(const Atom&, const Atom&) = default;
};

/// An argument slot of a predicate. Index is 0-based internally; rendered
/// 1-based (p[1] is the first argument) to match the usual notation.
struct Position {
    std::string predicate;
    std::size_t index = 0;

    friend auto operator<=>(const Position&, const Position&) = default;
    friend bool operator==(const Position&, const Position&) = default;
};

/// An existential rule body(X) -> exists Y: head(X,Y). Ground rules carry no
/// variables (labeled and frozen nulls are fine) and an empty existential set.
struct Rule {
    std::vector<Atom> body;
    Atom head;
    std::set<Term> existential_vars;

    friend auto operator<=>(const Rule&, const Rule&) = default;
    friend bool operator==(const Rule&, const Rule&) = default;

    bool is_ground() const {
        auto ground = [](const Atom& a) {
            return std::none_of(a.args.begin(), a.args.end(),
                                [](const Term& t) { return t.is_variable(); });
        };
        return ground(head) && std::all_of(body.begin(), body.end(), ground);
    }

    std::set<Term> body_variables() const {
        std::set<Term> vars;
        for (const Atom& a : body)
            for (const Term& t : a.args)
                if (t.is_variable()) vars.insert(t);
        return vars;
    }

    std::set<Term> head_variables() const {
        std::set<Term> vars;
        for (const Term& t : head.args)
            if (t.is_variable()) vars.insert(t);
        return vars;
    }

    /// Body variables that also occur in the head.
    std::set<Term> frontier() const {
        std::set<Term> out;
        const std::set<Term> hv = head_variables();
        for (const Term& v : body_variables())
            if (hv.count(v)) out.insert(v);
        return out;
    }
};

/// Throws SemanticError unless the rule is safe: every non-existential head
/// variable occurs in the body, and existential variables stay out of it.
inline void check_rule_safety(const Rule& rule) {
    const std::set<Term> bv = rule.body_variables();
    for (const Term& v : rule.existential_vars) {
        if (!v.is_variable())
            throw SemanticError("existential marker on a non-variable term");
        if (bv.count(v))
            throw SemanticError("existential variable " + v.name() + " used in rule body");
    }
    for (const Term& t : rule.head.args) {
        if (t.is_variable() && !rule.existential_vars.count(t) && !bv.count(t))
            throw SemanticError("unsafe head variable " + t.name() +
                                " (not in body, not existential)");
    }
}

/// q(X1,...,Xk) :- body. Answer terms are variables in parsed queries; the
/// rewriting may specialize them to constants, so the slot holds terms.
struct ConjunctiveQuery {
    std::string head_predicate;
    std::vector<Term> answer_terms;
    std::vector<Atom> body;

    friend auto operator<=>(const ConjunctiveQuery&, const ConjunctiveQuery&) = default;
    friend bool operator==(const ConjunctiveQuery&, const ConjunctiveQuery&) = default;

    bool is_boolean() const { return answer_terms.empty(); }

    std::set<Term> variables() const {
        std::set<Term> vars;
        for (const Atom& a : body)
            for (const Term& t : a.args)
                if (t.is_variable()) vars.insert(t);
        return vars;
    }
};

inline void check_query_safety(const ConjunctiveQuery& q) {
    const std::set<Term> bv = q.variables();
    for (const Term& t : q.answer_terms)
        if (t.is_variable() && !bv.count(t))
            throw SemanticError("answer variable " + t.name() + " not bound in query body");
}

struct Program {
    std::vector<Rule> rules;
    std::set<Atom> database;

    friend bool operator==(const Program&, const Program&) = default;
};

/// Predicate arities, harvested from rules, facts and queries. Every atom of
/// a predicate must agree on arity program-wide.
using Schema = std::map<std::string, std::size_t>;

inline void schema_add(Schema& schema, const Atom& atom) {
    auto [it, inserted] = schema.emplace(atom.predicate, atom.arity());
    if (!inserted && it->second != atom.arity())
        throw SemanticError("arity mismatch for predicate " + atom.predicate + ": " +
                            std::to_string(it->second) + " vs " + std::to_string(atom.arity()));
}

inline Schema schema_of(const std::vector<Rule>& rules) {
    Schema schema;
    for (const Rule& r : rules) {
        for (const Atom& a : r.body) schema_add(schema, a);
        schema_add(schema, r.head);
    }
    return schema;
}

inline Schema schema_of(const Program& program) {
    Schema schema = schema_of(program.rules);
    for (const Atom& a : program.database) schema_add(schema, a);
    return schema;
}

/// A mapping from variables (and, for freezing, labeled nulls) to terms.
/// Identity on everything rigid; inserting a rigid key is rejected.
class Substitution {
public:
    Substitution() = default;

    void bind(const Term& from, Term to) {
        if (from.is_rigid())
            throw InternalError("substitution key must be a variable or labeled null");
        mapping_.insert_or_assign(from, std::move(to));
    }

    const Term* lookup(const Term& t) const {
        auto it = mapping_.find(t);
        return it == mapping_.end() ? nullptr : &it->second;
    }

    Term operator()(const Term& t) const {
        const Term* mapped = lookup(t);
        return mapped ? *mapped : t;
    }

    bool empty() const { return mapping_.empty(); }
    std::size_t size() const { return mapping_.size(); }
    const std::map<Term, Term>& mapping() const { return mapping_; }

    friend auto operator<=>(const Substitution&, const Substitution&) = default;
    friend bool operator==(const Substitution&, const Substitution&) = default;

private:
    std::map<Term, Term> mapping_;
};

}  // namespace wsdlog
