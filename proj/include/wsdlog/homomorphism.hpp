#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wsdlog/model.hpp"

namespace wsdlog {

inline Atom apply(const Substitution& subst, const Atom& atom) {
    Atom out;
    out.predicate = atom.predicate;
    out.args.reserve(atom.args.size());
    for (const Term& t : atom.args) out.args.push_back(subst(t));
    return out;
}

inline std::vector<Atom> apply(const Substitution& subst, const std::vector<Atom>& conjunction) {
    std::vector<Atom> out;
    out.reserve(conjunction.size());
    for (const Atom& a : conjunction) out.push_back(apply(subst, a));
    return out;
}

inline Rule apply(const Substitution& subst, const Rule& rule) {
    Rule out;
    out.body = wsdlog::apply(subst, rule.body);
    out.head = apply(subst, rule.head);
    // Renamed existentials stay existential; ones instantiated to ground
    // terms stop being variables at all.
    for (const Term& v : rule.existential_vars) {
        Term image = subst(v);
        if (image.is_variable()) out.existential_vars.insert(image);
    }
    return out;
}

/// Instance of ground atoms with per-argument lookup indexes. Matching scans
/// the smallest bucket available for the pattern at hand.
class AtomIndex {
public:
    AtomIndex() = default;

    template <typename Range>
    explicit AtomIndex(const Range& atoms) {
        for (const Atom& a : atoms) insert(a);
    }

    bool insert(const Atom& atom) {
        if (!atoms_.insert(atom).second) return false;
        by_predicate_[atom.predicate].push_back(atom);
        for (std::size_t i = 0; i < atom.args.size(); ++i)
            by_arg_[ArgKey{atom.predicate, i, atom.args[i]}].push_back(atom);
        return true;
    }

    bool contains(const Atom& atom) const { return atoms_.count(atom) != 0; }
    const std::set<Atom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }

    /// Atoms that can match `pattern` once the bound arguments of `binding`
    /// are substituted in. A superset: callers still unify argument-wise.
    const std::vector<Atom>& candidates(const Atom& pattern,
                                        const std::map<Term, Term>& binding) const {
        static const std::vector<Atom> kEmpty;
        const std::vector<Atom>* best = nullptr;
        for (std::size_t i = 0; i < pattern.args.size(); ++i) {
            Term value = pattern.args[i];
            if (value.is_variable()) {
                auto it = binding.find(value);
                if (it == binding.end()) continue;
                value = it->second;
            }
            auto it = by_arg_.find(ArgKey{pattern.predicate, i, value});
            if (it == by_arg_.end()) return kEmpty;
            if (!best || it->second.size() < best->size()) best = &it->second;
        }
        if (best) return *best;
        auto it = by_predicate_.find(pattern.predicate);
        return it == by_predicate_.end() ? kEmpty : it->second;
    }

private:
    struct ArgKey {
        std::string predicate;
        std::size_t index;
        Term term;
        friend auto operator<=>(const ArgKey&, const ArgKey&) = default;
    };

    std::set<Atom> atoms_;
    std::map<std::string, std::vector<Atom>> by_predicate_;
    std::map<ArgKey, std::vector<Atom>> by_arg_;
};

/// Enumerates every variable binding that maps each atom of the conjunction
/// into the instance. Only variables bind; labeled nulls and the rigid kinds
/// on the pattern side must match themselves. Visit order is deterministic
/// but unspecified; find_homomorphisms sorts canonically.
inline void match_conjunction(const std::vector<Atom>& conjunction, const AtomIndex& instance,
                              const std::function<void(const std::map<Term, Term>&)>& yield,
                              std::map<Term, Term> binding = {}) {
    const std::size_t n = conjunction.size();
    std::vector<bool> done(n, false);

    std::function<void(std::size_t)> go = [&](std::size_t matched) {
        if (matched == n) {
            yield(binding);
            return;
        }
        // Pick the unmatched atom with the most bound arguments so the index
        // lookup stays selective.
        std::size_t pick = 0;
        std::size_t best_bound = 0;
        bool found = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (done[i]) continue;
            std::size_t bound = 0;
            for (const Term& t : conjunction[i].args)
                if (!t.is_variable() || binding.count(t)) ++bound;
            if (!found || bound > best_bound) {
                pick = i;
                best_bound = bound;
                found = true;
            }
        }
        done[pick] = true;
        const Atom& pattern = conjunction[pick];
        for (const Atom& fact : instance.candidates(pattern, binding)) {
            if (fact.args.size() != pattern.args.size()) continue;
            std::vector<Term> bound_here;
            bool ok = true;
            for (std::size_t i = 0; i < pattern.args.size() && ok; ++i) {
                const Term& p = pattern.args[i];
                if (p.is_variable()) {
                    auto it = binding.find(p);
                    if (it == binding.end()) {
                        binding.emplace(p, fact.args[i]);
                        bound_here.push_back(p);
                    } else if (it->second != fact.args[i]) {
                        ok = false;
                    }
                } else if (p != fact.args[i]) {
                    ok = false;
                }
            }
            if (ok) go(matched + 1);
            for (const Term& v : bound_here) binding.erase(v);
        }
        done[pick] = false;
    };

    go(0);
}

/// Complete enumeration, sorted lexicographically by (variable name, bound
/// term) under the canonical term ordering.
inline std::vector<Substitution> find_homomorphisms(const std::vector<Atom>& conjunction,
                                                    const AtomIndex& instance) {
    std::set<Term> vars;
    for (const Atom& a : conjunction)
        for (const Term& t : a.args)
            if (t.is_variable()) vars.insert(t);

    std::set<Substitution> results;
    match_conjunction(conjunction, instance, [&](const std::map<Term, Term>& binding) {
        Substitution s;
        for (const Term& v : vars) {
            auto it = binding.find(v);
            s.bind(v, it == binding.end() ? v : it->second);
        }
        results.insert(std::move(s));
    });
    return std::vector<Substitution>(results.begin(), results.end());
}

inline std::vector<Substitution> find_homomorphisms(const std::vector<Atom>& conjunction,
                                                    const std::set<Atom>& instance) {
    return find_homomorphisms(conjunction, AtomIndex(instance));
}

/// True iff some homomorphism h maps `from` onto `onto` while fixing every
/// term that occurs in `from` at a position in `pi`. Both atoms must be
/// ground; labeled nulls of `from` may be remapped, everything rigid not.
inline bool pi_homomorphic(const Atom& from, const Atom& onto, const std::set<Position>& pi) {
    auto require_ground = [](const Atom& a) {
        for (const Term& t : a.args)
            if (t.is_variable()) throw SemanticError("pi_homomorphic requires ground atoms");
    };
    require_ground(from);
    require_ground(onto);
    if (from.predicate != onto.predicate || from.args.size() != onto.args.size()) return false;

    std::set<Term> fixed;
    for (std::size_t i = 0; i < from.args.size(); ++i)
        if (pi.count(Position{from.predicate, i})) fixed.insert(from.args[i]);

    std::map<Term, Term> mapping;
    for (std::size_t i = 0; i < from.args.size(); ++i) {
        const Term& src = from.args[i];
        const Term& dst = onto.args[i];
        if (src.is_labeled_null() && !fixed.count(src)) {
            auto [it, inserted] = mapping.emplace(src, dst);
            if (!inserted && it->second != dst) return false;
        } else if (src != dst) {
            return false;
        }
    }
    return true;
}

/// Constants occurring in a database; generated kinds are excluded by type.
inline std::set<Term> active_domain(const std::set<Atom>& database) {
    std::set<Term> out;
    for (const Atom& a : database)
        for (const Term& t : a.args)
            if (t.is_constant()) out.insert(t);
    return out;
}

}  // namespace wsdlog
