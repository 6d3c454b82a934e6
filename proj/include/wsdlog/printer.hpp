#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "wsdlog/model.hpp"

namespace wsdlog {

/// Canonical text rendering. Generated terms are bit-exact by contract:
/// labeled null `_n<id>`, frozen null `_f<id>`, function constant `#f<id>`,
/// filler `#_`. Constants that do not lex as plain identifiers are quoted.

namespace detail {

inline bool is_plain_constant_name(const std::string& name) {
    if (name.empty() || !std::islower(static_cast<unsigned char>(name[0]))) return false;
    for (char c : name)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return name != "exists";
}

inline std::string quoted(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace detail

inline std::string to_string(const Term& t) {
    switch (t.kind()) {
        case TermKind::Constant:
            return detail::is_plain_constant_name(t.name()) ? t.name() : detail::quoted(t.name());
        case TermKind::Variable:
            return t.name();
        case TermKind::LabeledNull:
            return "_n" + std::to_string(t.id());
        case TermKind::FrozenNull:
            return "_f" + std::to_string(t.id());
        case TermKind::FunctionConstant:
            return "#f" + std::to_string(t.id());
        case TermKind::Filler:
            return "#_";
    }
    return "?";
}

inline std::string to_string(const Atom& a) {
    std::string out = a.predicate + "(";
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (i) out.push_back(',');
        out += to_string(a.args[i]);
    }
    out.push_back(')');
    return out;
}

inline std::string to_string(const std::vector<Atom>& conjunction) {
    std::string out;
    for (std::size_t i = 0; i < conjunction.size(); ++i) {
        if (i) out.push_back(',');
        out += to_string(conjunction[i]);
    }
    return out;
}

inline std::string to_string(const Rule& r) {
    std::string out = to_string(r.body) + " -> ";
    if (!r.existential_vars.empty()) {
        out += "exists ";
        // Render in order of first occurrence in the head.
        std::vector<Term> seen;
        for (const Term& t : r.head.args)
            if (r.existential_vars.count(t) &&
                std::find(seen.begin(), seen.end(), t) == seen.end())
                seen.push_back(t);
        for (const Term& t : r.existential_vars)
            if (std::find(seen.begin(), seen.end(), t) == seen.end()) seen.push_back(t);
        for (std::size_t i = 0; i < seen.size(); ++i) {
            if (i) out.push_back(',');
            out += seen[i].name();
        }
        out += ": ";
    }
    out += to_string(r.head);
    out.push_back('.');
    return out;
}

inline std::string to_string(const ConjunctiveQuery& q) {
    std::string out = q.head_predicate + "(";
    for (std::size_t i = 0; i < q.answer_terms.size(); ++i) {
        if (i) out.push_back(',');
        out += to_string(q.answer_terms[i]);
    }
    out += ") :- " + to_string(q.body);
    out.push_back('.');
    return out;
}

inline std::string to_string(const Position& p) {
    return p.predicate + "[" + std::to_string(p.index + 1) + "]";
}

/// Facts first (canonical set order), then rules in order, one per line.
inline std::string serialize_program(const Program& p) {
    std::string out;
    for (const Atom& fact : p.database) {
        out += to_string(fact);
        out += ".\n";
    }
    for (const Rule& r : p.rules) {
        out += to_string(r);
        out.push_back('\n');
    }
    return out;
}

inline std::string serialize_queries(const std::vector<ConjunctiveQuery>& queries) {
    std::string out;
    for (const ConjunctiveQuery& q : queries) {
        out += to_string(q);
        out.push_back('\n');
    }
    return out;
}

}  // namespace wsdlog
