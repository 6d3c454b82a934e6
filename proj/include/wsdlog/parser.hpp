#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wsdlog/errors.hpp"
#include "wsdlog/model.hpp"

namespace wsdlog {

/// Grammar, mirroring the usual rule notation:
///
///   program   := { fact | rule }
///   fact      := atom "."
///   rule      := atom {"," atom} "->" ["exists" VAR {"," VAR} ":"] atom "."
///   query     := pred "(" [VAR {"," VAR}] ")" ":-" atom {"," atom} "."
///   atom      := pred "(" [term {"," term}] ")"
///   term      := constant | VAR | quoted string | _n<k> | _f<k> | #f<k> | #_
///
/// Lowercase-initial identifiers are constants/predicates, uppercase-initial
/// are variables, `%` starts a line comment and `exists` is reserved. The
/// `_`/`#` lexeme space is reserved for generated terms; anything in it that
/// is not an exact generated lexeme is rejected.

namespace lex {

enum class Kind {
    Ident,      // lowercase-initial: predicate or constant
    Variable,   // uppercase-initial
    String,     // quoted constant
    Generated,  // _n<k>, _f<k>, #f<k>, #_
    LParen,
    RParen,
    Comma,
    Dot,
    Arrow,      // ->
    ColonDash,  // :-
    Colon,
    End,
};

struct Token {
    Kind kind;
    std::string text;  // identifier/constant spelling
    Term term;         // for Generated
    std::size_t line = 1;
    std::size_t column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string text) : text_(std::move(text)) { advance(); }

    const Token& peek() const { return current_; }

    Token next() {
        Token t = current_;
        advance();
        return t;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line_, col_); }

    char cur() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void bump() {
        if (pos_ < text_.size()) {
            if (text_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
    }

    void skip_trivia() {
        for (;;) {
            while (std::isspace(static_cast<unsigned char>(cur()))) bump();
            if (cur() == '%') {
                while (cur() != '\n' && cur() != '\0') bump();
                continue;
            }
            return;
        }
    }

    static bool ident_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    }

    void advance() {
        skip_trivia();
        Token t;
        t.line = line_;
        t.column = col_;
        char c = cur();
        if (c == '\0') {
            t.kind = Kind::End;
            current_ = t;
            return;
        }
        switch (c) {
            case '(': bump(); t.kind = Kind::LParen; current_ = t; return;
            case ')': bump(); t.kind = Kind::RParen; current_ = t; return;
            case ',': bump(); t.kind = Kind::Comma; current_ = t; return;
            case '.': bump(); t.kind = Kind::Dot; current_ = t; return;
            case '-':
                bump();
                if (cur() != '>') fail("expected '>' after '-'");
                bump();
                t.kind = Kind::Arrow;
                current_ = t;
                return;
            case ':':
                bump();
                if (cur() == '-') {
                    bump();
                    t.kind = Kind::ColonDash;
                } else {
                    t.kind = Kind::Colon;
                }
                current_ = t;
                return;
            case '"': {
                bump();
                std::string value;
                for (;;) {
                    char d = cur();
                    if (d == '\0') fail("unterminated string literal");
                    if (d == '\\') {
                        bump();
                        char e = cur();
                        if (e != '"' && e != '\\') fail("unsupported escape in string literal");
                        value.push_back(e);
                        bump();
                        continue;
                    }
                    if (d == '"') {
                        bump();
                        break;
                    }
                    value.push_back(d);
                    bump();
                }
                t.kind = Kind::String;
                t.text = value;
                current_ = t;
                return;
            }
            default:
                break;
        }
        if (c == '_' || c == '#') {
            std::string word(1, c);
            bump();
            while (ident_char(cur()) || (word == "#" && cur() == '_')) {
                word.push_back(cur());
                bump();
            }
            if (auto g = generated_term(word)) {
                t.kind = Kind::Generated;
                t.term = *g;
                t.text = word;
                current_ = t;
                return;
            }
            fail("reserved identifier '" + word + "'");
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::string word;
            while (ident_char(cur())) {
                word.push_back(cur());
                bump();
            }
            if (word == "exists") {
                // Contextual keyword, surfaced as an Ident; the parser keys
                // off the spelling. Using it as a predicate/constant errors.
                t.kind = Kind::Ident;
                t.text = word;
            } else if (std::isupper(static_cast<unsigned char>(word[0]))) {
                t.kind = Kind::Variable;
                t.text = word;
            } else {
                t.kind = Kind::Ident;
                t.text = word;
            }
            current_ = t;
            return;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    static std::optional<Term> generated_term(const std::string& word) {
        auto digits = [](const std::string& s, std::size_t from) -> std::optional<std::uint64_t> {
            if (from >= s.size()) return std::nullopt;
            std::uint64_t value = 0;
            for (std::size_t i = from; i < s.size(); ++i) {
                if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
                value = value * 10 + static_cast<std::uint64_t>(s[i] - '0');
            }
            return value;
        };
        if (word == "#_") return Term::filler();
        if (word.rfind("_n", 0) == 0)
            if (auto id = digits(word, 2)) return Term::labeled_null(*id);
        if (word.rfind("_f", 0) == 0)
            if (auto id = digits(word, 2)) return Term::frozen_null(*id);
        if (word.rfind("#f", 0) == 0)
            if (auto id = digits(word, 2)) return Term::function_constant(*id);
        return std::nullopt;
    }

    std::string text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
    Token current_;
};

}  // namespace lex

/// Parse result keeping rule provenance for diagnostics.
struct SourceProgram {
    std::vector<Rule> rules;
    std::set<Atom> facts;
    std::map<std::size_t, std::size_t> parse_origin;  // rule index -> source line

    Program program() const { return Program{rules, facts}; }
};

namespace detail {

class Parser {
public:
    explicit Parser(std::string text) : lexer_(std::move(text)) {}

    SourceProgram parse_program() {
        SourceProgram out;
        Schema schema;
        while (lexer_.peek().kind != lex::Kind::End) {
            std::size_t line = lexer_.peek().line;
            Atom first = parse_atom(schema);
            if (lexer_.peek().kind == lex::Kind::Dot) {
                lexer_.next();
                check_fact(first);
                out.facts.insert(first);
                continue;
            }
            Rule rule;
            rule.body.push_back(first);
            while (lexer_.peek().kind == lex::Kind::Comma) {
                lexer_.next();
                rule.body.push_back(parse_atom(schema));
            }
            expect(lex::Kind::Arrow, "'.', ',' or '->'");
            if (lexer_.peek().kind == lex::Kind::Ident && lexer_.peek().text == "exists") {
                lexer_.next();
                for (;;) {
                    lex::Token v = expect(lex::Kind::Variable, "existential variable");
                    rule.existential_vars.insert(Term::variable(v.text));
                    if (lexer_.peek().kind != lex::Kind::Comma) break;
                    lexer_.next();
                }
                expect(lex::Kind::Colon, "':' after existential variables");
            }
            rule.head = parse_atom(schema);
            if (lexer_.peek().kind == lex::Kind::Comma)
                throw ParseError("multi-atom heads are not supported", lexer_.peek().line,
                                 lexer_.peek().column);
            expect(lex::Kind::Dot, "'.'");
            check_rule_safety(rule);
            out.parse_origin[out.rules.size()] = line;
            out.rules.push_back(std::move(rule));
        }
        return out;
    }

    ConjunctiveQuery parse_query(Schema* program_schema) {
        Schema local;
        Schema& schema = program_schema ? *program_schema : local;
        ConjunctiveQuery q;
        lex::Token head = expect(lex::Kind::Ident, "query head predicate");
        reject_keyword(head);
        q.head_predicate = head.text;
        expect(lex::Kind::LParen, "'('");
        if (lexer_.peek().kind != lex::Kind::RParen) {
            for (;;) {
                lex::Token v = expect(lex::Kind::Variable, "answer variable");
                q.answer_terms.push_back(Term::variable(v.text));
                if (lexer_.peek().kind != lex::Kind::Comma) break;
                lexer_.next();
            }
        }
        expect(lex::Kind::RParen, "')'");
        expect(lex::Kind::ColonDash, "':-'");
        for (;;) {
            q.body.push_back(parse_atom(schema));
            if (lexer_.peek().kind != lex::Kind::Comma) break;
            lexer_.next();
        }
        expect(lex::Kind::Dot, "'.'");
        check_query_safety(q);
        return q;
    }

    std::vector<ConjunctiveQuery> parse_queries(Schema* program_schema) {
        std::vector<ConjunctiveQuery> out;
        while (lexer_.peek().kind != lex::Kind::End) out.push_back(parse_query(program_schema));
        return out;
    }

private:
    lex::Token expect(lex::Kind kind, const std::string& what) {
        const lex::Token& t = lexer_.peek();
        if (t.kind != kind)
            throw ParseError("expected " + what, t.line, t.column);
        return lexer_.next();
    }

    static void reject_keyword(const lex::Token& t) {
        if (t.text == "exists")
            throw ParseError("'exists' is a reserved word", t.line, t.column);
    }

    Atom parse_atom(Schema& schema) {
        lex::Token name = expect(lex::Kind::Ident, "predicate name");
        reject_keyword(name);
        Atom atom;
        atom.predicate = name.text;
        expect(lex::Kind::LParen, "'('");
        if (lexer_.peek().kind != lex::Kind::RParen) {
            for (;;) {
                atom.args.push_back(parse_term());
                if (lexer_.peek().kind != lex::Kind::Comma) break;
                lexer_.next();
            }
        }
        expect(lex::Kind::RParen, "')'");
        auto it = schema.find(atom.predicate);
        if (it != schema.end() && it->second != atom.arity())
            throw ParseError("arity mismatch for predicate " + atom.predicate + ": declared " +
                                 std::to_string(it->second) + ", used with " +
                                 std::to_string(atom.arity()),
                             name.line, name.column);
        schema.emplace(atom.predicate, atom.arity());
        return atom;
    }

    Term parse_term() {
        const lex::Token& t = lexer_.peek();
        switch (t.kind) {
            case lex::Kind::Ident: {
                lex::Token tok = lexer_.next();
                reject_keyword(tok);
                return Term::constant(tok.text);
            }
            case lex::Kind::String:
                return Term::constant(lexer_.next().text);
            case lex::Kind::Variable:
                return Term::variable(lexer_.next().text);
            case lex::Kind::Generated:
                return lexer_.next().term;
            default:
                throw ParseError("expected a term", t.line, t.column);
        }
    }

    static void check_fact(const Atom& fact) {
        for (const Term& t : fact.args) {
            if (t.is_variable())
                throw SemanticError("fact " + fact.predicate + " contains a variable");
            if (!t.is_constant())
                throw SemanticError("fact " + fact.predicate +
                                    " must contain only plain constants");
        }
    }

    lex::Lexer lexer_;
};

}  // namespace detail

inline SourceProgram parse_source(const std::string& text) {
    return detail::Parser(text).parse_program();
}

inline Program parse_program(const std::string& text) {
    return parse_source(text).program();
}

inline ConjunctiveQuery parse_query(const std::string& text, Schema* program_schema = nullptr) {
    detail::Parser parser(text);
    return parser.parse_query(program_schema);
}

inline std::vector<ConjunctiveQuery> parse_queries(const std::string& text,
                                                   Schema* program_schema = nullptr) {
    detail::Parser parser(text);
    return parser.parse_queries(program_schema);
}

struct CsvBinding {
    std::string predicate;
    std::size_t arity = 0;
    std::string path;
};

/// One ground atom per CSV record; every field becomes a constant. Comma
/// separated, double-quote quoting with "" as the escaped quote, UTF-8
/// passthrough. Blank records are skipped.
inline std::set<Atom> load_csv(const CsvBinding& binding) {
    std::ifstream in(binding.path, std::ios::binary);
    if (!in) throw IoError("cannot open " + binding.path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    std::set<Atom> out;
    std::size_t row = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        if (pos == text.size()) break;
        std::vector<std::string> fields;
        std::string field;
        bool quoted = false;
        bool any = false;
        for (;;) {
            char c = pos < text.size() ? text[pos] : '\n';
            if (quoted) {
                if (pos >= text.size()) throw IoError("unterminated quote in " + binding.path);
                if (c == '"') {
                    if (pos + 1 < text.size() && text[pos + 1] == '"') {
                        field.push_back('"');
                        pos += 2;
                        continue;
                    }
                    quoted = false;
                    ++pos;
                    continue;
                }
                field.push_back(c);
                ++pos;
                continue;
            }
            if (c == '"' && field.empty()) {
                quoted = true;
                any = true;
                ++pos;
                continue;
            }
            if (c == ',') {
                fields.push_back(field);
                field.clear();
                any = true;
                ++pos;
                continue;
            }
            if (c == '\n' || c == '\r' || pos >= text.size()) {
                if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
                if (pos < text.size()) ++pos;
                break;
            }
            field.push_back(c);
            any = true;
            ++pos;
        }
        if (!any && field.empty() && fields.empty()) continue;  // blank record
        fields.push_back(field);
        ++row;
        if (fields.size() != binding.arity)
            throw SemanticError("row " + std::to_string(row) + " of " + binding.path + " has " +
                                std::to_string(fields.size()) + " fields, expected " +
                                std::to_string(binding.arity));
        Atom atom;
        atom.predicate = binding.predicate;
        for (std::string& f : fields) atom.args.push_back(Term::constant(std::move(f)));
        out.insert(std::move(atom));
    }
    return out;
}

}  // namespace wsdlog
