#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "testutil.hpp"
#include "wsdlog/parser.hpp"
#include "wsdlog/printer.hpp"

using namespace wsdlog;
using testutil::atom;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("parse_program on the intro fragment", "[syntax]") {
    Program p = parse_program(
        "emp(joe).\n"
        "emp(X) -> exists Y: rep(X,Y).\n"
        "rep(X,Y) -> mgr(Y).\n");
    CHECK(p.database.size() == 1);
    REQUIRE(p.rules.size() == 2);
    CHECK(p.rules[0].existential_vars == std::set<Term>{Term::variable("Y")});
    CHECK(p.rules[1].existential_vars.empty());
    CHECK(p.rules[1].head == atom("mgr(Y)"));
}

TEST_CASE("parse_program edge cases", "[syntax]") {
    Program empty = parse_program("");
    CHECK(empty.rules.empty());
    CHECK(empty.database.empty());

    CHECK_THROWS_AS(parse_program("p(X) -> q(X,Y)."), SemanticError);  // unsafe head
    CHECK_THROWS_AS(parse_program("p(X,X) -> exists X: q(X)."), SemanticError);
    CHECK_THROWS_AS(parse_program("p(a). p(a,b)."), ParseError);       // arity mismatch
    CHECK_THROWS_AS(parse_program("p(X) -> q(X), r(X)."), ParseError); // multi-atom head
    CHECK_THROWS_AS(parse_program("p(a"), ParseError);
    CHECK_THROWS_AS(parse_program("p(_n1)."), SemanticError);          // null in a fact
    CHECK_THROWS_AS(parse_program("exists(a)."), ParseError);

    // comments and line/column reporting
    CHECK_NOTHROW(parse_program("% a comment\np(a).\n"));
    try {
        parse_program("p(a).\nq(b) -> ");
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("reserved lexeme space", "[syntax]") {
    // Exact generated lexemes parse as the generated kinds.
    Program p = parse_program("p(a,b) -> p(b,_n1).\np(b,_f1) -> p(_f1,#f2).\nq(#_) -> q(#_).");
    CHECK(p.rules[0].head == atom("p(b,_n1)"));
    CHECK(p.rules[1].head.args[1] == Term::function_constant(2));
    CHECK(p.rules[2].head.args[0] == Term::filler());

    // Anything else in the _/# namespace is rejected.
    CHECK_THROWS_AS(parse_program("p(_foo)."), ParseError);
    CHECK_THROWS_AS(parse_program("p(_n)."), ParseError);
    CHECK_THROWS_AS(parse_program("p(_nx1)."), ParseError);
    CHECK_THROWS_AS(parse_program("p(#x)."), ParseError);
    CHECK_THROWS_AS(parse_program("p(#f)."), ParseError);
}

TEST_CASE("parse_query", "[syntax]") {
    ConjunctiveQuery q1 = parse_query("q1(W1) :- rep(W1,W2).");
    CHECK(q1.head_predicate == "q1");
    CHECK(q1.answer_terms == std::vector<Term>{Term::variable("W1")});

    ConjunctiveQuery bcq = parse_query("q() :- u(X).");
    CHECK(bcq.is_boolean());

    CHECK_THROWS_AS(parse_query("q(Z) :- p(X)."), SemanticError);  // Z unbound

    // arity checked against a program schema when one is supplied
    Schema schema{{"p", 2}};
    CHECK_THROWS_AS(parse_query("q(X) :- p(X).", &schema), ParseError);
}

TEST_CASE("load_csv", "[syntax]") {
    auto single = write_temp("wsdlog_csv1.csv", "a,b\n");
    CHECK(load_csv({"p", 2, single.string()}) == std::set<Atom>{atom("p(a,b)")});

    auto dup = write_temp("wsdlog_csv2.csv", "a,b\na,b\n");
    CHECK(load_csv({"p", 2, dup.string()}) == std::set<Atom>{atom("p(a,b)")});

    auto bad = write_temp("wsdlog_csv3.csv", "a\n");
    try {
        load_csv({"p", 2, bad.string()});
        FAIL("expected arity error");
    } catch (const SemanticError& e) {
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }

    CHECK_THROWS_AS(load_csv({"p", 2, "/nonexistent/x.csv"}), IoError);

    auto quoted = write_temp("wsdlog_csv4.csv", "\"New York\",\"say \"\"hi\"\"\"\nplain,x\n");
    auto atoms = load_csv({"p", 2, quoted.string()});
    REQUIRE(atoms.size() == 2);
    CHECK(atoms.count(Atom{"p", {Term::constant("New York"), Term::constant("say \"hi\"")}}));
}

TEST_CASE("serialize_program canonical text", "[syntax]") {
    Program gp;
    gp.rules.push_back(Rule{{atom("p(a,b)")}, atom("p(b,_n1)"), {}});
    CHECK(serialize_program(gp) == "p(a,b) -> p(b,_n1).\n");

    CHECK(serialize_program(Program{}) == "");

    Program xp;
    xp.rules.push_back(Rule{{atom("v(X)")},
                            Atom{"r_x1", {Term::variable("X"), Term::function_constant(1),
                                          Term::variable("X")}},
                            {}});
    CHECK(serialize_program(xp) == "v(X) -> r_x1(X,#f1,X).\n");

    // facts print before rules, in canonical set order
    Program both = parse_program("p(b,a).\np(a,b).\np(X,Y) -> exists Z: p(Y,Z).");
    CHECK(serialize_program(both) == "p(a,b).\np(b,a).\np(X,Y) -> exists Z: p(Y,Z).\n");
}

TEST_CASE("constants that do not lex plainly are quoted", "[syntax]") {
    Program p;
    p.database.insert(Atom{"p", {Term::constant("New York"), Term::constant("_n1")}});
    std::string text = serialize_program(p);
    CHECK(text == "p(\"New York\",\"_n1\").\n");
    CHECK(parse_program(text) == p);
}

TEST_CASE("parse of serialize is the identity", "[syntax]") {
    std::mt19937_64 rng(23);
    const std::vector<std::string> preds = {"p", "r", "s"};
    const std::vector<std::string> vars = {"X", "Y", "Z"};

    for (int round = 0; round < 200; ++round) {
        Program p;
        std::size_t nfacts = rng() % 4;
        for (std::size_t i = 0; i < nfacts; ++i) {
            Atom f;
            f.predicate = preds[rng() % preds.size()];
            std::size_t arity = 1 + (f.predicate == "p");
            for (std::size_t k = 0; k < arity; ++k)
                f.args.push_back(Term::constant(std::string(1, 'a' + rng() % 3)));
            p.database.insert(f);
        }
        std::size_t nrules = 1 + rng() % 3;
        for (std::size_t i = 0; i < nrules; ++i) {
            bool ground = rng() % 3 == 0;
            Rule rule;
            auto term = [&]() -> Term {
                if (ground) {
                    switch (rng() % 5) {
                        case 0: return Term::labeled_null(rng() % 4);
                        case 1: return Term::frozen_null(rng() % 4);
                        case 2: return Term::function_constant(1 + rng() % 3);
                        case 3: return Term::filler();
                        default: return Term::constant(std::string(1, 'a' + rng() % 3));
                    }
                }
                if (rng() % 3 == 0) return Term::constant(std::string(1, 'a' + rng() % 3));
                return Term::variable(vars[rng() % vars.size()]);
            };
            std::size_t nbody = 1 + rng() % 2;
            for (std::size_t b = 0; b < nbody; ++b) {
                Atom a;
                a.predicate = preds[rng() % preds.size()];
                std::size_t arity = 1 + (a.predicate == "p");
                for (std::size_t k = 0; k < arity; ++k) a.args.push_back(term());
                rule.body.push_back(a);
            }
            Atom head;
            head.predicate = preds[rng() % preds.size()];
            std::size_t arity = 1 + (head.predicate == "p");
            std::set<Term> bv = rule.body_variables();
            std::vector<Term> bvv(bv.begin(), bv.end());
            for (std::size_t k = 0; k < arity; ++k) {
                if (!ground && !bvv.empty() && rng() % 3 != 0) {
                    head.args.push_back(bvv[rng() % bvv.size()]);
                } else if (!ground && rng() % 2 == 0) {
                    Term e = Term::variable("E" + std::to_string(k));
                    head.args.push_back(e);
                    rule.existential_vars.insert(e);
                } else {
                    head.args.push_back(ground ? term()
                                               : Term::constant(std::string(1, 'a' + rng() % 3)));
                }
            }
            rule.head = head;
            check_rule_safety(rule);
            p.rules.push_back(rule);
        }
        CAPTURE(serialize_program(p));
        CHECK(parse_program(serialize_program(p)) == p);
    }
}
