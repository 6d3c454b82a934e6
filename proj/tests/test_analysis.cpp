#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "testutil.hpp"
#include "wsdlog/analysis.hpp"

using namespace wsdlog;
using testutil::fixtures::intro_sigma;
using testutil::fixtures::marking_example;

namespace {

Position pos(const std::string& pred, std::size_t one_based) {
    return Position{pred, one_based - 1};
}

std::set<std::pair<std::size_t, std::string>> marks(const Marking& m) { return m.marked; }

/// Path-enumeration rank oracle for small graphs: max special count over
/// bounded-length walks, infinity via special-edge cycles.
std::map<Position, Rank> rank_oracle(const DependencyGraph& g) {
    std::vector<Position> verts(g.vertices.begin(), g.vertices.end());
    auto reaches = [&](const Position& from, const Position& to) {
        std::set<Position> seen{from};
        std::vector<Position> frontier{from};
        while (!frontier.empty()) {
            Position v = frontier.back();
            frontier.pop_back();
            if (v == to) return true;
            for (const auto& [a, b] : g.normal_edges)
                if (a == v && seen.insert(b).second) frontier.push_back(b);
            for (const auto& [a, b] : g.special_edges)
                if (a == v && seen.insert(b).second) frontier.push_back(b);
        }
        return false;
    };

    std::set<Position> infinite;
    for (const auto& [u, v] : g.special_edges)
        if (reaches(v, u))
            for (const Position& p : verts)
                if (reaches(v, p)) infinite.insert(p);

    // DP over walk length: best[v] = max specials over walks of length k.
    const std::size_t bound = verts.size() * (1 + g.special_edges.size());
    std::map<Position, long> best;
    std::map<Position, long> overall;
    for (const Position& v : verts) best[v] = 0, overall[v] = 0;
    for (std::size_t k = 0; k < bound; ++k) {
        std::map<Position, long> next;
        for (const Position& v : verts) next[v] = -1;
        auto relax = [&](const Position& a, const Position& b, long w) {
            if (best[a] >= 0) next[b] = std::max(next[b], best[a] + w);
        };
        for (const auto& [a, b] : g.normal_edges) relax(a, b, 0);
        for (const auto& [a, b] : g.special_edges) relax(a, b, 1);
        for (const Position& v : verts) overall[v] = std::max(overall[v], next[v]);
        best = std::move(next);
    }

    std::map<Position, Rank> out;
    for (const Position& v : verts)
        out[v] = infinite.count(v) ? Rank{} : Rank{static_cast<std::size_t>(overall[v])};
    return out;
}

}  // namespace

TEST_CASE("marking of the three-rule example", "[analysis]") {
    Program p = testutil::prog(marking_example());
    Marking m = mark_variables(p.rules);
    CHECK(marks(m) == std::set<std::pair<std::size_t, std::string>>{
                          {0, "X"}, {0, "Z"}, {2, "X"}, {2, "Z"}});
}

TEST_CASE("marking leaves fully propagated rules unmarked", "[analysis]") {
    Program p = testutil::prog("p(X,Y) -> q(X,Y).");
    CHECK(mark_variables(p.rules).marked.empty());
}

TEST_CASE("marking fixpoint on the four-rule set", "[analysis]") {
    // The propagation closes over everything reachable: X in rule 2 reaches
    // p[1] through rule 1's marked body, which marks rule 0's X in turn.
    Program p = testutil::prog(intro_sigma());
    Marking m = mark_variables(p.rules);
    CHECK(marks(m) == std::set<std::pair<std::size_t, std::string>>{{0, "X"},
                                                                    {1, "X"},
                                                                    {1, "Y"},
                                                                    {2, "X"},
                                                                    {2, "Y"},
                                                                    {2, "Z"},
                                                                    {3, "X"}});
    // The repeated variables the classification hinges on:
    CHECK(m.is_marked(2, "Y"));
    CHECK_FALSE(m.is_marked(3, "Y"));
}

TEST_CASE("marking fixpoint is schedule independent", "[analysis]") {
    std::mt19937_64 rng(5);
    testutil::FixtureGen gen(41);
    for (int round = 0; round < 60; ++round) {
        auto program = gen.try_program(4, 6);
        if (!program) continue;
        const std::vector<Rule>& rules = program->rules;
        Marking expected = mark_variables(rules);

        // Randomized schedule: apply one eligible propagation at a time.
        Marking m;
        for (std::size_t i = 0; i < rules.size(); ++i) {
            std::set<Term> hv = rules[i].head_variables();
            for (const Term& v : rules[i].body_variables())
                if (!hv.count(v)) m.marked.emplace(i, v.name());
        }
        for (;;) {
            std::vector<std::pair<std::size_t, std::string>> eligible;
            std::set<Position> marked_positions;
            for (std::size_t i = 0; i < rules.size(); ++i)
                for (const Atom& a : rules[i].body)
                    for (std::size_t k = 0; k < a.args.size(); ++k)
                        if (a.args[k].is_variable() && m.is_marked(i, a.args[k].name()))
                            marked_positions.insert(Position{a.predicate, k});
            for (std::size_t i = 0; i < rules.size(); ++i) {
                std::set<Term> bv = rules[i].body_variables();
                const Atom& head = rules[i].head;
                for (std::size_t k = 0; k < head.args.size(); ++k)
                    if (head.args[k].is_variable() && bv.count(head.args[k]) &&
                        marked_positions.count(Position{head.predicate, k}) &&
                        !m.is_marked(i, head.args[k].name()))
                        eligible.emplace_back(i, head.args[k].name());
            }
            if (eligible.empty()) break;
            m.marked.insert(eligible[rng() % eligible.size()]);
        }
        CHECK(m.marked == expected.marked);
    }
}

TEST_CASE("dependency graph of the three-rule example", "[analysis]") {
    Program p = testutil::prog(marking_example());
    DependencyGraph g = build_dependency_graph(p.rules);
    CHECK(g.special_edges ==
          std::set<std::pair<Position, Position>>{{pos("u", 1), pos("r", 1)}});
    for (auto edge : std::vector<std::pair<Position, Position>>{
             {pos("r", 1), pos("s", 1)},
             {pos("p", 1), pos("s", 1)},
             {pos("r", 2), pos("s", 2)},
             {pos("p", 2), pos("s", 3)},
             {pos("s", 2), pos("u", 1)},
             {pos("u", 1), pos("r", 2)}})
        CHECK(g.normal_edges.count(edge));
}

TEST_CASE("dependency graph edge cases", "[analysis]") {
    Program no_exist = testutil::prog("p(X,Y) -> q(Y,X).\nq(X,Y),p(Y,Z) -> p(X,Z).");
    CHECK(build_dependency_graph(no_exist.rules).special_edges.empty());

    // Edges are anchored on head variables only: X does not occur in the
    // head, so nothing leaves p[1].
    Program self = testutil::prog("p(X,Y) -> exists Z: p(Y,Z).");
    DependencyGraph g = build_dependency_graph(self.rules);
    CHECK(g.normal_edges ==
          std::set<std::pair<Position, Position>>{{pos("p", 2), pos("p", 1)}});
    CHECK(g.special_edges ==
          std::set<std::pair<Position, Position>>{{pos("p", 2), pos("p", 2)}});
}

TEST_CASE("ranks of the three-rule example", "[analysis]") {
    Program p = testutil::prog(marking_example());
    RankMap ranks = compute_ranks(build_dependency_graph(p.rules));
    CHECK(ranks.pi_inf().empty());
    for (auto [pred, idx] : std::vector<std::pair<std::string, std::size_t>>{
             {"u", 1}, {"s", 2}, {"r", 2}, {"s", 3}, {"p", 1}, {"p", 2}})
        CHECK(ranks.rank.at(pos(pred, idx)) == Rank{0});
    CHECK(ranks.rank.at(pos("r", 1)) == Rank{1});
    CHECK(ranks.rank.at(pos("s", 1)) == Rank{1});
}

TEST_CASE("ranks of the four-rule set", "[analysis]") {
    Program p = testutil::prog(intro_sigma());
    RankMap ranks = compute_ranks(build_dependency_graph(p.rules));
    CHECK(ranks.pi_f() == std::set<Position>{pos("v", 1), pos("r", 1), pos("r", 2)});
    CHECK(ranks.pi_inf() ==
          std::set<Position>{pos("p", 1), pos("p", 2), pos("t", 1), pos("t", 2)});
}

TEST_CASE("ranks over a declared schema with no rules", "[analysis]") {
    Schema extra{{"p", 2}, {"q", 1}};
    RankMap ranks = compute_ranks(build_dependency_graph({}, extra));
    REQUIRE(ranks.rank.size() == 3);
    for (const auto& [position, r] : ranks.rank) CHECK(r == Rank{0});
}

TEST_CASE("ranks agree with path enumeration on random graphs", "[analysis]") {
    std::mt19937_64 rng(17);
    for (int round = 0; round < 300; ++round) {
        DependencyGraph g;
        std::size_t n = 2 + rng() % 7;
        std::vector<Position> verts;
        for (std::size_t i = 0; i < n; ++i) {
            verts.push_back(Position{"v" + std::to_string(i), 0});
            g.vertices.insert(verts.back());
        }
        std::size_t edges = rng() % (2 * n);
        for (std::size_t e = 0; e < edges; ++e) {
            auto& side = (rng() % 4 == 0) ? g.special_edges : g.normal_edges;
            side.emplace(verts[rng() % n], verts[rng() % n]);
        }
        RankMap got = compute_ranks(g);
        auto expected = rank_oracle(g);
        for (const Position& v : verts) {
            CAPTURE(round, v.predicate);
            CHECK(got.rank.at(v) == expected.at(v));
        }
    }
}

TEST_CASE("classification of the worked examples", "[analysis]") {
    Program example1 = testutil::prog(marking_example());
    ClassReport r1 = classify(example1.rules);
    CHECK_FALSE(r1.sticky);
    CHECK(r1.weakly_acyclic);
    CHECK(r1.weakly_sticky);

    Program sigma = testutil::prog(intro_sigma());
    ClassReport r2 = classify(sigma.rules);
    CHECK(r2.weakly_sticky);
    CHECK_FALSE(r2.weakly_acyclic);
    CHECK_FALSE(r2.sticky);

    CHECK_FALSE(r2.zero_infinity);  // Y sits at r[2], rank 1

    // the empty rule set is vacuously everything
    ClassReport r3 = classify({});
    CHECK(r3.sticky);
    CHECK(r3.weakly_acyclic);
    CHECK(r3.weakly_sticky);
    CHECK(r3.zero_infinity);
}

TEST_CASE("class implications and rank partition on random rule sets", "[analysis]") {
    testutil::FixtureGen gen(99);
    for (int round = 0; round < 200; ++round) {
        Program p = gen.raw_program(4);
        ClassReport report = classify(p.rules);
        if (report.sticky) CHECK(report.weakly_sticky);
        if (report.weakly_acyclic) CHECK(report.weakly_sticky);

        RankMap ranks = compute_ranks(build_dependency_graph(p.rules));
        std::set<Position> all;
        for (const auto& [position, r] : ranks.rank) all.insert(position);
        std::set<Position> f = ranks.pi_f(), inf = ranks.pi_inf();
        std::set<Position> both;
        std::set_union(f.begin(), f.end(), inf.begin(), inf.end(),
                       std::inserter(both, both.end()));
        CHECK(both == all);
        std::set<Position> overlap;
        std::set_intersection(f.begin(), f.end(), inf.begin(), inf.end(),
                              std::inserter(overlap, overlap.end()));
        CHECK(overlap.empty());
    }
}
