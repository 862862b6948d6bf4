#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "sara/alignment.hpp"
#include "sara/amr_graph.hpp"
#include "sara/errors.hpp"
#include "sara/rng.hpp"
#include "support/oracles.hpp"

using namespace sara;
namespace st = sara::testing;

TEST_SUITE_BEGIN("alignment");

namespace {

const char* kSampleGraph =
    "(w / want-01 :arg0 (b / boy) :arg1 (g / go-02 :arg0 b))";

std::set<ProjectedEdge> as_set(const ProjectedEdgeSet& edges) {
  return {edges.triples.begin(), edges.triples.end()};
}

}  // namespace

TEST_CASE("extend_alignment expands words into their subwords") {
  // Three words split as [0,1], [2], [3,4].
  const std::vector<std::vector<std::size_t>> subwords = {{0, 1}, {2}, {3, 4}};
  const std::map<std::string, std::vector<std::size_t>> words = {
      {"w", {0}}, {"b", {2}}};
  const Alignment out = extend_alignment(words, subwords);
  CHECK(out.pairs.at("w") == std::set<std::size_t>{0, 1});
  CHECK(out.pairs.at("b") == std::set<std::size_t>{3, 4});

  CHECK_THROWS_AS(extend_alignment({{"w", {5}}}, subwords), DataError);
  CHECK_THROWS_AS(extend_alignment({{"w", {0}}}, {{}}), DataError);
}

TEST_CASE("semantic_token_set unions all aligned positions") {
  Alignment a;
  a.pairs["x"] = {1, 4};
  a.pairs["y"] = {2};
  CHECK(semantic_token_set(a) == std::set<std::size_t>{1, 2, 4});
  CHECK(semantic_token_set(Alignment{}).empty());
}

TEST_CASE("alignment validation") {
  const AmrGraph g = parse_penman(kSampleGraph);
  Alignment a;
  a.pairs["w"] = {0};
  a.pairs["b"] = {1, 2};
  CHECK_NOTHROW(a.validate(g, 5));

  SUBCASE("unknown node") {
    a.pairs["zz"] = {3};
    CHECK_THROWS_AS(a.validate(g, 5), DataError);
  }
  SUBCASE("token out of bounds") {
    a.pairs["g"] = {5};
    CHECK_THROWS_AS(a.validate(g, 5), DataError);
  }
  SUBCASE("token owned by two nodes") {
    a.pairs["g"] = {1};
    CHECK_THROWS_AS(a.validate(g, 5), DataError);
  }
}

TEST_CASE("project_edges on a hand-checked instance") {
  const AmrGraph g = parse_penman(kSampleGraph);
  Alignment a;
  a.pairs["w"] = {3, 4};
  a.pairs["b"] = {1};
  a.pairs["g"] = {6, 7};

  SUBCASE("first subword keeps one triple per edge") {
    const auto got = as_set(project_edges(g, a, ProjectionMode::FirstSubword));
    const std::set<ProjectedEdge> expected = {
        {3, ":arg0", 1}, {3, ":arg1", 6}, {6, ":arg0", 1}};
    CHECK(got == expected);
  }
  SUBCASE("all pairs is the full cross product") {
    const auto got = as_set(project_edges(g, a, ProjectionMode::AllPairs));
    const std::set<ProjectedEdge> expected = {
        {3, ":arg0", 1}, {4, ":arg0", 1}, {3, ":arg1", 6}, {3, ":arg1", 7},
        {4, ":arg1", 6}, {4, ":arg1", 7}, {6, ":arg0", 1}, {7, ":arg0", 1}};
    CHECK(got == expected);
  }
  SUBCASE("unaligned endpoints are skipped, not errors") {
    a.pairs.erase("g");
    const auto got = as_set(project_edges(g, a, ProjectionMode::FirstSubword));
    CHECK(got == std::set<ProjectedEdge>{{3, ":arg0", 1}});
  }
  SUBCASE("duplicate triples collapse") {
    // Parallel edges with the same label project to one identical triple.
    const AmrGraph dup = parse_penman("(x / a :mod (y / b) :mod y)");
    Alignment da;
    da.pairs["x"] = {0};
    da.pairs["y"] = {1};
    const ProjectedEdgeSet got =
        project_edges(dup, da, ProjectionMode::FirstSubword);
    CHECK(got.triples.size() == 1);
  }
}

TEST_CASE("project_edges output is sorted and duplicate-free") {
  Rng rng(99);
  for (int i = 0; i < 50; ++i) {
    const AmrGraph g = st::random_graph(rng, 8, 3);
    const Alignment a = st::random_alignment(g, rng, 30);
    const ProjectedEdgeSet s = project_edges(g, a, ProjectionMode::AllPairs);
    CHECK(std::is_sorted(s.triples.begin(), s.triples.end()));
    CHECK(std::adjacent_find(s.triples.begin(), s.triples.end()) ==
          s.triples.end());
  }
}

TEST_CASE("project_edges agrees with the reference on random instances") {
  Rng rng(4242);
  for (int i = 0; i < 100; ++i) {
    const AmrGraph g = st::random_graph(rng, 8, 3);
    const Alignment a = st::random_alignment(g, rng, 24 + rng.uniform_int(40));
    for (ProjectionMode mode :
         {ProjectionMode::FirstSubword, ProjectionMode::AllPairs}) {
      const auto got = as_set(project_edges(g, a, mode));
      CHECK(got == st::project_reference(g, a, mode));
    }
  }
}

TEST_CASE("parse_jamr_alignment resolves node paths") {
  const AmrGraph g = parse_penman(kSampleGraph);
  // Children in out-edge order: w -> [b, g], g -> [b].
  const auto out =
      parse_jamr_alignment(g, "0-1|0 1-2|0.0 3-5|0.1");
  CHECK(out.at("w") == std::vector<std::size_t>{0});
  CHECK(out.at("b") == std::vector<std::size_t>{1});
  CHECK(out.at("g") == std::vector<std::size_t>{3, 4});

  SUBCASE("plus joins several paths on one span") {
    const auto multi = parse_jamr_alignment(g, "2-3|0.1+0.1.0");
    CHECK(multi.at("g") == std::vector<std::size_t>{2});
    CHECK(multi.at("b") == std::vector<std::size_t>{2});
  }
  SUBCASE("repeated spans for one node deduplicate") {
    const auto rep = parse_jamr_alignment(g, "1-3|0.0 2-4|0.0");
    CHECK(rep.at("b") == std::vector<std::size_t>{1, 2, 3});
  }
  SUBCASE("whitespace and empty line tolerance") {
    CHECK(parse_jamr_alignment(g, "").empty());
    CHECK(parse_jamr_alignment(g, "   ").empty());
  }
  SUBCASE("malformed records throw") {
    CHECK_THROWS_AS(parse_jamr_alignment(g, "0|0"), DataError);
    CHECK_THROWS_AS(parse_jamr_alignment(g, "1-1|0"), DataError);
    CHECK_THROWS_AS(parse_jamr_alignment(g, "2-1|0"), DataError);
    CHECK_THROWS_AS(parse_jamr_alignment(g, "0-1|1"), DataError);
    CHECK_THROWS_AS(parse_jamr_alignment(g, "0-1|0.9"), DataError);
    CHECK_THROWS_AS(parse_jamr_alignment(g, "0-1|0..1"), DataError);
    CHECK_THROWS_AS(parse_jamr_alignment(g, "x-y|0"), DataError);
  }
}

TEST_SUITE_END();
