#include <doctest.h>

#include <algorithm>

#include "bmfa/error.hpp"
#include "bmfa/fixtures.hpp"
#include "bmfa/system_model.hpp"

using namespace bmfa;

namespace {

SystemDefinition nested_definition() {
  SystemDefinition def;
  def.children = {{"1", false}, {"2", false}, {"3", false}, {"4", true}, {"5", true}};
  def.parents = {{"A", {"1", "2"}}, {"B", {"A", "3"}}, {"C", {"4", "5"}}};
  def.flows = {{"1", "3"}, {"1", "4"}, {"1", "5"}, {"2", "4"}, {"2", "5"},
               {"3", "4"}, {"3", "5"}, {"4", "1"}, {"4", "2"}, {"4", "3"}};
  return def;
}

}  // namespace

TEST_CASE("nested system gets 2 stocks and 10 flows in lexicographic order") {
  const SystemGraph g = build_graph(nested_definition());
  const VariableIndex& idx = g.index();
  CHECK(idx.size() == 12);
  CHECK(idx.stock_count() == 2);
  const std::vector<std::string> expected = {"S:4",    "S:5",    "U:1->3", "U:1->4", "U:1->5", "U:2->4",
                                             "U:2->5", "U:3->4", "U:3->5", "U:4->1", "U:4->2", "U:4->3"};
  CHECK(idx.names() == expected);
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(*idx.find(expected[i]) == i);
}

TEST_CASE("variable order does not depend on declaration order") {
  SystemDefinition a = nested_definition();
  SystemDefinition b = a;
  std::reverse(b.children.begin(), b.children.end());
  std::reverse(b.flows.begin(), b.flows.end());
  std::reverse(b.parents.begin(), b.parents.end());
  CHECK(build_graph(a).index() == build_graph(b).index());
}

TEST_CASE("parents flatten to their child sets") {
  const SystemGraph g = build_graph(nested_definition());
  CHECK(g.expand_parent("B") == std::vector<std::string>{"1", "2", "3"});
  CHECK(g.expand_parent("A") == std::vector<std::string>{"1", "2"});
  CHECK(g.expand_parent("4") == std::vector<std::string>{"4"});
  CHECK(g.is_parent("C"));
  CHECK_FALSE(g.is_parent("3"));
}

TEST_CASE("parent stock presence is derived from the children") {
  const SystemGraph g = build_graph(nested_definition());
  CHECK(g.has_stock("C"));
  CHECK_FALSE(g.has_stock("A"));
  CHECK_FALSE(g.has_stock("B"));
}

TEST_CASE("definition round-trips through build_graph") {
  const SystemGraph g = build_graph(nested_definition());
  const SystemGraph h = build_graph(g.definition());
  CHECK(h.index() == g.index());
  CHECK(h.expand_parent("B") == g.expand_parent("B"));
  CHECK(h.child_ids() == g.child_ids());
  CHECK(h.parent_ids() == g.parent_ids());
}

TEST_CASE("in- and outflows of a child") {
  const SystemGraph g = build_graph(nested_definition());
  CHECK(g.inflows("4").size() == 3);
  CHECK(g.outflows("4").size() == 3);
  CHECK(g.outflows("5").empty());
}

TEST_CASE("invalid graphs are rejected") {
  SUBCASE("arc touching a parent names the arc") {
    SystemDefinition d = nested_definition();
    d.flows.push_back({"A", "4"});
    CHECK_THROWS_WITH_AS(build_graph(d), doctest::Contains("A->4"), ValidationError);
  }
  SUBCASE("unknown endpoint") {
    SystemDefinition d = nested_definition();
    d.flows.push_back({"1", "9"});
    CHECK_THROWS_AS(build_graph(d), ValidationError);
  }
  SUBCASE("self loop") {
    SystemDefinition d = nested_definition();
    d.flows.push_back({"2", "2"});
    CHECK_THROWS_AS(build_graph(d), ValidationError);
  }
  SUBCASE("duplicate arc") {
    SystemDefinition d = nested_definition();
    d.flows.push_back({"1", "3"});
    CHECK_THROWS_AS(build_graph(d), ValidationError);
  }
  SUBCASE("duplicate id") {
    SystemDefinition d = nested_definition();
    d.children.push_back({"3", false});
    CHECK_THROWS_AS(build_graph(d), ValidationError);
  }
  SUBCASE("parent id clashing with a child") {
    SystemDefinition d = nested_definition();
    d.parents.push_back({"1", {"2"}});
    CHECK_THROWS_AS(build_graph(d), ValidationError);
  }
  SUBCASE("empty parent") {
    SystemDefinition d = nested_definition();
    d.parents.push_back({"D", {}});
    CHECK_THROWS_AS(build_graph(d), ValidationError);
  }
  SUBCASE("containment cycle") {
    SystemDefinition d = nested_definition();
    d.parents.push_back({"D", {"E"}});
    d.parents.push_back({"E", {"D"}});
    CHECK_THROWS_AS(build_graph(d), ValidationError);
  }
  SUBCASE("overlapping parents") {
    SystemDefinition d = nested_definition();
    d.parents.push_back({"D", {"2", "3"}});
    CHECK_THROWS_AS(build_graph(d), ValidationError);
  }
  SUBCASE("unknown member") {
    SystemDefinition d = nested_definition();
    d.parents.push_back({"D", {"9"}});
    CHECK_THROWS_AS(build_graph(d), ValidationError);
  }
}

TEST_CASE("an explicit Unknown process is an ordinary child") {
  const Fixture f = zinc_like();
  CHECK(f.graph.contains("Unknown"));
  CHECK_FALSE(f.graph.is_parent("Unknown"));
  CHECK(f.graph.index().size() == 20);
  CHECK(f.graph.index().stock_count() == 6);
}
