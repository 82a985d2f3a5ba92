#include <doctest.h>

#include <map>
#include <set>
#include <string>

#include "coldrec/graph.hpp"
#include "support/tmpdir.hpp"

using namespace coldrec;

namespace {

BipartiteGraph small_graph() {
    return BipartiteGraph::build({
        {"i1", {"red", "mug"}},
        {"i2", {"mug", "steel"}},
        {"i3", {"red"}},
    });
}

}  // namespace

TEST_CASE("build assigns dense ids and deduplicates edges") {
    auto g = small_graph();
    CHECK(g.n_left() == 3);
    CHECK(g.n_right() == 3);
    CHECK(g.n_edges() == 5);
    CHECK(g.left_index("i2") == 1);
    CHECK(g.right_index("nope") == -1);
    // neighbor lists sorted
    for (std::size_t i = 0; i < g.n_left(); ++i) {
        const auto& nbrs = g.left_neighbors(i);
        CHECK(std::is_sorted(nbrs.begin(), nbrs.end()));
    }
    // degree symmetry: sum of left degrees == sum of right degrees == edges
    std::size_t left_deg = 0, right_deg = 0;
    for (std::size_t i = 0; i < g.n_left(); ++i) left_deg += g.left_neighbors(i).size();
    for (std::size_t j = 0; j < g.n_right(); ++j) right_deg += g.right_neighbors(j).size();
    CHECK(left_deg == g.n_edges());
    CHECK(right_deg == g.n_edges());
}

TEST_CASE("items without attributes are rejected") {
    CHECK_THROWS(BipartiteGraph::build({{"i1", {}}}));
}

TEST_CASE("insert_items is additive and leaves the original untouched") {
    auto g = small_graph();
    auto g2 = g.insert_items({{"scs1", {"red", "glass"}}});
    CHECK(g.n_left() == 3);
    CHECK(g2.n_left() == 4);
    CHECK(g2.n_right() == 4);  // "glass" is new
    CHECK(g2.left_index("scs1") == 3);
    CHECK(g2.right_index("glass") == 3);
    // existing ids and adjacency keep their positions
    for (std::size_t i = 0; i < g.n_left(); ++i) {
        CHECK(g2.left_ids()[i] == g.left_ids()[i]);
        CHECK(g2.left_neighbors(i) == g.left_neighbors(i));
    }
    CHECK_THROWS(g.insert_items({{"i1", {"red"}}}));
    CHECK_THROWS(g.insert_items({{"scs2", {}}}));
}

TEST_CASE("save and load round-trip exactly") {
    testsupport::TempDir dir("graph");
    auto g = small_graph();
    g.save(dir.str());
    auto loaded = BipartiteGraph::load(dir.str());
    CHECK(loaded == g);
}

TEST_CASE("review graph keeps only filtered terms and samples reviews") {
    std::map<std::string, std::vector<std::vector<std::string>>> reviews{
        {"i1", {{"good lid", "bad hinge"}, {"good lid"}}},
        {"i2", {{"good lid"}, {"rare term"}}},
        {"i3", {{"rare term"}}},
    };
    std::set<std::string> kept{"good lid", "bad hinge"};
    auto g = build_review_graph(reviews, kept, 10, 7);
    CHECK(g.n_left() == 3);  // i3 stays as an isolated node
    CHECK(g.right_index("rare term") == -1);
    CHECK(g.left_neighbors(static_cast<std::size_t>(g.left_index("i3"))).empty());
    CHECK(g.n_edges() == 3);  // i1-lid, i1-hinge, i2-lid (deduplicated)
}

TEST_CASE("review sampling is seeded and capped") {
    std::map<std::string, std::vector<std::vector<std::string>>> reviews;
    for (int r = 0; r < 30; ++r)
        reviews["i1"].push_back({"term " + std::to_string(r)});
    std::set<std::string> kept;
    for (int r = 0; r < 30; ++r) kept.insert("term " + std::to_string(r));

    auto a = build_review_graph(reviews, kept, 5, 42);
    auto b = build_review_graph(reviews, kept, 5, 42);
    auto c = build_review_graph(reviews, kept, 5, 43);
    CHECK(a.n_edges() == 5);
    CHECK(a == b);
    CHECK_FALSE(a == c);
}
