#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "coldrec/metrics.hpp"

using namespace coldrec;

namespace {

// Independent reference: score every ranked prefix position directly.
double recall_oracle(const std::vector<std::string>& ranked,
                     const std::set<std::string>& relevant, int k) {
    int hits = 0;
    for (int i = 0; i < std::min<int>(k, static_cast<int>(ranked.size())); ++i)
        hits += relevant.count(ranked[static_cast<std::size_t>(i)]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_oracle(const std::vector<std::string>& ranked,
                   const std::set<std::string>& relevant, int k) {
    double dcg = 0.0;
    for (int i = 0; i < std::min<int>(k, static_cast<int>(ranked.size())); ++i)
        if (relevant.count(ranked[static_cast<std::size_t>(i)]))
            dcg += 1.0 / (std::log(i + 2.0) / std::log(2.0));
    double idcg = 0.0;
    for (int i = 0; i < std::min<int>(k, static_cast<int>(relevant.size())); ++i)
        idcg += 1.0 / (std::log(i + 2.0) / std::log(2.0));
    return dcg / idcg;
}

}  // namespace

TEST_CASE("recall closed forms") {
    std::set<std::string> rel{"a", "b", "c", "d"};
    CHECK(recall_at_k({"a", "b", "c", "d"}, rel, 5) == doctest::Approx(1.0));
    CHECK(recall_at_k({"x", "y", "z"}, rel, 5) == doctest::Approx(0.0));
    CHECK(recall_at_k({"a", "x", "b", "y", "z", "c"}, rel, 5) == doctest::Approx(0.5));
    CHECK_THROWS(recall_at_k({"a"}, {}, 5));
    CHECK_THROWS(recall_at_k({"a", "a"}, rel, 5));
}

TEST_CASE("ndcg closed forms") {
    std::set<std::string> rel{"a"};
    CHECK(ndcg_at_k({"a", "x", "y"}, rel, 5) == doctest::Approx(1.0));
    CHECK(ndcg_at_k({"x", "a", "y"}, rel, 5) ==
          doctest::Approx(1.0 / std::log2(3.0)));  // about 0.6309
    CHECK(ndcg_at_k({"x", "y", "z"}, rel, 2) == doctest::Approx(0.0));
}

TEST_CASE("metrics agree with brute-force references on random cases") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> len(1, 50), kpick(0, 3);
    const int ks[4] = {1, 5, 20, 40};
    for (int trial = 0; trial < 1000; ++trial) {
        int n = len(rng);
        std::vector<std::string> ranked;
        for (int i = 0; i < n; ++i) ranked.push_back("x" + std::to_string(i));
        std::shuffle(ranked.begin(), ranked.end(), rng);
        std::set<std::string> relevant;
        std::uniform_int_distribution<int> pick(0, n - 1);
        int n_rel = 1 + pick(rng) % std::max(1, n / 2);
        while (static_cast<int>(relevant.size()) < n_rel)
            relevant.insert("x" + std::to_string(pick(rng)));
        int k = ks[kpick(rng)];
        CHECK(recall_at_k(ranked, relevant, k) ==
              doctest::Approx(recall_oracle(ranked, relevant, k)).epsilon(1e-12));
        CHECK(ndcg_at_k(ranked, relevant, k) ==
              doctest::Approx(ndcg_oracle(ranked, relevant, k)).epsilon(1e-12));
    }
}

TEST_CASE("pushing a relevant item down never helps either metric") {
    std::vector<std::string> ranked{"r1", "x1", "r2", "x2", "x3", "r3"};
    std::set<std::string> rel{"r1", "r2", "r3"};
    for (int k : {1, 3, 5, 6}) {
        double base_recall = recall_at_k(ranked, rel, k);
        double base_ndcg = ndcg_at_k(ranked, rel, k);
        auto worse = ranked;
        std::swap(worse[2], worse[4]);  // r2 moves below x3
        CHECK(recall_at_k(worse, rel, k) <= base_recall);
        CHECK(ndcg_at_k(worse, rel, k) <= base_ndcg);
    }
}

TEST_CASE("order below rank k is irrelevant") {
    std::vector<std::string> a{"r1", "x1", "x2", "r2", "x3"};
    auto b = a;
    std::swap(b[3], b[4]);
    std::set<std::string> rel{"r1", "r2"};
    CHECK(recall_at_k(a, rel, 3) == recall_at_k(b, rel, 3));
    CHECK(ndcg_at_k(a, rel, 3) == ndcg_at_k(b, rel, 3));
}

TEST_CASE("attribute jaccard") {
    CHECK(attribute_jaccard({"a", "b"}, {"a", "b"}) == doctest::Approx(1.0));
    CHECK(attribute_jaccard({"a"}, {"b"}) == doctest::Approx(0.0));
    CHECK(attribute_jaccard({"a", "b"}, {"b", "c"}) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS(attribute_jaccard({}, {"a"}));
}

TEST_CASE("pearson correlation") {
    std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    std::vector<double> lin, neg;
    for (double x : xs) {
        lin.push_back(2.0 * x + 1.0);
        neg.push_back(-x);
    }
    CHECK(pearson(xs, lin) == doctest::Approx(1.0));
    CHECK(pearson(xs, neg) == doctest::Approx(-1.0));
    CHECK_THROWS(pearson(xs, {1.0, 1.0, 1.0, 1.0}));
    CHECK_THROWS(pearson({1.0}, {2.0}));
}

TEST_CASE("evaluate_rankings macro-averages and skips empty users") {
    std::map<std::string, std::vector<std::string>> ranked{
        {"u1", {"a", "b"}}, {"u2", {"b", "a"}}, {"u3", {"a", "b"}}};
    std::map<std::string, std::set<std::string>> relevant{
        {"u1", {"a"}}, {"u2", {"a"}}, {"u3", {}}};
    auto report = evaluate_rankings(ranked, relevant, {1, 2});
    CHECK(report.users_evaluated == 2);
    CHECK(report.users_skipped == 1);
    CHECK(report.recall.at(1) == doctest::Approx(0.5));
    CHECK(report.recall.at(2) == doctest::Approx(1.0));
    CHECK(report.ndcg.at(2) == doctest::Approx((1.0 + 1.0 / std::log2(3.0)) / 2.0));
}

namespace {

// Items whose embeddings are (normalized) indicator vectors of their
// attributes; cosine then tracks attribute overlap by construction.
void attribute_driven_table(int n_items, EmbeddingTable& table,
                            std::map<std::string, std::set<std::string>>& attrs,
                            std::set<std::string>& scs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int n_tags = 6;
    table.vectors = ad::Mat::Zero(n_items, n_tags);
    std::uniform_int_distribution<int> tag(0, n_tags - 1);
    for (int i = 0; i < n_items; ++i) {
        std::string id = "i" + std::to_string(i);
        table.ids.push_back(id);
        while (attrs[id].size() < 2) {
            int t = tag(rng);
            attrs[id].insert("t" + std::to_string(t));
            table.vectors(i, t) = 1.0;
        }
        table.vectors.row(i) /= table.vectors.row(i).norm();
        if (i % 5 == 0) scs.insert(id);
    }
    table.rebuild_index();
}

}  // namespace

TEST_CASE("correlation_report finds attribute-driven structure") {
    EmbeddingTable table;
    std::map<std::string, std::set<std::string>> attrs;
    std::set<std::string> scs;
    attribute_driven_table(40, table, attrs, scs, 31);
    for (auto filter : {PairFilter::All, PairFilter::ScsExisting, PairFilter::ScsScs}) {
        auto result = correlation_report(table, attrs, scs, filter, 0.01, 2000, 1);
        CAPTURE(static_cast<int>(filter));
        CHECK(result.r > 0.0);
        CHECK(result.significant);
        CHECK(result.r <= 1.0);
    }
}

TEST_CASE("correlation_report stays quiet under the null hypothesis") {
    std::mt19937_64 rng(32);
    std::normal_distribution<double> dist;
    EmbeddingTable table;
    std::map<std::string, std::set<std::string>> attrs;
    table.vectors = ad::Mat(40, 6);
    std::uniform_int_distribution<int> tag(0, 19);  // many tags, overlap is noise
    for (int i = 0; i < 40; ++i) {
        std::string id = "i" + std::to_string(i);
        table.ids.push_back(id);
        for (int c = 0; c < 6; ++c) table.vectors(i, c) = dist(rng);
        while (attrs[id].size() < 2) attrs[id].insert("t" + std::to_string(tag(rng)));
    }
    table.rebuild_index();
    auto result = correlation_report(table, attrs, {}, PairFilter::All, 0.01, 2000, 2);
    CHECK(std::abs(result.r) < 0.2);
    CHECK(!result.significant);
}

TEST_CASE("pair filters partition the full pair set") {
    EmbeddingTable table;
    std::map<std::string, std::set<std::string>> attrs;
    std::set<std::string> scs;
    attribute_driven_table(25, table, attrs, scs, 33);
    auto all = correlation_report(table, attrs, scs, PairFilter::All, 0.01, 10, 1);
    auto cross = correlation_report(table, attrs, scs, PairFilter::ScsExisting, 0.01, 10, 1);
    auto ss = correlation_report(table, attrs, scs, PairFilter::ScsScs, 0.01, 10, 1);
    std::size_t n = table.ids.size(), n_scs = scs.size(), n_old = n - n_scs;
    CHECK(all.n_pairs == n * (n - 1) / 2);
    CHECK(cross.n_pairs == n_scs * n_old);
    CHECK(ss.n_pairs == n_scs * (n_scs - 1) / 2);
    CHECK(cross.n_pairs + ss.n_pairs + n_old * (n_old - 1) / 2 == all.n_pairs);
    // one SCS item leaves no SCS-SCS pairs at all
    CHECK_THROWS(
        correlation_report(table, attrs, {"i0"}, PairFilter::ScsScs, 0.01, 10, 1));
}
