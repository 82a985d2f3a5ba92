#include <doctest.h>

#include <cmath>
#include <random>

#include "coldrec/losses.hpp"

using namespace coldrec;

namespace {

ad::Mat random_unit_rows(int n, int d, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    ad::Mat m(n, d);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < d; ++c) m(r, c) = dist(rng);
        m.row(r) /= m.row(r).norm();
    }
    return m;
}

ad::Mat random_rotation(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    ad::Mat a(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) a(r, c) = dist(rng);
    Eigen::HouseholderQR<ad::Mat> qr(a);
    return qr.householderQ();
}

}  // namespace

TEST_CASE("alignment and uniformity closed forms") {
    ad::Mat a(1, 2), b(1, 2);
    a << 1.0, 0.0;
    b << 0.0, 1.0;
    CHECK(alignment_value(a, b) == doctest::Approx(2.0));
    ad::Mat pair(2, 2);
    pair << 1.0, 0.0, 0.0, 1.0;
    CHECK(uniformity_value(pair) == doctest::Approx(-2.0));
    b << -1.0, 0.0;
    CHECK(alignment_value(a, b) == doctest::Approx(4.0));
    pair << 1.0, 0.0, -1.0, 0.0;
    CHECK(uniformity_value(pair) == doctest::Approx(-4.0));
}

TEST_CASE("alignment is nonnegative, uniformity nonpositive on unit rows") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        ad::Mat a = random_unit_rows(6, 5, rng);
        ad::Mat b = random_unit_rows(6, 5, rng);
        CHECK(alignment_value(a, b) >= 0.0);
        CHECK(uniformity_value(a) <= 0.0);
    }
}

TEST_CASE("losses are invariant under a common rotation") {
    std::mt19937_64 rng(12);
    ad::Mat a = random_unit_rows(8, 6, rng);
    ad::Mat b = random_unit_rows(8, 6, rng);
    ad::Mat q = random_rotation(6, rng);
    CHECK(alignment_value(a * q, b * q) == doctest::Approx(alignment_value(a, b)));
    CHECK(uniformity_value(a * q) == doctest::Approx(uniformity_value(a)));
}

TEST_CASE("uniformity on fewer than two rows is zero and flagged") {
    ad::Mat one(1, 3);
    one << 1.0, 0.0, 0.0;
    ad::Tape t;
    bool degenerate = false;
    ad::Var u = uniformity(t, t.leaf(one), &degenerate);
    CHECK(degenerate);
    CHECK(t.scalar(u) == 0.0);
}

TEST_CASE("task_loss combines alignment and weighted uniformity terms") {
    std::mt19937_64 rng(13);
    ad::Mat pa = random_unit_rows(5, 4, rng);
    ad::Mat pb = random_unit_rows(5, 4, rng);
    ad::Mat set1 = random_unit_rows(4, 4, rng);
    ad::Mat set2 = random_unit_rows(3, 4, rng);
    const double lambda = 0.6;
    ad::Tape t;
    double got = t.scalar(task_loss(t, t.leaf(pa), t.leaf(pb),
                                    {t.leaf(set1), t.leaf(set2)}, lambda));
    double want = alignment_value(pa, pb) +
                  lambda * (uniformity_value(set1) + uniformity_value(set2));
    CHECK(got == doctest::Approx(want));
}

TEST_CASE("alignment rejects mismatched or empty pair sets") {
    ad::Tape t;
    CHECK_THROWS(alignment(t, t.leaf(ad::Mat::Zero(0, 3)), t.leaf(ad::Mat::Zero(0, 3))));
    CHECK_THROWS(alignment(t, t.leaf(ad::Mat::Zero(2, 3)), t.leaf(ad::Mat::Zero(3, 3))));
}

TEST_CASE("effective weights redistribute inactive mass") {
    std::array<double, 3> w{0.6, 0.2, 0.2};
    auto all = effective_weights(w, {true, true, true});
    CHECK(all[0] == doctest::Approx(0.6));
    auto no23 = effective_weights(w, {true, false, false});
    CHECK(no23[0] == doctest::Approx(1.0));
    CHECK(no23[1] == 0.0);
    auto no2 = effective_weights(w, {true, false, true});
    CHECK(no2[0] + no2[2] == doctest::Approx(1.0));
    CHECK(no2[0] / no2[2] == doctest::Approx(3.0));  // 0.6 : 0.2 ratio kept
    CHECK_THROWS(effective_weights({0.0, 0.5, 0.5}, {true, true, true}));
    CHECK_THROWS(effective_weights(w, {false, false, false}));
}

TEST_CASE("total_loss blends only the active tasks") {
    ad::Tape t;
    ad::Var l1 = t.leaf(ad::Mat::Constant(1, 1, 2.0));
    ad::Var l3 = t.leaf(ad::Mat::Constant(1, 1, 5.0));
    double got = t.scalar(total_loss(t, l1, ad::Var{}, l3, {0.6, 0.2, 0.2}));
    // weights scale to 0.75/0.25 over tasks 1 and 3
    CHECK(got == doctest::Approx(0.75 * 2.0 + 0.25 * 5.0));
    CHECK(total_loss_value(2.0, 1.0, 5.0, {0.6, 0.2, 0.2}) ==
          doctest::Approx(0.6 * 2.0 + 0.2 * 1.0 + 0.2 * 5.0));
}

TEST_CASE("info_nce rewards matched anchor-candidate pairs") {
    ad::Mat anchors(2, 2), candidates(2, 2);
    anchors << 1.0, 0.0, 0.0, 1.0;
    candidates = anchors;
    ad::Tape t;
    double matched = t.scalar(
        info_nce(t, t.leaf(anchors), t.leaf(candidates), {0, 1}, 0.1));
    double crossed = t.scalar(
        info_nce(t, t.leaf(anchors), t.leaf(candidates), {1, 0}, 0.1));
    CHECK(matched < crossed);
    // manual check: logits row0 = [10, 0]; CE = log(1 + e^-10)
    CHECK(matched == doctest::Approx(std::log(1.0 + std::exp(-10.0))));
    CHECK_THROWS(info_nce(t, t.leaf(anchors), t.leaf(candidates), {0, 1}, 0.0));
}
