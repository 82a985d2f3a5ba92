#include "coldrec/losses.hpp"

#include <stdexcept>

namespace coldrec {

ad::Var alignment(ad::Tape& t, ad::Var pairs_a, ad::Var pairs_b) {
    if (t.value(pairs_a).rows() == 0)
        throw std::invalid_argument("alignment: empty pair set");
    if (t.value(pairs_a).rows() != t.value(pairs_b).rows())
        throw std::invalid_argument("alignment: pair arrays differ in length");
    return t.mean_sq_dist(pairs_a, pairs_b);
}

ad::Var uniformity(ad::Tape& t, ad::Var rows, bool* degenerate) {
    if (t.value(rows).rows() < 2) {
        if (degenerate) *degenerate = true;
        return t.leaf(ad::Mat::Zero(1, 1));
    }
    if (degenerate) *degenerate = false;
    return t.uniformity(rows);
}

ad::Var task_loss(ad::Tape& t, ad::Var pairs_a, ad::Var pairs_b,
                  const std::vector<ad::Var>& uniformity_sets, double lambda) {
    std::vector<std::pair<double, ad::Var>> terms;
    terms.emplace_back(1.0, alignment(t, pairs_a, pairs_b));
    for (ad::Var rows : uniformity_sets)
        terms.emplace_back(lambda, uniformity(t, rows));
    return t.weighted_sum(terms);
}

ad::Var info_nce(ad::Tape& t, ad::Var anchors, ad::Var candidates,
                 std::vector<int> labels, double temperature) {
    if (temperature <= 0.0) throw std::invalid_argument("info_nce: temperature <= 0");
    ad::Var logits = t.scale(t.matmul_nt(anchors, candidates), 1.0 / temperature);
    return t.cross_entropy_rows(logits, std::move(labels));
}

std::array<double, 3> effective_weights(const std::array<double, 3>& w,
                                        const std::array<bool, 3>& active) {
    for (double wi : w)
        if (wi <= 0.0) throw std::invalid_argument("task weights must be > 0");
    double total = w[0] + w[1] + w[2];
    double active_sum = 0.0;
    for (int i = 0; i < 3; ++i)
        if (active[static_cast<std::size_t>(i)]) active_sum += w[static_cast<std::size_t>(i)];
    if (active_sum == 0.0) throw std::invalid_argument("no active task");
    std::array<double, 3> out{0.0, 0.0, 0.0};
    for (int i = 0; i < 3; ++i)
        if (active[static_cast<std::size_t>(i)])
            out[static_cast<std::size_t>(i)] =
                w[static_cast<std::size_t>(i)] * total / active_sum;
    return out;
}

ad::Var total_loss(ad::Tape& t, ad::Var l1, ad::Var l2, ad::Var l3,
                   const std::array<double, 3>& w) {
    std::array<bool, 3> active{l1.valid(), l2.valid(), l3.valid()};
    std::array<double, 3> eff = effective_weights(w, active);
    std::vector<std::pair<double, ad::Var>> terms;
    if (l1.valid()) terms.emplace_back(eff[0], l1);
    if (l2.valid()) terms.emplace_back(eff[1], l2);
    if (l3.valid()) terms.emplace_back(eff[2], l3);
    return t.weighted_sum(terms);
}

double alignment_value(const ad::Mat& a, const ad::Mat& b) {
    ad::Tape t;
    return t.scalar(alignment(t, t.leaf(a), t.leaf(b)));
}

double uniformity_value(const ad::Mat& rows) {
    ad::Tape t;
    return t.scalar(uniformity(t, t.leaf(rows)));
}

double total_loss_value(double l1, double l2, double l3, const std::array<double, 3>& w) {
    for (double wi : w)
        if (wi <= 0.0) throw std::invalid_argument("task weights must be > 0");
    return w[0] * l1 + w[1] * l2 + w[2] * l3;
}

}  // namespace coldrec
