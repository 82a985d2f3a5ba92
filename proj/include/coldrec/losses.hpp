#pragma once

#include <array>
#include <vector>

#include "coldrec/autodiff.hpp"

namespace coldrec {

enum class LossMode {
    Unified,   // alignment + uniformity for all three tasks
    InfoNceCe  // in-batch InfoNCE (tasks 1/3) + cross-entropy (task 2),
               // squared-norm regularization; kept for the stability contrast
};

// Mean squared Euclidean distance over row pairs.
ad::Var alignment(ad::Tape& t, ad::Var pairs_a, ad::Var pairs_b);

// (1/2) log mean_{x != x'} exp(-2||x - x'||^2) over a set of rows; fewer than
// two rows contributes 0 (with *degenerate set to true).
ad::Var uniformity(ad::Tape& t, ad::Var rows, bool* degenerate = nullptr);

// alignment(pairs) + lambda * sum of uniformity terms over the given row sets.
ad::Var task_loss(ad::Tape& t, ad::Var pairs_a, ad::Var pairs_b,
                  const std::vector<ad::Var>& uniformity_sets, double lambda);

// In-batch InfoNCE: logits = anchors * candidates^T / temperature, labels give
// each anchor's positive row.
ad::Var info_nce(ad::Tape& t, ad::Var anchors, ad::Var candidates,
                 std::vector<int> labels, double temperature);

// Weighted sum of the active task losses (invalid Var = task inactive); the
// weights of inactive tasks are redistributed so the total weight is kept.
ad::Var total_loss(ad::Tape& t, ad::Var l1, ad::Var l2, ad::Var l3,
                   const std::array<double, 3>& w);

std::array<double, 3> effective_weights(const std::array<double, 3>& w,
                                        const std::array<bool, 3>& active);

// Plain-value forms for oracle-style checks.
double alignment_value(const ad::Mat& a, const ad::Mat& b);
double uniformity_value(const ad::Mat& rows);
double total_loss_value(double l1, double l2, double l3, const std::array<double, 3>& w);

}  // namespace coldrec
