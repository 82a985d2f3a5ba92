#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "coldrec/model.hpp"

namespace coldrec {

// |top-k of ranked ∩ relevant| / |relevant|. `relevant` must be nonempty and
// `ranked` duplicate-free.
double recall_at_k(const std::vector<std::string>& ranked,
                   const std::set<std::string>& relevant, int k);

// Binary-relevance NDCG with 1/log2(i+1) gain, 1-based ranks.
double ndcg_at_k(const std::vector<std::string>& ranked,
                 const std::set<std::string>& relevant, int k);

// |A ∩ B| / |A ∪ B|; empty input sets are an error.
double attribute_jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// Product-moment correlation; needs >= 2 points and nonzero variance on both
// sides.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct EvalReport {
    std::map<int, double> recall;  // N -> mean over evaluated users
    std::map<int, double> ndcg;
    std::size_t users_evaluated = 0;
    std::size_t users_skipped = 0;  // users with no relevant items
};

// Macro-averaged Recall@N / NDCG@N over users; users with an empty relevant
// set are skipped and counted.
EvalReport evaluate_rankings(
    const std::map<std::string, std::vector<std::string>>& ranked_per_user,
    const std::map<std::string, std::set<std::string>>& relevant_per_user,
    const std::vector<int>& ns);

enum class PairFilter { All, ScsExisting, ScsScs };

struct CorrelationResult {
    double r = 0.0;
    double p_value = 1.0;
    bool significant = false;
    std::size_t n_pairs = 0;
};

// Pearson r between pairwise embedding cosine similarity and attribute
// Jaccard similarity over item pairs passing the filter, with a two-sided
// seeded permutation test.
CorrelationResult correlation_report(
    const EmbeddingTable& items,
    const std::map<std::string, std::set<std::string>>& attr_sets,
    const std::set<std::string>& scs_items, PairFilter filter,
    double significance = 0.01, int n_shuffles = 10000, std::uint64_t seed = 42);

}  // namespace coldrec
