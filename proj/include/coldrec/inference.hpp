#pragma once

#include <string>
#include <vector>

#include "coldrec/model.hpp"

namespace coldrec {

struct Recommendation {
    std::string user_id;
    std::vector<std::string> item_ids;  // descending score, ties by id ascending
    std::vector<double> scores;
};

// Forward propagation over a graph (which may already include inserted SCS
// items) with frozen parameters; returns the h1 row for every item node.
EmbeddingTable embed_items(const BipartiteGraph& graph, const ModelParams& params,
                           const TextEncoder& encoder);

// Arithmetic mean of the history items' rows. Not re-normalized; dot-product
// scoring consumes it directly. Empty history is an error.
ad::Mat embed_user(const std::vector<std::string>& history, const EmbeddingTable& items);

// Dot-product scores against every candidate; top K, ties by item_id
// ascending. K > |candidates| returns all candidates.
Recommendation recommend(const std::string& user_id, const ad::Mat& user_vec,
                         const EmbeddingTable& candidates, int k);

}  // namespace coldrec
