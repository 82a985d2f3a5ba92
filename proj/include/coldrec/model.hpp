#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "coldrec/autodiff.hpp"
#include "coldrec/graph.hpp"
#include "coldrec/text_encoder.hpp"

namespace coldrec {

struct ModelConfig {
    int d_text = 256;
    int d_hidden = 128;
    int d = 64;
    int max_seq_len = 100;
    int ffn_mult = 4;

    bool operator==(const ModelConfig&) const = default;
};

// All learnable tensors, addressed by name: interpreter MLP, the two GNN
// layers, and the bidirectional-attention sequential encoder.
struct ModelParams {
    ModelConfig config;
    std::map<std::string, ad::Mat> tensors;  // ordered for deterministic iteration

    static ModelParams init(const ModelConfig& config, std::uint64_t seed);

    ad::Mat& at(const std::string& name);
    const ad::Mat& at(const std::string& name) const;
};

// Tape bindings for one forward pass.
struct BoundParams {
    std::map<std::string, ad::Var> vars;
    ad::Var at(const std::string& name) const;
};

BoundParams bind_params(ad::Tape& tape, const ModelParams& params);

// One hidden tanh layer, linear output; rows of `text_features` are d_text
// inputs, rows of the result are d-vectors.
ad::Var interpret(ad::Tape& tape, const BoundParams& p, ad::Var text_features);

// Combined node ordering for a bipartite graph: left nodes first, then right.
inline int combined_left_index(std::size_t i) { return static_cast<int>(i); }
inline int combined_right_index(const BipartiteGraph& g, std::size_t j) {
    return static_cast<int>(g.n_left() + j);
}

// Row v holds 1/deg(v) over v's neighbors in the combined ordering; isolated
// nodes have empty rows.
ad::SpMat build_mean_aggregation(const BipartiteGraph& g);

// One propagation layer: raw(v) = W_self x_v + W_nbr mean_{u in N(v)} x_u over
// the INPUT features, then row L2 normalization; zero raw rows fall back to
// the normalized input feature. `prefix` selects "gnn1" or "gnn3".
ad::Var gnn_forward(ad::Tape& tape, const BoundParams& p, const std::string& prefix,
                    ad::Var interpreted, const ad::SpMat& agg);

// Text-encoder inputs for every node of a graph. Items use their
// attribute-concatenation text (item_texts), right nodes their own text.
ad::Mat compute_node_features(const BipartiteGraph& g,
                              const std::unordered_map<std::string, std::string>& item_texts,
                              const TextEncoder& encoder);

// Independent Bernoulli(p_mask) per position; if nothing is drawn, one
// uniformly random position is forced.
std::vector<char> mask_sequence(std::size_t seq_len, double p_mask,
                                std::mt19937_64& rng);

// Bidirectional single-head attention block over one sequence.
// `item_embs` holds the per-position h1 rows; masked positions are replaced by
// the mask token, positional rows are added, then a pre-LN transformer block
// and per-position L2 normalization.
ad::Var encode_sequence(ad::Tape& tape, const BoundParams& p, ad::Var item_embs,
                        const std::vector<char>& masked);

// id -> unit-norm d-vector map.
struct EmbeddingTable {
    std::vector<std::string> ids;
    ad::Mat vectors;  // |ids| x d, rows unit-norm
    std::unordered_map<std::string, int> index;

    int row(const std::string& id) const;
    void rebuild_index();
};

// Tensor blob round-trip used by checkpoints: names, shapes, row-major f64.
void write_tensors(std::ostream& out, const std::map<std::string, ad::Mat>& tensors);
std::map<std::string, ad::Mat> read_tensors(std::istream& in);

}  // namespace coldrec
