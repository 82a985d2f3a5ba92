#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace coldrec {

// Bipartite item <-> attribute (or review-term) graph with dense integer node
// ids and a string sidecar dictionary. Immutable after construction; insertion
// returns a new graph.
class BipartiteGraph {
public:
    BipartiteGraph() = default;

    // items: id -> attribute/term texts. Node order is insertion order of
    // first occurrence (items in map order, then their right nodes).
    static BipartiteGraph build(
        const std::map<std::string, std::set<std::string>>& items);

    std::size_t n_left() const { return left_ids_.size(); }
    std::size_t n_right() const { return right_ids_.size(); }
    std::size_t n_edges() const { return n_edges_; }

    const std::vector<std::string>& left_ids() const { return left_ids_; }
    const std::vector<std::string>& right_ids() const { return right_ids_; }

    // Edges as (left index, right index) in construction order, deduplicated.
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges() const {
        return edges_;
    }

    // Sorted, duplicate-free neighbor lists (indices into the other partition).
    const std::vector<std::uint32_t>& left_neighbors(std::size_t left_idx) const {
        return left_adj_[left_idx];
    }
    const std::vector<std::uint32_t>& right_neighbors(std::size_t right_idx) const {
        return right_adj_[right_idx];
    }

    int left_index(const std::string& id) const;   // -1 if absent
    int right_index(const std::string& id) const;  // -1 if absent

    // Adds new left nodes (and any unseen right nodes) with their edges;
    // purely additive, the receiver is unmodified. Duplicate left ids are
    // fatal.
    BipartiteGraph insert_items(
        const std::map<std::string, std::set<std::string>>& new_items) const;

    void save(const std::string& dir) const;
    static BipartiteGraph load(const std::string& dir);

    bool operator==(const BipartiteGraph& o) const;

private:
    friend BipartiteGraph build_review_graph(
        const std::map<std::string, std::vector<std::vector<std::string>>>&,
        const std::set<std::string>&, int, std::uint64_t);

    std::uint32_t intern_left(const std::string& id);
    std::uint32_t intern_right(const std::string& id);
    void add_edge(std::uint32_t l, std::uint32_t r);

    std::vector<std::string> left_ids_, right_ids_;
    std::unordered_map<std::string, std::uint32_t> left_index_, right_index_;
    std::vector<std::vector<std::uint32_t>> left_adj_, right_adj_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges_;
    std::size_t n_edges_ = 0;
};

// Per-item review-term multisets reduced to a graph: at most reviews_per_item
// reviews per item contribute (seeded uniform sample without replacement),
// only kept_terms survive, edges deduplicated. Items whose terms are all
// filtered stay as isolated left nodes.
BipartiteGraph build_review_graph(
    const std::map<std::string, std::vector<std::vector<std::string>>>&
        item_review_terms,  // item -> reviews -> term texts
    const std::set<std::string>& kept_terms, int reviews_per_item,
    std::uint64_t seed);

}  // namespace coldrec
