#include "coldrec/inference.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace coldrec {

EmbeddingTable embed_items(const BipartiteGraph& graph, const ModelParams& params,
                           const TextEncoder& encoder) {
    for (std::size_t i = 0; i < graph.n_left(); ++i)
        if (graph.left_neighbors(i).empty())
            throw std::runtime_error("embed_items: item has no attributes: " +
                                     graph.left_ids()[i]);

    std::unordered_map<std::string, std::string> item_texts;
    for (std::size_t i = 0; i < graph.n_left(); ++i) {
        std::vector<std::string> attrs;
        for (auto r : graph.left_neighbors(i)) attrs.push_back(graph.right_ids()[r]);
        std::sort(attrs.begin(), attrs.end());
        std::string joined;
        for (const auto& a : attrs) {
            if (!joined.empty()) joined += ' ';
            joined += a;
        }
        item_texts[graph.left_ids()[i]] = joined;
    }

    ad::Mat features = compute_node_features(graph, item_texts, encoder);
    ad::SpMat agg = build_mean_aggregation(graph);
    ad::Tape t;
    BoundParams bound = bind_params(t, params);
    ad::Var h1 = gnn_forward(t, bound, "gnn1", interpret(t, bound, t.leaf(features)), agg);

    EmbeddingTable table;
    table.ids = graph.left_ids();
    table.vectors = t.value(h1).topRows(static_cast<int>(graph.n_left()));
    table.rebuild_index();
    return table;
}

ad::Mat embed_user(const std::vector<std::string>& history, const EmbeddingTable& items) {
    if (history.empty()) throw std::invalid_argument("embed_user: empty history");
    ad::Mat sum = ad::Mat::Zero(1, items.vectors.cols());
    for (const auto& id : history) sum += items.vectors.row(items.row(id));
    return sum / static_cast<double>(history.size());
}

Recommendation recommend(const std::string& user_id, const ad::Mat& user_vec,
                         const EmbeddingTable& candidates, int k) {
    if (k < 1) throw std::invalid_argument("recommend: K must be >= 1");
    if (candidates.ids.empty()) throw std::invalid_argument("recommend: no candidates");
    Eigen::VectorXd scores = candidates.vectors * user_vec.transpose();
    std::vector<int> order(candidates.ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores(a) != scores(b)) return scores(a) > scores(b);
        return candidates.ids[static_cast<std::size_t>(a)] <
               candidates.ids[static_cast<std::size_t>(b)];
    });
    auto take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    Recommendation rec;
    rec.user_id = user_id;
    for (std::size_t i = 0; i < take; ++i) {
        rec.item_ids.push_back(candidates.ids[static_cast<std::size_t>(order[i])]);
        rec.scores.push_back(scores(order[i]));
    }
    return rec;
}

}  // namespace coldrec
