#include "coldrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace coldrec {

namespace {

void check_ranking(const std::vector<std::string>& ranked,
                   const std::set<std::string>& relevant, int k) {
    if (relevant.empty()) throw std::invalid_argument("empty relevant set");
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    std::unordered_set<std::string> seen;
    for (const auto& id : ranked)
        if (!seen.insert(id).second)
            throw std::invalid_argument("ranked list has duplicate: " + id);
}

}  // namespace

double recall_at_k(const std::vector<std::string>& ranked,
                   const std::set<std::string>& relevant, int k) {
    check_ranking(ranked, relevant, k);
    std::size_t hits = 0;
    auto top = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
    for (std::size_t i = 0; i < top; ++i)
        if (relevant.count(ranked[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_at_k(const std::vector<std::string>& ranked,
                 const std::set<std::string>& relevant, int k) {
    check_ranking(ranked, relevant, k);
    auto top = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
    double dcg = 0.0;
    for (std::size_t i = 0; i < top; ++i)
        if (relevant.count(ranked[i]))
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double idcg = 0.0;
    auto ideal = std::min<std::size_t>(relevant.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < ideal; ++i)
        idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

double attribute_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("empty attribute set");
    std::size_t inter = 0;
    for (const auto& x : a)
        if (b.count(x)) ++inter;
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
    if (xs.size() < 2) throw std::invalid_argument("pearson: need >= 2 points");
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

EvalReport evaluate_rankings(
    const std::map<std::string, std::vector<std::string>>& ranked_per_user,
    const std::map<std::string, std::set<std::string>>& relevant_per_user,
    const std::vector<int>& ns) {
    EvalReport report;
    for (int n : ns) {
        report.recall[n] = 0.0;
        report.ndcg[n] = 0.0;
    }
    for (const auto& [user, ranked] : ranked_per_user) {
        auto it = relevant_per_user.find(user);
        if (it == relevant_per_user.end() || it->second.empty()) {
            ++report.users_skipped;
            continue;
        }
        ++report.users_evaluated;
        for (int n : ns) {
            report.recall[n] += recall_at_k(ranked, it->second, n);
            report.ndcg[n] += ndcg_at_k(ranked, it->second, n);
        }
    }
    if (report.users_evaluated > 0) {
        for (int n : ns) {
            report.recall[n] /= static_cast<double>(report.users_evaluated);
            report.ndcg[n] /= static_cast<double>(report.users_evaluated);
        }
    }
    return report;
}

CorrelationResult correlation_report(
    const EmbeddingTable& items,
    const std::map<std::string, std::set<std::string>>& attr_sets,
    const std::set<std::string>& scs_items, PairFilter filter, double significance,
    int n_shuffles, std::uint64_t seed) {
    std::vector<double> xs, ys;
    const auto n = items.ids.size();
    for (std::size_t i = 0; i < n; ++i) {
        bool scs_i = scs_items.count(items.ids[i]) > 0;
        for (std::size_t j = i + 1; j < n; ++j) {
            bool scs_j = scs_items.count(items.ids[j]) > 0;
            bool keep = false;
            switch (filter) {
                case PairFilter::All: keep = true; break;
                case PairFilter::ScsExisting: keep = scs_i != scs_j; break;
                case PairFilter::ScsScs: keep = scs_i && scs_j; break;
            }
            if (!keep) continue;
            auto ai = attr_sets.find(items.ids[i]);
            auto aj = attr_sets.find(items.ids[j]);
            if (ai == attr_sets.end() || aj == attr_sets.end())
                throw std::invalid_argument("correlation_report: missing attribute set");
            Eigen::VectorXd vi = items.vectors.row(static_cast<int>(i));
            Eigen::VectorXd vj = items.vectors.row(static_cast<int>(j));
            double denom = vi.norm() * vj.norm();
            if (denom == 0.0)
                throw std::invalid_argument("correlation_report: zero embedding");
            xs.push_back(vi.dot(vj) / denom);
            ys.push_back(attribute_jaccard(ai->second, aj->second));
        }
    }
    if (xs.size() < 2)
        throw std::invalid_argument("correlation_report: fewer than 2 pairs after filter");

    CorrelationResult result;
    result.n_pairs = xs.size();
    result.r = pearson(xs, ys);

    std::mt19937_64 rng(seed);
    std::vector<double> shuffled = ys;
    int at_least_as_extreme = 0;
    for (int s = 0; s < n_shuffles; ++s) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        if (std::abs(pearson(xs, shuffled)) >= std::abs(result.r))
            ++at_least_as_extreme;
    }
    result.p_value = static_cast<double>(at_least_as_extreme + 1) /
                     static_cast<double>(n_shuffles + 1);
    result.significant = result.p_value < significance;
    return result;
}

}  // namespace coldrec
