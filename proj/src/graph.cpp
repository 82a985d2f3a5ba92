#include "coldrec/graph.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace coldrec {

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("graph edge file truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_dict(const std::string& path, const std::vector<std::string>& ids) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& id : ids) out << id << "\n";
}

std::vector<std::string> read_dict(const std::string& path, std::size_t expected) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) ids.push_back(line);
    if (ids.size() != expected)
        throw std::runtime_error("graph dictionary size mismatch in " + path);
    return ids;
}

}  // namespace

std::uint32_t BipartiteGraph::intern_left(const std::string& id) {
    auto [it, fresh] = left_index_.try_emplace(id, static_cast<std::uint32_t>(left_ids_.size()));
    if (fresh) {
        left_ids_.push_back(id);
        left_adj_.emplace_back();
    }
    return it->second;
}

std::uint32_t BipartiteGraph::intern_right(const std::string& id) {
    auto [it, fresh] =
        right_index_.try_emplace(id, static_cast<std::uint32_t>(right_ids_.size()));
    if (fresh) {
        right_ids_.push_back(id);
        right_adj_.emplace_back();
    }
    return it->second;
}

void BipartiteGraph::add_edge(std::uint32_t l, std::uint32_t r) {
    auto& ln = left_adj_[l];
    auto pos = std::lower_bound(ln.begin(), ln.end(), r);
    if (pos != ln.end() && *pos == r) return;  // dedup
    ln.insert(pos, r);
    auto& rn = right_adj_[r];
    rn.insert(std::lower_bound(rn.begin(), rn.end(), l), l);
    edges_.emplace_back(l, r);
    ++n_edges_;
}

BipartiteGraph BipartiteGraph::build(
    const std::map<std::string, std::set<std::string>>& items) {
    BipartiteGraph g;
    for (const auto& [item, attrs] : items) {
        if (attrs.empty())
            throw std::runtime_error("graph build: item has no attributes: " + item);
        std::uint32_t l = g.intern_left(item);
        for (const auto& a : attrs) g.add_edge(l, g.intern_right(a));
    }
    return g;
}

int BipartiteGraph::left_index(const std::string& id) const {
    auto it = left_index_.find(id);
    return it == left_index_.end() ? -1 : static_cast<int>(it->second);
}

int BipartiteGraph::right_index(const std::string& id) const {
    auto it = right_index_.find(id);
    return it == right_index_.end() ? -1 : static_cast<int>(it->second);
}

BipartiteGraph BipartiteGraph::insert_items(
    const std::map<std::string, std::set<std::string>>& new_items) const {
    BipartiteGraph g = *this;
    for (const auto& [item, attrs] : new_items) {
        if (g.left_index_.count(item))
            throw std::runtime_error("insert_items: duplicate item id: " + item);
        if (attrs.empty())
            throw std::runtime_error("insert_items: item has no attributes: " + item);
        std::uint32_t l = g.intern_left(item);
        for (const auto& a : attrs) g.add_edge(l, g.intern_right(a));
    }
    return g;
}

void BipartiteGraph::save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["n_left"] = left_ids_.size();
    manifest["n_right"] = right_ids_.size();
    manifest["n_edges"] = n_edges_;
    {
        std::ofstream out(dir + "/manifest.json");
        if (!out) throw std::runtime_error("cannot write graph manifest in " + dir);
        out << manifest.dump(2) << "\n";
    }
    write_dict(dir + "/left.dict", left_ids_);
    write_dict(dir + "/right.dict", right_ids_);
    std::ofstream out(dir + "/edges.bin", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write edges in " + dir);
    for (const auto& [l, r] : edges_) {
        write_u32(out, l);
        write_u32(out, r);
    }
}

BipartiteGraph BipartiteGraph::load(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw std::runtime_error("cannot read graph manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(mf);
    BipartiteGraph g;
    auto n_left = manifest.at("n_left").get<std::size_t>();
    auto n_right = manifest.at("n_right").get<std::size_t>();
    auto n_edges = manifest.at("n_edges").get<std::size_t>();
    for (const auto& id : read_dict(dir + "/left.dict", n_left)) g.intern_left(id);
    for (const auto& id : read_dict(dir + "/right.dict", n_right)) g.intern_right(id);
    std::ifstream ef(dir + "/edges.bin", std::ios::binary);
    if (!ef) throw std::runtime_error("cannot read edges in " + dir);
    for (std::size_t i = 0; i < n_edges; ++i) {
        std::uint32_t l = read_u32(ef), r = read_u32(ef);
        if (l >= g.n_left() || r >= g.n_right())
            throw std::runtime_error("graph edge index out of range in " + dir);
        g.add_edge(l, r);
    }
    return g;
}

bool BipartiteGraph::operator==(const BipartiteGraph& o) const {
    return left_ids_ == o.left_ids_ && right_ids_ == o.right_ids_ &&
           edges_ == o.edges_;
}

BipartiteGraph build_review_graph(
    const std::map<std::string, std::vector<std::vector<std::string>>>& item_review_terms,
    const std::set<std::string>& kept_terms, int reviews_per_item, std::uint64_t seed) {
    if (reviews_per_item < 1)
        throw std::invalid_argument("reviews_per_item must be >= 1");
    BipartiteGraph g;
    std::mt19937_64 rng(seed);
    for (const auto& [item, reviews] : item_review_terms) {
        std::uint32_t l = g.intern_left(item);  // isolated if nothing survives
        std::vector<std::size_t> order(reviews.size());
        std::iota(order.begin(), order.end(), 0);
        if (reviews.size() > static_cast<std::size_t>(reviews_per_item)) {
            std::shuffle(order.begin(), order.end(), rng);
            order.resize(static_cast<std::size_t>(reviews_per_item));
            std::sort(order.begin(), order.end());
        }
        for (std::size_t ri : order)
            for (const auto& term : reviews[ri])
                if (kept_terms.count(term)) g.add_edge(l, g.intern_right(term));
    }
    return g;
}

}  // namespace coldrec
