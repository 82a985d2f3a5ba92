#include "coldrec/model.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace coldrec {

namespace {

ad::Mat gaussian(int rows, int cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    ad::Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
    return m;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ModelParams p;
    p.config = cfg;
    auto glorot = [&](int rows, int cols) {
        return gaussian(rows, cols, std::sqrt(2.0 / (rows + cols)), rng);
    };
    p.tensors["interp.w1"] = glorot(cfg.d_hidden, cfg.d_text);
    p.tensors["interp.b1"] = ad::Mat::Zero(1, cfg.d_hidden);
    p.tensors["interp.w2"] = glorot(cfg.d, cfg.d_hidden);
    p.tensors["interp.b2"] = ad::Mat::Zero(1, cfg.d);
    for (const char* g : {"gnn1", "gnn3"}) {
        p.tensors[std::string(g) + ".w_self"] = glorot(cfg.d, cfg.d);
        p.tensors[std::string(g) + ".w_nbr"] = glorot(cfg.d, cfg.d);
    }
    for (const char* w : {"seq.wq", "seq.wk", "seq.wv", "seq.wo"})
        p.tensors[w] = glorot(cfg.d, cfg.d);
    for (const char* b : {"seq.bq", "seq.bk", "seq.bv", "seq.bo"})
        p.tensors[b] = ad::Mat::Zero(1, cfg.d);
    p.tensors["seq.ln1.g"] = ad::Mat::Ones(1, cfg.d);
    p.tensors["seq.ln1.b"] = ad::Mat::Zero(1, cfg.d);
    p.tensors["seq.ln2.g"] = ad::Mat::Ones(1, cfg.d);
    p.tensors["seq.ln2.b"] = ad::Mat::Zero(1, cfg.d);
    p.tensors["seq.ffn.w1"] = glorot(cfg.ffn_mult * cfg.d, cfg.d);
    p.tensors["seq.ffn.b1"] = ad::Mat::Zero(1, cfg.ffn_mult * cfg.d);
    p.tensors["seq.ffn.w2"] = glorot(cfg.d, cfg.ffn_mult * cfg.d);
    p.tensors["seq.ffn.b2"] = ad::Mat::Zero(1, cfg.d);
    p.tensors["seq.pos"] = gaussian(cfg.max_seq_len, cfg.d, 0.02, rng);
    p.tensors["seq.mask_token"] = gaussian(1, cfg.d, 0.02, rng);
    return p;
}

ad::Mat& ModelParams::at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("unknown tensor: " + name);
    return it->second;
}

const ad::Mat& ModelParams::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("unknown tensor: " + name);
    return it->second;
}

ad::Var BoundParams::at(const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end()) throw std::runtime_error("unbound tensor: " + name);
    return it->second;
}

BoundParams bind_params(ad::Tape& tape, const ModelParams& params) {
    BoundParams b;
    for (const auto& [name, value] : params.tensors)
        b.vars[name] = tape.leaf(value, /*requires_grad=*/true);
    return b;
}

ad::Var interpret(ad::Tape& t, const BoundParams& p, ad::Var text_features) {
    ad::Var h = t.tanh_(
        t.add_rowvec(t.matmul_nt(text_features, p.at("interp.w1")), p.at("interp.b1")));
    return t.add_rowvec(t.matmul_nt(h, p.at("interp.w2")), p.at("interp.b2"));
}

ad::SpMat build_mean_aggregation(const BipartiteGraph& g) {
    const auto n = static_cast<int>(g.n_left() + g.n_right());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(2 * g.n_edges());
    for (std::size_t i = 0; i < g.n_left(); ++i) {
        const auto& nbrs = g.left_neighbors(i);
        if (nbrs.empty()) continue;
        double w = 1.0 / static_cast<double>(nbrs.size());
        for (auto r : nbrs)
            trips.emplace_back(combined_left_index(i), combined_right_index(g, r), w);
    }
    for (std::size_t j = 0; j < g.n_right(); ++j) {
        const auto& nbrs = g.right_neighbors(j);
        if (nbrs.empty()) continue;
        double w = 1.0 / static_cast<double>(nbrs.size());
        for (auto l : nbrs)
            trips.emplace_back(combined_right_index(g, j), combined_left_index(l), w);
    }
    ad::SpMat agg(n, n);
    agg.setFromTriplets(trips.begin(), trips.end());
    return agg;
}

ad::Var gnn_forward(ad::Tape& t, const BoundParams& p, const std::string& prefix,
                    ad::Var interpreted, const ad::SpMat& agg) {
    ad::Var self = t.matmul_nt(interpreted, p.at(prefix + ".w_self"));
    ad::Var nbr = t.matmul_nt(t.spmm(agg, interpreted), p.at(prefix + ".w_nbr"));
    return t.l2_normalize_rows_or(t.add(self, nbr), interpreted);
}

ad::Mat compute_node_features(const BipartiteGraph& g,
                              const std::unordered_map<std::string, std::string>& item_texts,
                              const TextEncoder& encoder) {
    ad::Mat feats(static_cast<int>(g.n_left() + g.n_right()), encoder.dim());
    for (std::size_t i = 0; i < g.n_left(); ++i) {
        const std::string& id = g.left_ids()[i];
        auto it = item_texts.find(id);
        if (it == item_texts.end())
            throw std::runtime_error("no item text for graph node: " + id);
        feats.row(combined_left_index(i)) = encoder.encode(it->second);
    }
    for (std::size_t j = 0; j < g.n_right(); ++j)
        feats.row(combined_right_index(g, j)) = encoder.encode(g.right_ids()[j]);
    return feats;
}

std::vector<char> mask_sequence(std::size_t seq_len, double p_mask,
                                std::mt19937_64& rng) {
    if (seq_len < 2) throw std::invalid_argument("mask_sequence: sequence too short");
    if (p_mask <= 0.0 || p_mask >= 1.0)
        throw std::invalid_argument("mask_sequence: p_mask out of (0, 1)");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<char> masked(seq_len, 0);
    bool any = false;
    for (std::size_t i = 0; i < seq_len; ++i) {
        if (unif(rng) < p_mask) {
            masked[i] = 1;
            any = true;
        }
    }
    if (!any) {
        std::uniform_int_distribution<std::size_t> pick(0, seq_len - 1);
        masked[pick(rng)] = 1;  // guarantee a training signal
    }
    return masked;
}

ad::Var encode_sequence(ad::Tape& t, const BoundParams& p, ad::Var item_embs,
                        const std::vector<char>& masked) {
    const auto len = static_cast<int>(masked.size());
    const auto& pos_table = t.value(p.at("seq.pos"));
    if (len > pos_table.rows())
        throw std::runtime_error("encode_sequence: sequence exceeds max_seq_len");
    const int d = static_cast<int>(pos_table.cols());

    std::vector<int> positions(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) positions[static_cast<std::size_t>(i)] = i;

    ad::Var x = t.rows_with_mask(item_embs, positions, masked, p.at("seq.mask_token"));
    x = t.add(x, t.gather_rows(p.at("seq.pos"), positions));

    // Pre-LN attention sublayer.
    ad::Var y = t.layer_norm_rows(x, p.at("seq.ln1.g"), p.at("seq.ln1.b"));
    ad::Var q = t.add_rowvec(t.matmul_nt(y, p.at("seq.wq")), p.at("seq.bq"));
    ad::Var k = t.add_rowvec(t.matmul_nt(y, p.at("seq.wk")), p.at("seq.bk"));
    ad::Var v = t.add_rowvec(t.matmul_nt(y, p.at("seq.wv")), p.at("seq.bv"));
    ad::Var scores = t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
    ad::Var attn = t.matmul(t.softmax_rows(scores), v);
    ad::Var a = t.add(x, t.add_rowvec(t.matmul_nt(attn, p.at("seq.wo")), p.at("seq.bo")));

    // Pre-LN feed-forward sublayer.
    ad::Var z = t.layer_norm_rows(a, p.at("seq.ln2.g"), p.at("seq.ln2.b"));
    ad::Var ffn = t.add_rowvec(
        t.matmul_nt(t.gelu(t.add_rowvec(t.matmul_nt(z, p.at("seq.ffn.w1")),
                                        p.at("seq.ffn.b1"))),
                    p.at("seq.ffn.w2")),
        p.at("seq.ffn.b2"));
    ad::Var o = t.add(a, ffn);
    return t.l2_normalize_rows(o);
}

int EmbeddingTable::row(const std::string& id) const {
    auto it = index.find(id);
    if (it == index.end()) throw std::runtime_error("unknown embedding id: " + id);
    return it->second;
}

void EmbeddingTable::rebuild_index() {
    index.clear();
    for (std::size_t i = 0; i < ids.size(); ++i)
        index[ids[i]] = static_cast<int>(i);
}

namespace {

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("tensor blob truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void write_tensors(std::ostream& out, const std::map<std::string, ad::Mat>& tensors) {
    write_u64(out, tensors.size());
    for (const auto& [name, m] : tensors) {
        write_u64(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u64(out, static_cast<std::uint64_t>(m.rows()));
        write_u64(out, static_cast<std::uint64_t>(m.cols()));
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) {
                double v = m(r, c);
                std::uint64_t bits;
                static_assert(sizeof(bits) == sizeof(v));
                std::memcpy(&bits, &v, 8);
                write_u64(out, bits);
            }
    }
}

std::map<std::string, ad::Mat> read_tensors(std::istream& in) {
    std::map<std::string, ad::Mat> tensors;
    std::uint64_t count = read_u64(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t name_len = read_u64(in);
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        auto rows = static_cast<int>(read_u64(in));
        auto cols = static_cast<int>(read_u64(in));
        ad::Mat m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                std::uint64_t bits = read_u64(in);
                double v;
                std::memcpy(&v, &bits, 8);
                m(r, c) = v;
            }
        tensors[name] = std::move(m);
    }
    return tensors;
}

}  // namespace coldrec
