#include "coldrec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace coldrec {

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'R', 'C', 'K', 'P', 'T', '0', '1'};
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

std::vector<int> sorted_unique(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

double read_f64(std::istream& in) {
    std::uint64_t bits = read_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    std::string s(read_u64(in), '\0');
    in.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!in) throw std::runtime_error("checkpoint truncated");
    return s;
}

}  // namespace

void TrainConfig::validate() const {
    for (double wi : w)
        if (wi <= 0.0) throw std::invalid_argument("task weights must be > 0");
    if (lambda <= 0.0) throw std::invalid_argument("lambda must be > 0");
    if (lr <= 0.0) throw std::invalid_argument("lr must be > 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (p_mask <= 0.0 || p_mask >= 1.0)
        throw std::invalid_argument("p_mask must be in (0, 1)");
    if (patience < 0) throw std::invalid_argument("patience must be >= 0");
    // 0 is allowed: the run then checkpoints the untrained initialization,
    // which is the baseline the evaluation stage compares against.
    if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
    if (seq_batch_divisor < 1)
        throw std::invalid_argument("seq_batch_divisor must be >= 1");
}

Trainer::Trainer(const TrainData& data, const ModelConfig& model_config,
                 const TrainConfig& config)
    : data_(&data), model_config_(model_config), config_(config), rng_(config.seed) {
    config.validate();
    if (data.attr_graph.n_edges() == 0)
        throw std::invalid_argument("trainer: item-attribute graph has no edges");
    attr_agg_ = build_mean_aggregation(data.attr_graph);
    if (data.review_graph.n_edges() > 0)
        review_agg_ = build_mean_aggregation(data.review_graph);
    for (std::size_t i = 0; i < data.sequences.size(); ++i)
        if (data.sequences[i].item_ids.size() >= 2) eligible_sequences_.push_back(i);
    for (std::size_t i : eligible_sequences_)
        for (const auto& id : data.sequences[i].item_ids)
            if (data.attr_graph.left_index(id) < 0)
                throw std::invalid_argument("trainer: sequence item not in graph: " + id);
    state_.params = ModelParams::init(model_config, config.seed);
    state_.best_params = state_.params;
    state_.best_loss = std::numeric_limits<double>::infinity();
    for (const auto& [name, m] : state_.params.tensors) {
        state_.adam_m[name] = ad::Mat::Zero(m.rows(), m.cols());
        state_.adam_v[name] = ad::Mat::Zero(m.rows(), m.cols());
    }
}

int Trainer::steps_per_epoch() const {
    auto e = data_->attr_graph.n_edges();
    auto b = static_cast<std::size_t>(config_.batch_size);
    return static_cast<int>((e + b - 1) / b);
}

StepBatch Trainer::sample_step_batch(std::mt19937_64& rng) const {
    StepBatch batch;
    const auto n_edges = data_->attr_graph.n_edges();
    std::uniform_int_distribution<std::size_t> edge_pick(0, n_edges - 1);
    for (int i = 0; i < config_.batch_size; ++i) batch.attr_edges.push_back(edge_pick(rng));
    if (task2_active()) {
        auto n_seq = static_cast<std::size_t>(
            std::max(1, config_.batch_size / config_.seq_batch_divisor));
        std::uniform_int_distribution<std::size_t> seq_pick(0, eligible_sequences_.size() - 1);
        for (std::size_t i = 0; i < n_seq; ++i) {
            std::size_t si = eligible_sequences_[seq_pick(rng)];
            batch.seq_indices.push_back(si);
            batch.masks.push_back(
                mask_sequence(data_->sequences[si].item_ids.size(), config_.p_mask, rng));
        }
    }
    if (task3_active()) {
        std::uniform_int_distribution<std::size_t> rpick(0, data_->review_graph.n_edges() - 1);
        for (int i = 0; i < config_.batch_size; ++i)
            batch.review_edges.push_back(rpick(rng));
    }
    return batch;
}

Trainer::TaskVars Trainer::build_losses(ad::Tape& t, const BoundParams& bound,
                                        const StepBatch& batch,
                                        std::mt19937_64* /*unused*/) const {
    const bool unified = config_.loss_mode == LossMode::Unified;
    TaskVars out;

    auto gnn_out = [&](const std::string& prefix, ad::Var z, const ad::SpMat& agg) {
        if (unified) return gnn_forward(t, bound, prefix, z, agg);
        // InfoNCE+CE comparison mode: unnormalized embeddings with
        // squared-norm regularization.
        ad::Var self = t.matmul_nt(z, bound.at(prefix + ".w_self"));
        ad::Var nbr = t.matmul_nt(t.spmm(agg, z), bound.at(prefix + ".w_nbr"));
        return t.add(self, nbr);
    };

    ad::Var h1;
    const bool need_h1 = !batch.attr_edges.empty() || !batch.seq_indices.empty();
    if (need_h1) {
        ad::Var z1 = interpret(t, bound, t.leaf(data_->attr_features));
        h1 = gnn_out("gnn1", z1, attr_agg_);
    }

    if (!batch.attr_edges.empty()) {
        const auto& g = data_->attr_graph;
        std::vector<int> item_idx, attr_idx;
        for (std::size_t e : batch.attr_edges) {
            item_idx.push_back(combined_left_index(g.edges()[e].first));
            attr_idx.push_back(combined_right_index(g, g.edges()[e].second));
        }
        ad::Var items = t.gather_rows(h1, sorted_unique(item_idx));
        ad::Var attrs = t.gather_rows(h1, sorted_unique(attr_idx));
        ad::Var pa = t.gather_rows(h1, item_idx);
        ad::Var pb = t.gather_rows(h1, attr_idx);
        if (unified) {
            out.l1 = task_loss(t, pa, pb, {items, attrs}, config_.lambda);
        } else {
            std::vector<int> labels(item_idx.size());
            for (std::size_t i = 0; i < labels.size(); ++i)
                labels[i] = static_cast<int>(i);
            ad::Var nce = info_nce(t, pa, pb, labels, config_.infonce_temperature);
            out.l1 = t.weighted_sum({{1.0, nce},
                                     {config_.lambda, t.mean_sq_norm(items)},
                                     {config_.lambda, t.mean_sq_norm(attrs)}});
        }
    }

    if (!batch.seq_indices.empty()) {
        const auto& g = data_->attr_graph;
        ad::Var targets_source =
            config_.stop_grad_targets ? t.leaf(t.value(h1)) : h1;
        std::vector<ad::Var> pred_parts;
        std::vector<int> target_idx;
        std::vector<int> all_seq_items;
        for (std::size_t si = 0; si < batch.seq_indices.size(); ++si) {
            const auto& seq = data_->sequences[batch.seq_indices[si]];
            const auto& mask = batch.masks[si];
            std::vector<int> idx;
            for (const auto& id : seq.item_ids)
                idx.push_back(combined_left_index(
                    static_cast<std::size_t>(g.left_index(id))));
            all_seq_items.insert(all_seq_items.end(), idx.begin(), idx.end());
            ad::Var h2 = encode_sequence(t, bound, t.gather_rows(h1, idx), mask);
            std::vector<int> masked_pos;
            for (std::size_t pos = 0; pos < mask.size(); ++pos) {
                if (mask[pos]) {
                    masked_pos.push_back(static_cast<int>(pos));
                    target_idx.push_back(idx[pos]);
                }
            }
            pred_parts.push_back(t.gather_rows(h2, masked_pos));
        }
        ad::Var preds = t.vstack(pred_parts);
        std::vector<int> distinct_items = sorted_unique(all_seq_items);
        ad::Var items = t.gather_rows(h1, distinct_items);
        ad::Var targets = t.gather_rows(targets_source, target_idx);
        if (unified) {
            out.l2 = task_loss(t, targets, preds, {items}, config_.lambda);
        } else {
            // BERT4Rec-style cross-entropy over the in-batch candidate items.
            std::vector<int> labels;
            for (int ti : target_idx) {
                auto it = std::lower_bound(distinct_items.begin(), distinct_items.end(), ti);
                labels.push_back(static_cast<int>(it - distinct_items.begin()));
            }
            ad::Var logits = t.matmul_nt(preds, items);
            ad::Var ce = t.cross_entropy_rows(logits, labels);
            out.l2 = t.weighted_sum({{1.0, ce}, {config_.lambda, t.mean_sq_norm(items)}});
        }
    }

    if (!batch.review_edges.empty()) {
        const auto& g = data_->review_graph;
        ad::Var z3 = interpret(t, bound, t.leaf(data_->review_features));
        ad::Var h3 = gnn_out("gnn3", z3, review_agg_);
        std::vector<int> item_idx, term_idx;
        for (std::size_t e : batch.review_edges) {
            item_idx.push_back(combined_left_index(g.edges()[e].first));
            term_idx.push_back(combined_right_index(g, g.edges()[e].second));
        }
        ad::Var items = t.gather_rows(h3, sorted_unique(item_idx));
        ad::Var terms = t.gather_rows(h3, sorted_unique(term_idx));
        ad::Var pa = t.gather_rows(h3, item_idx);
        ad::Var pb = t.gather_rows(h3, term_idx);
        if (unified) {
            out.l3 = task_loss(t, pa, pb, {items, terms}, config_.lambda);
        } else {
            std::vector<int> labels(item_idx.size());
            for (std::size_t i = 0; i < labels.size(); ++i)
                labels[i] = static_cast<int>(i);
            ad::Var nce = info_nce(t, pa, pb, labels, config_.infonce_temperature);
            out.l3 = t.weighted_sum({{1.0, nce},
                                     {config_.lambda, t.mean_sq_norm(items)},
                                     {config_.lambda, t.mean_sq_norm(terms)}});
        }
    }
    return out;
}

PerTaskLoss Trainer::losses_at(const ModelParams& params, const StepBatch& batch,
                               std::uint64_t /*unused*/,
                               std::map<std::string, ad::Mat>* grads) const {
    ad::Tape t;
    BoundParams bound = bind_params(t, params);
    TaskVars tv = build_losses(t, bound, batch, nullptr);
    ad::Var total = total_loss(t, tv.l1, tv.l2, tv.l3, config_.w);
    PerTaskLoss loss;
    loss.l1 = tv.l1.valid() ? t.scalar(tv.l1) : 0.0;
    loss.l2 = tv.l2.valid() ? t.scalar(tv.l2) : 0.0;
    loss.l3 = tv.l3.valid() ? t.scalar(tv.l3) : 0.0;
    loss.total = t.scalar(total);
    if (grads) {
        t.backward(total);
        grads->clear();
        for (const auto& [name, var] : bound.vars) (*grads)[name] = t.grad(var);
    }
    return loss;
}

PerTaskLoss Trainer::step(const StepBatch& batch) {
    PerTaskLoss loss = losses_at(state_.params, batch, 0, &last_grads_);
    adam_update();
    ++state_.step;
    step_log_.push_back({state_.step, state_.epoch, loss});
    return loss;
}

void Trainer::adam_update() {
    const double t_step = static_cast<double>(state_.step + 1);
    const double bc1 = 1.0 - std::pow(kAdamBeta1, t_step);
    const double bc2 = 1.0 - std::pow(kAdamBeta2, t_step);
    for (auto& [name, param] : state_.params.tensors) {
        const ad::Mat& g = last_grads_.at(name);
        ad::Mat& m = state_.adam_m.at(name);
        ad::Mat& v = state_.adam_v.at(name);
        m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
        v = kAdamBeta2 * v.array().matrix() + (1.0 - kAdamBeta2) * g.array().square().matrix();
        param.array() -=
            config_.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
    }
}

PerTaskLoss Trainer::full_loss(int epoch) const {
    // Evaluation masking uses its own rng so the training stream is untouched.
    std::mt19937_64 eval_rng(config_.seed ^ (0x5eedull + static_cast<std::uint64_t>(epoch) * 0x9e3779b97f4a7c15ull));
    StepBatch full;
    for (std::size_t e = 0; e < data_->attr_graph.n_edges(); ++e)
        full.attr_edges.push_back(e);
    for (std::size_t si : eligible_sequences_) {
        full.seq_indices.push_back(si);
        full.masks.push_back(
            mask_sequence(data_->sequences[si].item_ids.size(), config_.p_mask, eval_rng));
    }
    for (std::size_t e = 0; e < data_->review_graph.n_edges(); ++e)
        full.review_edges.push_back(e);
    return losses_at(state_.params, full, 0, nullptr);
}

TrainResult Trainer::run() {
    TrainResult result;
    result.best_epoch = state_.epoch - state_.epochs_since_best - 1;
    const int spe = steps_per_epoch();
    for (; state_.epoch < config_.max_epochs; ++state_.epoch) {
        for (int s = 0; s < spe; ++s) {
            StepBatch batch = sample_step_batch(rng_);
            PerTaskLoss loss = step(batch);
            if (!std::isfinite(loss.total)) {
                result.diverged = true;
                result.best_params = state_.best_params;
                return result;
            }
        }
        PerTaskLoss el = full_loss(state_.epoch);
        result.epoch_losses.push_back(el);
        if (!std::isfinite(el.total)) {
            result.diverged = true;
            result.best_params = state_.best_params;
            return result;
        }
        if (el.total < state_.best_loss) {
            state_.best_loss = el.total;
            state_.best_params = state_.params;
            state_.epochs_since_best = 0;
            result.best_epoch = state_.epoch;
        } else {
            ++state_.epochs_since_best;
        }
        if (state_.epochs_since_best > config_.patience) {
            ++state_.epoch;
            break;
        }
    }
    result.best_params = state_.best_params;
    return result;
}

void Trainer::restore(TrainState state) {
    state_ = std::move(state);
    if (!state_.rng_state.empty()) {
        std::istringstream ss(state_.rng_state);
        ss >> rng_;
    }
}

namespace {

void sync_rng(TrainState& state, const std::mt19937_64& rng) {
    std::ostringstream ss;
    ss << rng;
    state.rng_state = ss.str();
}

}  // namespace

void save_checkpoint(const TrainState& state_in, const ModelConfig& config,
                     const std::string& path) {
    TrainState state = state_in;
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
        out.write(kCheckpointMagic, 8);
        write_u64(out, kCheckpointVersion);
        write_u64(out, static_cast<std::uint64_t>(config.d_text));
        write_u64(out, static_cast<std::uint64_t>(config.d_hidden));
        write_u64(out, static_cast<std::uint64_t>(config.d));
        write_u64(out, static_cast<std::uint64_t>(config.max_seq_len));
        write_u64(out, static_cast<std::uint64_t>(config.ffn_mult));
        write_u64(out, static_cast<std::uint64_t>(state.step));
        write_u64(out, static_cast<std::uint64_t>(state.epoch));
        write_f64(out, state.best_loss);
        write_u64(out, static_cast<std::uint64_t>(state.epochs_since_best));
        write_string(out, state.rng_state);
        std::map<std::string, ad::Mat> all;
        for (const auto& [n, m] : state.params.tensors) all["cur." + n] = m;
        for (const auto& [n, m] : state.adam_m) all["m." + n] = m;
        for (const auto& [n, m] : state.adam_v) all["v." + n] = m;
        for (const auto& [n, m] : state.best_params.tensors) all["best." + n] = m;
        write_tensors(out, all);
    }
    std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::string& path, const ModelConfig& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    if (read_u64(in) != kCheckpointVersion)
        throw std::runtime_error("checkpoint version mismatch: " + path);
    ModelConfig cfg;
    cfg.d_text = static_cast<int>(read_u64(in));
    cfg.d_hidden = static_cast<int>(read_u64(in));
    cfg.d = static_cast<int>(read_u64(in));
    cfg.max_seq_len = static_cast<int>(read_u64(in));
    cfg.ffn_mult = static_cast<int>(read_u64(in));
    if (!(cfg == expected))
        throw std::runtime_error("checkpoint model dimensions do not match config");
    TrainState state;
    state.step = static_cast<std::int64_t>(read_u64(in));
    state.epoch = static_cast<int>(read_u64(in));
    state.best_loss = read_f64(in);
    state.epochs_since_best = static_cast<int>(read_u64(in));
    state.rng_state = read_string(in);
    auto all = read_tensors(in);
    ModelParams reference = ModelParams::init(expected, 0);
    state.params.config = cfg;
    state.best_params.config = cfg;
    for (const auto& [name, ref] : reference.tensors) {
        for (const char* prefix : {"cur.", "m.", "v.", "best."}) {
            auto it = all.find(std::string(prefix) + name);
            if (it == all.end())
                throw std::runtime_error("checkpoint missing tensor: " + name);
            if (it->second.rows() != ref.rows() || it->second.cols() != ref.cols())
                throw std::runtime_error("checkpoint shape mismatch for tensor: " + name);
        }
        state.params.tensors[name] = all.at("cur." + name);
        state.adam_m[name] = all.at("m." + name);
        state.adam_v[name] = all.at("v." + name);
        state.best_params.tensors[name] = all.at("best." + name);
    }
    return state;
}

TrainState Trainer::snapshot() const {
    TrainState s = state_;
    sync_rng(s, rng_);
    return s;
}

}  // namespace coldrec
