#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "coldrec/corpus.hpp"
#include "coldrec/graph.hpp"
#include "coldrec/losses.hpp"
#include "coldrec/model.hpp"

namespace coldrec {

struct TrainConfig {
    std::array<double, 3> w{0.6, 0.2, 0.2};  // task weights, all > 0
    double lambda = 0.6;                     // uniformity weight
    double lr = 0.005;
    int batch_size = 512;
    double p_mask = 0.2;
    int patience = 50;   // 200 when the sequential submodule is active
    int max_epochs = 1000;
    std::uint64_t seed = 42;
    LossMode loss_mode = LossMode::Unified;
    bool stop_grad_targets = false;  // treat h1 targets in task 2 as constants
    int seq_batch_divisor = 4;       // sequences per step = batch_size / this
    double infonce_temperature = 0.2;

    void validate() const;
};

// Everything the pre-training loop consumes; graphs and features are frozen.
struct TrainData {
    BipartiteGraph attr_graph;    // train items x attributes
    BipartiteGraph review_graph;  // may be empty; task 3 inactive then
    std::vector<PurchaseSequence> sequences;
    ad::Mat attr_features;    // text-encoder inputs per attr-graph node
    ad::Mat review_features;  // text-encoder inputs per review-graph node
};

struct PerTaskLoss {
    double l1 = 0.0, l2 = 0.0, l3 = 0.0, total = 0.0;
};

struct StepBatch {
    std::vector<std::size_t> attr_edges;    // indices into attr_graph.edges()
    std::vector<std::size_t> seq_indices;   // indices into eligible sequences
    std::vector<std::vector<char>> masks;   // per sampled sequence
    std::vector<std::size_t> review_edges;  // indices into review_graph.edges()
};

struct TrainState {
    ModelParams params;
    std::map<std::string, ad::Mat> adam_m, adam_v;
    ModelParams best_params;
    std::int64_t step = 0;
    int epoch = 0;
    double best_loss = 0.0;
    int epochs_since_best = 0;
    std::string rng_state;
};

struct TrainResult {
    ModelParams best_params;
    std::vector<PerTaskLoss> epoch_losses;  // full-data loss after each epoch
    int best_epoch = -1;
    bool diverged = false;  // non-finite loss encountered; training aborted
};

struct StepLogEntry {
    std::int64_t step;
    int epoch;
    PerTaskLoss loss;
};

class Trainer {
public:
    Trainer(const TrainData& data, const ModelConfig& model_config,
            const TrainConfig& config);

    StepBatch sample_step_batch(std::mt19937_64& rng) const;

    // One optimizer step on a sampled batch; returns the mini-batch loss.
    PerTaskLoss step(const StepBatch& batch);

    // Full-data pre-training loss at the current parameters (the
    // early-stopping indicator). Masking draws come from a per-epoch rng.
    PerTaskLoss full_loss(int epoch) const;

    // Runs epochs until patience is exceeded, max_epochs is reached, or the
    // loss goes non-finite.
    TrainResult run();

    const TrainState& state() const { return state_; }
    // Copy of the state with the rng stream serialized, ready to checkpoint.
    TrainState snapshot() const;
    void restore(TrainState state);

    int steps_per_epoch() const;
    bool task2_active() const { return !eligible_sequences_.empty(); }
    bool task3_active() const { return data_->review_graph.n_edges() > 0; }

    const std::vector<StepLogEntry>& step_log() const { return step_log_; }

private:
    struct TaskVars {
        ad::Var l1, l2, l3;  // invalid = inactive
    };
    TaskVars build_losses(ad::Tape& tape, const BoundParams& bound,
                          const StepBatch& batch, std::mt19937_64* eval_rng) const;
    void adam_update();

    const TrainData* data_;
    ModelConfig model_config_;
    TrainConfig config_;
    ad::SpMat attr_agg_, review_agg_;
    std::vector<std::size_t> eligible_sequences_;  // length >= 2
    TrainState state_;
    std::vector<StepLogEntry> step_log_;
    std::map<std::string, ad::Mat> last_grads_;  // filled by step(), for tests
    std::mt19937_64 rng_;

public:
    // Gradients from the most recent step; exposed for gradient checking.
    const std::map<std::string, ad::Mat>& last_gradients() const { return last_grads_; }
    // Tape-level loss assembly at given params, for finite-difference probes.
    PerTaskLoss losses_at(const ModelParams& params, const StepBatch& batch,
                          std::uint64_t mask_seed,
                          std::map<std::string, ad::Mat>* grads = nullptr) const;
};

constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const TrainState& state, const ModelConfig& config,
                     const std::string& path);
TrainState load_checkpoint(const std::string& path, const ModelConfig& expected_config);

}  // namespace coldrec
