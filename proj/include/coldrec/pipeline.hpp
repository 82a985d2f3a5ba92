#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "coldrec/corpus.hpp"
#include "coldrec/metrics.hpp"
#include "coldrec/text_encoder.hpp"
#include "coldrec/trainer.hpp"

namespace coldrec {

// Everything one run needs, loadable from a JSON config file. CLI flags
// (--seed, --workdir, --loss-mode, --encoder) override the loaded values.
struct PipelineConfig {
    std::string items_path;
    std::string interactions_path;
    std::string workdir = "work";
    CorpusSchema schema;
    std::set<std::string> short_fields{"brand", "category"};
    std::set<std::string> long_fields{"title", "description"};
    std::string lexicon_positive;  // empty = bundled list
    std::string lexicon_negative;
    int review_window = 5;
    int term_min_items = 5;
    double term_max_item_frac = 0.5;
    int reviews_per_item = 100;
    SplitConfig split;
    ModelConfig model;
    TrainConfig train;
    std::vector<int> eval_ns{5, 20, 40};
    std::string encoder = "hash";  // "hash" or "precomputed:<path>"

    static PipelineConfig load(const std::string& path);
    // Checks referenced paths up front, before any work starts.
    void validate() const;
};

std::unique_ptr<TextEncoder> make_encoder(const PipelineConfig& config);

std::string loss_mode_name(LossMode mode);
LossMode parse_loss_mode(const std::string& name);

// Artifact directories carry a hash of everything they depend on, so a config
// or input change never silently reuses stale intermediates.
std::string preprocess_dir(const PipelineConfig& config);
std::string pretrain_dir(const PipelineConfig& config);
std::string evaluate_dir(const PipelineConfig& config);
std::string analyze_dir(const PipelineConfig& config);

// Each command writes its artifacts plus a manifest echoing the config, and
// returns the directory it wrote.
std::string run_preprocess(const PipelineConfig& config);
std::string run_pretrain(const PipelineConfig& config);
std::string run_evaluate(const PipelineConfig& config);
std::string run_analyze(const PipelineConfig& config);

}  // namespace coldrec
