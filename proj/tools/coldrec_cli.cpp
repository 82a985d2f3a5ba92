#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "coldrec/pipeline.hpp"

namespace {

struct Flags {
    std::string config_path;
    std::string workdir;
    std::string loss_mode;
    std::string encoder;
    std::int64_t seed = -1;
};

coldrec::PipelineConfig load_config(const Flags& flags) {
    coldrec::PipelineConfig cfg = coldrec::PipelineConfig::load(flags.config_path);
    if (!flags.workdir.empty()) cfg.workdir = flags.workdir;
    if (!flags.loss_mode.empty()) cfg.train.loss_mode = coldrec::parse_loss_mode(flags.loss_mode);
    if (!flags.encoder.empty()) cfg.encoder = flags.encoder;
    if (flags.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(flags.seed);
    return cfg;
}

void add_common(CLI::App* cmd, Flags& flags) {
    cmd->add_option("--config", flags.config_path, "pipeline config file (JSON)")
        ->required();
    cmd->add_option("--workdir", flags.workdir, "artifact directory override");
    cmd->add_option("--seed", flags.seed, "training seed override");
    cmd->add_option("--loss-mode", flags.loss_mode, "unified or infonce-ce")
        ->check(CLI::IsMember({"unified", "infonce-ce"}));
    cmd->add_option("--encoder", flags.encoder, "hash or precomputed:<path>");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-task item-attribute graph pre-training for cold-start recommendation"};
    app.require_subcommand(1);

    Flags flags;
    CLI::App* preprocess = app.add_subcommand(
        "preprocess", "build the split, attribute and review-term artifacts");
    CLI::App* pretrain = app.add_subcommand("pretrain", "train and write a checkpoint");
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "rank held-out items and report Recall/NDCG");
    CLI::App* analyze = app.add_subcommand(
        "analyze", "embedding-vs-attribute correlation over item pairs");
    for (CLI::App* cmd : {preprocess, pretrain, evaluate, analyze}) add_common(cmd, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        coldrec::PipelineConfig cfg = load_config(flags);
        std::string dir;
        if (preprocess->parsed()) dir = coldrec::run_preprocess(cfg);
        if (pretrain->parsed()) dir = coldrec::run_pretrain(cfg);
        if (evaluate->parsed()) dir = coldrec::run_evaluate(cfg);
        if (analyze->parsed()) dir = coldrec::run_analyze(cfg);
        std::cout << "artifacts: " << dir << "\n";
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
