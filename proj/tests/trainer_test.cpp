#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "coldrec/text_encoder.hpp"
#include "coldrec/trainer.hpp"
#include "support/tmpdir.hpp"

using namespace coldrec;

namespace {

ModelConfig tiny_model() {
    ModelConfig cfg;
    cfg.d_text = 16;
    cfg.d_hidden = 12;
    cfg.d = 8;
    cfg.max_seq_len = 12;
    return cfg;
}

// Two attribute clusters, items alternating between them, plus sequences and
// a small review graph. Small enough for finite differences.
TrainData tiny_data(const ModelConfig& model) {
    std::map<std::string, std::set<std::string>> items;
    for (int i = 0; i < 12; ++i) {
        std::string id = "i" + std::to_string(10 + i);
        const char* group = (i % 2 == 0) ? "a" : "b";
        items[id] = {std::string(group) + "0", std::string(group) + std::to_string(1 + i % 3)};
    }
    TrainData data;
    data.attr_graph = BipartiteGraph::build(items);

    HashingTextEncoder enc(model.d_text);
    std::unordered_map<std::string, std::string> texts;
    for (const auto& [id, attrs] : items) {
        std::string joined;
        for (const auto& a : attrs) joined += (joined.empty() ? "" : " ") + a;
        texts[id] = joined;
    }
    data.attr_features = compute_node_features(data.attr_graph, texts, enc);

    for (int u = 0; u < 4; ++u) {
        PurchaseSequence seq;
        seq.user_id = "u" + std::to_string(u);
        for (int p = 0; p < 4; ++p)
            seq.item_ids.push_back("i" + std::to_string(10 + (u * 2 + p * 2 + u % 2) % 12));
        data.sequences.push_back(seq);
    }

    std::map<std::string, std::vector<std::vector<std::string>>> reviews;
    for (int i = 0; i < 12; ++i) {
        std::string id = "i" + std::to_string(10 + i);
        reviews[id] = {{i % 2 == 0 ? "good grip" : "bad grip"}};
    }
    data.review_graph = build_review_graph(reviews, {"good grip", "bad grip"}, 3, 1);
    data.review_features = compute_node_features(data.review_graph, texts, enc);
    return data;
}

TrainConfig tiny_train(std::uint64_t seed = 42) {
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.max_epochs = 6;
    cfg.patience = 50;
    cfg.seed = seed;
    return cfg;
}

double params_distance(const ModelParams& a, const ModelParams& b) {
    double d = 0.0;
    for (const auto& [name, m] : a.tensors) d += (m - b.at(name)).norm();
    return d;
}

}  // namespace

TEST_CASE("steps_per_epoch covers all edges") {
    auto model = tiny_model();
    auto data = tiny_data(model);
    auto cfg = tiny_train();
    Trainer trainer(data, model, cfg);
    auto edges = data.attr_graph.n_edges();
    CHECK(trainer.steps_per_epoch() ==
          static_cast<int>((edges + 15) / 16));
    CHECK(trainer.task2_active());
    CHECK(trainer.task3_active());
}

TEST_CASE("training reduces the full-data loss") {
    auto model = tiny_model();
    auto data = tiny_data(model);
    auto cfg = tiny_train();
    cfg.max_epochs = 12;
    Trainer trainer(data, model, cfg);
    auto result = trainer.run();
    REQUIRE(!result.epoch_losses.empty());
    CHECK(!result.diverged);
    CHECK(result.epoch_losses.back().total < result.epoch_losses.front().total);
    for (const auto& el : result.epoch_losses) CHECK(std::isfinite(el.total));
}

TEST_CASE("gradients match central finite differences") {
    auto model = tiny_model();
    auto data = tiny_data(model);
    auto cfg = tiny_train();
    Trainer trainer(data, model, cfg);
    auto params = ModelParams::init(model, 3);
    std::mt19937_64 rng(5);
    StepBatch batch = trainer.sample_step_batch(rng);

    std::map<std::string, ad::Mat> grads;
    trainer.losses_at(params, batch, 0, &grads);

    const double step = 1e-4;
    std::mt19937_64 pick_rng(17);
    for (const auto& [name, tensor] : params.tensors) {
        // probe two random coordinates per tensor
        std::uniform_int_distribution<int> pr(0, static_cast<int>(tensor.rows()) - 1);
        std::uniform_int_distribution<int> pc(0, static_cast<int>(tensor.cols()) - 1);
        for (int probe = 0; probe < 2; ++probe) {
            int r = pr(pick_rng), c = pc(pick_rng);
            ModelParams hi = params, lo = params;
            hi.at(name)(r, c) += step;
            lo.at(name)(r, c) -= step;
            double fd = (trainer.losses_at(hi, batch, 0).total -
                         trainer.losses_at(lo, batch, 0).total) /
                        (2.0 * step);
            double analytic = grads.at(name)(r, c);
            double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
            CAPTURE(name);
            CAPTURE(r);
            CAPTURE(c);
            CHECK(std::abs(fd - analytic) / denom < 1e-4);
        }
    }
}

TEST_CASE("same seed gives identical training, different seed does not") {
    auto model = tiny_model();
    auto data = tiny_data(model);
    Trainer a(data, model, tiny_train(42));
    Trainer b(data, model, tiny_train(42));
    Trainer c(data, model, tiny_train(43));
    auto ra = a.run();
    auto rb = b.run();
    auto rc = c.run();
    CHECK(params_distance(ra.best_params, rb.best_params) == 0.0);
    CHECK(params_distance(ra.best_params, rc.best_params) > 0.0);
}

TEST_CASE("checkpoint round-trips and resume matches uninterrupted training") {
    auto model = tiny_model();
    auto data = tiny_data(model);
    auto cfg = tiny_train();
    cfg.max_epochs = 6;

    Trainer full(data, model, cfg);
    auto full_result = full.run();

    auto cfg_half = cfg;
    cfg_half.max_epochs = 3;
    Trainer half(data, model, cfg_half);
    half.run();

    testsupport::TempDir dir("ckpt");
    save_checkpoint(half.snapshot(), model, dir.file("c.bin"));
    TrainState restored = load_checkpoint(dir.file("c.bin"), model);
    CHECK(params_distance(restored.params, half.state().params) == 0.0);
    CHECK(restored.epoch == 3);

    Trainer resumed(data, model, cfg);  // max_epochs 6 again
    resumed.restore(std::move(restored));
    auto resumed_result = resumed.run();
    CHECK(params_distance(resumed_result.best_params, full_result.best_params) == 0.0);
}

TEST_CASE("checkpoint loading validates the model dimensions") {
    auto model = tiny_model();
    auto data = tiny_data(model);
    Trainer trainer(data, model, tiny_train());
    testsupport::TempDir dir("ckpt-bad");
    save_checkpoint(trainer.snapshot(), model, dir.file("c.bin"));
    ModelConfig other = model;
    other.d = model.d * 2;
    CHECK_THROWS(load_checkpoint(dir.file("c.bin"), other));
    CHECK_THROWS(load_checkpoint(dir.file("missing.bin"), model));
}

TEST_CASE("tasks degrade gracefully when their data is absent") {
    auto model = tiny_model();
    auto data = tiny_data(model);
    data.sequences.clear();
    data.review_graph = BipartiteGraph();
    data.review_features = ad::Mat::Zero(0, model.d_text);
    Trainer trainer(data, model, tiny_train());
    CHECK(!trainer.task2_active());
    CHECK(!trainer.task3_active());
    auto result = trainer.run();
    CHECK(!result.diverged);
    for (const auto& el : result.epoch_losses) {
        CHECK(el.l2 == 0.0);
        CHECK(el.l3 == 0.0);
    }
}

TEST_CASE("infonce-ce mode trains without crashing") {
    auto model = tiny_model();
    auto data = tiny_data(model);
    auto cfg = tiny_train();
    cfg.loss_mode = LossMode::InfoNceCe;
    Trainer trainer(data, model, cfg);
    auto result = trainer.run();
    REQUIRE(!result.epoch_losses.empty());
}

TEST_CASE("config validation rejects bad values") {
    TrainConfig cfg;
    cfg.lr = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = TrainConfig{};
    cfg.w[1] = -0.1;
    CHECK_THROWS(cfg.validate());
    cfg = TrainConfig{};
    cfg.p_mask = 1.0;
    CHECK_THROWS(cfg.validate());
}
