#include "coldrec/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "coldrec/graph.hpp"
#include "coldrec/inference.hpp"
#include "coldrec/textproc.hpp"

namespace coldrec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::uint64_t h, const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
    return fnv1a(h, s.data(), s.size());
}

std::uint64_t hash_file(std::uint64_t h, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read input file: " + path);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h = fnv1a(h, buf, static_cast<std::size_t>(in.gcount()));
    }
    return h;
}

std::string hex8(std::uint64_t h) {
    std::ostringstream ss;
    ss << std::hex << std::setfill('0') << std::setw(16) << h;
    return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << content;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

json schema_json(const CorpusSchema& s) {
    return {{"item_id", s.item_id_field},
            {"user_id", s.user_id_field},
            {"timestamp", s.timestamp_field},
            {"review", s.review_field}};
}

json split_json(const SplitConfig& s) {
    return {{"min_user_inter", s.min_user_inter},
            {"min_item_inter", s.min_item_inter},
            {"min_attrs", s.min_attrs},
            {"split_ratio", s.split_ratio},
            {"val_frac", s.val_frac}};
}

json model_json(const ModelConfig& m) {
    return {{"d_text", m.d_text},
            {"d_hidden", m.d_hidden},
            {"d", m.d},
            {"max_seq_len", m.max_seq_len},
            {"ffn_mult", m.ffn_mult}};
}

json train_json(const TrainConfig& t) {
    return {{"w", {t.w[0], t.w[1], t.w[2]}},
            {"lambda", t.lambda},
            {"lr", t.lr},
            {"batch_size", t.batch_size},
            {"p_mask", t.p_mask},
            {"patience", t.patience},
            {"max_epochs", t.max_epochs},
            {"seed", t.seed},
            {"loss_mode", loss_mode_name(t.loss_mode)},
            {"stop_grad_targets", t.stop_grad_targets},
            {"seq_batch_divisor", t.seq_batch_divisor},
            {"infonce_temperature", t.infonce_temperature}};
}

json config_json(const PipelineConfig& c) {
    return {{"items_path", c.items_path},
            {"interactions_path", c.interactions_path},
            {"workdir", c.workdir},
            {"schema", schema_json(c.schema)},
            {"short_fields", c.short_fields},
            {"long_fields", c.long_fields},
            {"lexicon_positive", c.lexicon_positive},
            {"lexicon_negative", c.lexicon_negative},
            {"review_window", c.review_window},
            {"term_min_items", c.term_min_items},
            {"term_max_item_frac", c.term_max_item_frac},
            {"reviews_per_item", c.reviews_per_item},
            {"split", split_json(c.split)},
            {"model", model_json(c.model)},
            {"train", train_json(c.train)},
            {"eval_ns", c.eval_ns},
            {"encoder", c.encoder}};
}

void write_manifest(const std::string& dir, const std::string& command,
                    const PipelineConfig& cfg) {
    json m{{"command", command}, {"config", config_json(cfg)}};
    write_text(dir + "/manifest.json", m.dump(2) + "\n");
}

SentimentLexicon load_lexicon(const PipelineConfig& cfg) {
    if (cfg.lexicon_positive.empty() != cfg.lexicon_negative.empty())
        throw std::invalid_argument("lexicon paths must be given together");
    if (cfg.lexicon_positive.empty()) return SentimentLexicon::bundled();
    return SentimentLexicon::load(cfg.lexicon_positive, cfg.lexicon_negative);
}

// Attribute sets per item, for every item in the corpus.
std::map<std::string, std::set<std::string>> attribute_sets(
    const std::vector<ItemRecord>& items, const PipelineConfig& cfg) {
    std::map<std::string, std::set<std::string>> out;
    for (const auto& item : items) {
        auto attrs = extract_attributes(item.contents, cfg.short_fields, cfg.long_fields);
        auto& set = out[item.item_id];
        for (const auto& a : attrs) set.insert(a.text);
    }
    return out;
}

json interactions_json(const std::vector<InteractionRecord>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"user", r.user_id}, {"item", r.item_id}, {"ts", r.timestamp}});
    return arr;
}

std::vector<InteractionRecord> interactions_from_json(const json& arr) {
    std::vector<InteractionRecord> rows;
    for (const auto& r : arr) {
        InteractionRecord rec;
        rec.user_id = r.at("user").get<std::string>();
        rec.item_id = r.at("item").get<std::string>();
        rec.timestamp = r.at("ts").get<std::int64_t>();
        rows.push_back(std::move(rec));
    }
    return rows;
}

struct PreprocessArtifacts {
    std::vector<InteractionRecord> train, val, test;
    std::set<std::string> train_items, val_items, test_items;
    std::map<std::string, std::set<std::string>> attrs;  // all corpus items
    // item -> reviews -> term texts, train interactions only
    std::map<std::string, std::vector<std::vector<std::string>>> review_terms;
};

PreprocessArtifacts load_preprocess(const std::string& dir) {
    PreprocessArtifacts a;
    json splits = load_json_file(dir + "/interactions.json");
    a.train = interactions_from_json(splits.at("train"));
    a.val = interactions_from_json(splits.at("val"));
    a.test = interactions_from_json(splits.at("test"));
    for (const auto& id : splits.at("train_items")) a.train_items.insert(id.get<std::string>());
    for (const auto& id : splits.at("val_items")) a.val_items.insert(id.get<std::string>());
    for (const auto& id : splits.at("test_items")) a.test_items.insert(id.get<std::string>());
    json attrs = load_json_file(dir + "/attributes.json");
    for (auto it = attrs.begin(); it != attrs.end(); ++it)
        for (const auto& t : it.value()) a.attrs[it.key()].insert(t.get<std::string>());
    json terms = load_json_file(dir + "/review_terms.json");
    for (auto it = terms.begin(); it != terms.end(); ++it) {
        auto& reviews = a.review_terms[it.key()];
        for (const auto& review : it.value()) {
            std::vector<std::string> ts;
            for (const auto& t : review) ts.push_back(t.get<std::string>());
            reviews.push_back(std::move(ts));
        }
    }
    return a;
}

std::string item_text(const std::set<std::string>& attrs) {
    std::string joined;
    for (const auto& a : attrs) {  // std::set iterates sorted
        if (!joined.empty()) joined += ' ';
        joined += a;
    }
    return joined;
}

struct TrainSetup {
    TrainData data;
    std::size_t n_kept_terms = 0;
};

TrainSetup build_train_setup(const PreprocessArtifacts& a, const PipelineConfig& cfg,
                             const TextEncoder& encoder) {
    TrainSetup s;
    std::map<std::string, std::set<std::string>> train_attr_map;
    std::unordered_map<std::string, std::string> item_texts;
    for (const auto& id : a.train_items) {
        auto it = a.attrs.find(id);
        if (it == a.attrs.end() || it->second.empty())
            throw std::runtime_error("train item without attributes: " + id);
        train_attr_map[id] = it->second;
        item_texts[id] = item_text(it->second);
    }
    s.data.attr_graph = BipartiteGraph::build(train_attr_map);
    s.data.attr_features = compute_node_features(s.data.attr_graph, item_texts, encoder);
    s.data.sequences = build_purchase_sequences(a.train, cfg.model.max_seq_len);

    std::unordered_map<std::string, int> term_item_counts;
    std::map<std::string, std::vector<std::vector<std::string>>> train_terms;
    for (const auto& [id, reviews] : a.review_terms) {
        if (!a.train_items.count(id)) continue;
        train_terms[id] = reviews;
        std::set<std::string> distinct;
        for (const auto& review : reviews)
            for (const auto& t : review) distinct.insert(t);
        for (const auto& t : distinct) ++term_item_counts[t];
    }
    auto kept = filter_review_terms(term_item_counts, cfg.term_min_items,
                                    cfg.term_max_item_frac,
                                    static_cast<int>(a.train_items.size()));
    s.n_kept_terms = kept.size();
    if (!kept.empty() && !train_terms.empty()) {
        s.data.review_graph =
            build_review_graph(train_terms, kept, cfg.reviews_per_item, cfg.train.seed);
        if (s.data.review_graph.n_edges() > 0)
            s.data.review_features =
                compute_node_features(s.data.review_graph, item_texts, encoder);
    }
    if (s.data.review_features.rows() == 0)
        s.data.review_features = ad::Mat::Zero(0, encoder.dim());
    return s;
}

// Train graph plus the SCS test items, for inference-side propagation.
BipartiteGraph inserted_graph(const PreprocessArtifacts& a) {
    std::map<std::string, std::set<std::string>> train_map, scs_map;
    for (const auto& id : a.train_items) train_map[id] = a.attrs.at(id);
    for (const auto& id : a.test_items) {
        auto it = a.attrs.find(id);
        if (it == a.attrs.end() || it->second.empty())
            throw std::runtime_error("test item without attributes: " + id);
        scs_map[id] = it->second;
    }
    return BipartiteGraph::build(train_map).insert_items(scs_map);
}

void require_dir(const std::string& dir, const std::string& producer) {
    if (!fs::exists(dir + "/manifest.json"))
        throw std::invalid_argument("missing artifacts " + dir + "; run " + producer +
                                    " first");
}

PipelineConfig parse_config(const json& j);

}  // namespace

std::string loss_mode_name(LossMode mode) {
    return mode == LossMode::Unified ? "unified" : "infonce-ce";
}

LossMode parse_loss_mode(const std::string& name) {
    if (name == "unified") return LossMode::Unified;
    if (name == "infonce-ce") return LossMode::InfoNceCe;
    throw std::invalid_argument("unknown loss mode: " + name);
}

std::unique_ptr<TextEncoder> make_encoder(const PipelineConfig& cfg) {
    if (cfg.encoder == "hash")
        return std::make_unique<HashingTextEncoder>(cfg.model.d_text);
    const std::string prefix = "precomputed:";
    if (cfg.encoder.rfind(prefix, 0) == 0) {
        auto enc = PrecomputedTextEncoder::load(cfg.encoder.substr(prefix.size()));
        if (enc->dim() != cfg.model.d_text)
            throw std::invalid_argument("precomputed encoder dim differs from model.d_text");
        return enc;
    }
    throw std::invalid_argument("unknown encoder: " + cfg.encoder);
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    json j = load_json_file(path);
    static const std::set<std::string> known{
        "items_path", "interactions_path", "workdir", "schema", "short_fields",
        "long_fields", "lexicon_positive", "lexicon_negative", "review_window",
        "term_min_items", "term_max_item_frac", "reviews_per_item", "split",
        "model", "train", "eval_ns", "encoder"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw std::invalid_argument("unknown config key: " + it.key());

    try {
        return parse_config(j);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
}

namespace {

PipelineConfig parse_config(const json& j) {
    PipelineConfig c;
    c.items_path = j.at("items_path").get<std::string>();
    c.interactions_path = j.at("interactions_path").get<std::string>();
    if (j.contains("workdir")) c.workdir = j["workdir"].get<std::string>();
    if (j.contains("schema")) {
        const json& s = j["schema"];
        if (s.contains("item_id")) c.schema.item_id_field = s["item_id"];
        if (s.contains("user_id")) c.schema.user_id_field = s["user_id"];
        if (s.contains("timestamp")) c.schema.timestamp_field = s["timestamp"];
        if (s.contains("review")) c.schema.review_field = s["review"];
    }
    if (j.contains("short_fields"))
        c.short_fields = j["short_fields"].get<std::set<std::string>>();
    if (j.contains("long_fields"))
        c.long_fields = j["long_fields"].get<std::set<std::string>>();
    if (j.contains("lexicon_positive")) c.lexicon_positive = j["lexicon_positive"];
    if (j.contains("lexicon_negative")) c.lexicon_negative = j["lexicon_negative"];
    if (j.contains("review_window")) c.review_window = j["review_window"];
    if (j.contains("term_min_items")) c.term_min_items = j["term_min_items"];
    if (j.contains("term_max_item_frac")) c.term_max_item_frac = j["term_max_item_frac"];
    if (j.contains("reviews_per_item")) c.reviews_per_item = j["reviews_per_item"];
    if (j.contains("split")) {
        const json& s = j["split"];
        if (s.contains("min_user_inter")) c.split.min_user_inter = s["min_user_inter"];
        if (s.contains("min_item_inter")) c.split.min_item_inter = s["min_item_inter"];
        if (s.contains("min_attrs")) c.split.min_attrs = s["min_attrs"];
        if (s.contains("split_ratio")) c.split.split_ratio = s["split_ratio"];
        if (s.contains("val_frac")) c.split.val_frac = s["val_frac"];
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        if (m.contains("d_text")) c.model.d_text = m["d_text"];
        if (m.contains("d_hidden")) c.model.d_hidden = m["d_hidden"];
        if (m.contains("d")) c.model.d = m["d"];
        if (m.contains("max_seq_len")) c.model.max_seq_len = m["max_seq_len"];
        if (m.contains("ffn_mult")) c.model.ffn_mult = m["ffn_mult"];
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        if (t.contains("w")) {
            auto w = t["w"].get<std::vector<double>>();
            if (w.size() != 3) throw std::invalid_argument("train.w needs 3 weights");
            c.train.w = {w[0], w[1], w[2]};
        }
        if (t.contains("lambda")) c.train.lambda = t["lambda"];
        if (t.contains("lr")) c.train.lr = t["lr"];
        if (t.contains("batch_size")) c.train.batch_size = t["batch_size"];
        if (t.contains("p_mask")) c.train.p_mask = t["p_mask"];
        if (t.contains("patience")) c.train.patience = t["patience"];
        if (t.contains("max_epochs")) c.train.max_epochs = t["max_epochs"];
        if (t.contains("seed")) c.train.seed = t["seed"];
        if (t.contains("loss_mode"))
            c.train.loss_mode = parse_loss_mode(t["loss_mode"].get<std::string>());
        if (t.contains("stop_grad_targets")) c.train.stop_grad_targets = t["stop_grad_targets"];
        if (t.contains("seq_batch_divisor")) c.train.seq_batch_divisor = t["seq_batch_divisor"];
        if (t.contains("infonce_temperature"))
            c.train.infonce_temperature = t["infonce_temperature"];
    }
    if (j.contains("eval_ns")) c.eval_ns = j["eval_ns"].get<std::vector<int>>();
    if (j.contains("encoder")) c.encoder = j["encoder"];
    return c;
}

}  // namespace

void PipelineConfig::validate() const {
    if (!fs::exists(items_path))
        throw std::invalid_argument("items file not found: " + items_path);
    if (!fs::exists(interactions_path))
        throw std::invalid_argument("interactions file not found: " + interactions_path);
    for (const std::string& p : {lexicon_positive, lexicon_negative})
        if (!p.empty() && !fs::exists(p))
            throw std::invalid_argument("lexicon file not found: " + p);
    const std::string prefix = "precomputed:";
    if (encoder != "hash") {
        if (encoder.rfind(prefix, 0) != 0)
            throw std::invalid_argument("unknown encoder: " + encoder);
        if (!fs::exists(encoder.substr(prefix.size())))
            throw std::invalid_argument("encoder file not found: " +
                                        encoder.substr(prefix.size()));
    }
    if (eval_ns.empty()) throw std::invalid_argument("eval_ns must be nonempty");
    for (int n : eval_ns)
        if (n < 1) throw std::invalid_argument("eval_ns entries must be >= 1");
    if (review_window < 1) throw std::invalid_argument("review_window must be >= 1");
    if (term_max_item_frac <= 0.0 || term_max_item_frac > 1.0)
        throw std::invalid_argument("term_max_item_frac must be in (0, 1]");
    if (reviews_per_item < 1) throw std::invalid_argument("reviews_per_item must be >= 1");
    train.validate();
}

std::string preprocess_dir(const PipelineConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    h = hash_file(h, c.items_path);
    h = hash_file(h, c.interactions_path);
    if (!c.lexicon_positive.empty()) {
        h = hash_file(h, c.lexicon_positive);
        h = hash_file(h, c.lexicon_negative);
    }
    json dep{{"schema", schema_json(c.schema)},
             {"short_fields", c.short_fields},
             {"long_fields", c.long_fields},
             {"review_window", c.review_window},
             {"split", split_json(c.split)},
             {"max_seq_len", c.model.max_seq_len}};
    h = fnv1a(h, dep.dump());
    return c.workdir + "/preprocess-" + hex8(h);
}

std::string pretrain_dir(const PipelineConfig& c) {
    std::uint64_t h = fnv1a(0xcbf29ce484222325ull, preprocess_dir(c));
    json dep{{"model", model_json(c.model)},
             {"train", train_json(c.train)},
             {"encoder", c.encoder},
             {"term_min_items", c.term_min_items},
             {"term_max_item_frac", c.term_max_item_frac},
             {"reviews_per_item", c.reviews_per_item}};
    h = fnv1a(h, dep.dump());
    return c.workdir + "/pretrain-" + hex8(h);
}

std::string evaluate_dir(const PipelineConfig& c) {
    std::uint64_t h = fnv1a(0xcbf29ce484222325ull, pretrain_dir(c));
    h = fnv1a(h, json(c.eval_ns).dump());
    return c.workdir + "/evaluate-" + hex8(h);
}

std::string analyze_dir(const PipelineConfig& c) {
    std::uint64_t h = fnv1a(0xcbf29ce484222325ull, pretrain_dir(c) + "|analyze");
    return c.workdir + "/analyze-" + hex8(h);
}

std::string run_preprocess(const PipelineConfig& cfg) {
    cfg.validate();
    SentimentLexicon lexicon = load_lexicon(cfg);

    LoadReport item_report, inter_report;
    auto items = load_items(cfg.items_path, cfg.schema, &item_report);
    auto interactions = load_interactions(cfg.interactions_path, cfg.schema, &inter_report);

    auto attrs = attribute_sets(items, cfg);
    auto split = build_scs_split(items, interactions, cfg.split,
                                 [&](const ItemRecord& item) {
                                     auto it = attrs.find(item.item_id);
                                     return it == attrs.end() ? 0u : it->second.size();
                                 });

    // Review terms come from train interactions only; test reviews would leak.
    std::map<std::string, std::vector<std::vector<std::string>>> review_terms;
    for (const auto& row : split.train) {
        if (!row.review_text || row.review_text->empty()) continue;
        auto terms = extract_review_terms(*row.review_text, lexicon, cfg.review_window);
        if (terms.empty()) continue;
        std::vector<std::string> texts;
        for (const auto& t : terms) texts.push_back(t.text);
        review_terms[row.item_id].push_back(std::move(texts));
    }

    std::string dir = preprocess_dir(cfg);
    fs::create_directories(dir);
    save_split_manifest(split, dir + "/split.json");

    json splits{{"train", interactions_json(split.train)},
                {"val", interactions_json(split.val)},
                {"test", interactions_json(split.test)},
                {"train_items", split.train_items},
                {"val_items", split.val_items},
                {"test_items", split.test_items}};
    write_text(dir + "/interactions.json", splits.dump() + "\n");

    json attrs_out = json::object();
    for (const auto& [id, set] : attrs) attrs_out[id] = set;
    write_text(dir + "/attributes.json", attrs_out.dump() + "\n");

    json terms_out = json::object();
    for (const auto& [id, reviews] : review_terms) terms_out[id] = reviews;
    write_text(dir + "/review_terms.json", terms_out.dump() + "\n");

    json report{{"items_parsed", item_report.parsed},
                {"items_malformed", item_report.malformed},
                {"interactions_parsed", inter_report.parsed},
                {"interactions_malformed", inter_report.malformed},
                {"dropped_activity_filter", split.stages.dropped_activity_filter},
                {"dropped_attr_filter", split.stages.dropped_attr_filter},
                {"dropped_unseen_user", split.stages.dropped_unseen_user},
                {"train", split.train.size()},
                {"val", split.val.size()},
                {"test", split.test.size()},
                {"train_items", split.train_items.size()},
                {"val_items", split.val_items.size()},
                {"test_items", split.test_items.size()},
                {"users", split.users.size()},
                {"items_with_review_terms", review_terms.size()}};
    write_text(dir + "/report.json", report.dump(2) + "\n");
    write_manifest(dir, "preprocess", cfg);
    return dir;
}

std::string run_pretrain(const PipelineConfig& cfg) {
    cfg.validate();
    std::string pdir = preprocess_dir(cfg);
    require_dir(pdir, "preprocess");
    PreprocessArtifacts artifacts = load_preprocess(pdir);
    auto encoder = make_encoder(cfg);
    TrainSetup setup = build_train_setup(artifacts, cfg, *encoder);

    Trainer trainer(setup.data, cfg.model, cfg.train);
    TrainResult result = trainer.run();

    std::string dir = pretrain_dir(cfg);
    fs::create_directories(dir);

    std::ostringstream log;
    for (const auto& entry : trainer.step_log()) {
        json rec{{"type", "step"},     {"step", entry.step}, {"epoch", entry.epoch},
                 {"l1", entry.loss.l1}, {"l2", entry.loss.l2}, {"l3", entry.loss.l3},
                 {"total", entry.loss.total}};
        log << rec.dump() << "\n";
    }
    for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
        const auto& el = result.epoch_losses[e];
        json rec{{"type", "epoch"}, {"epoch", e},    {"l1", el.l1},
                 {"l2", el.l2},     {"l3", el.l3},   {"total", el.total}};
        log << rec.dump() << "\n";
    }
    write_text(dir + "/train_log.jsonl", log.str());

    json summary{{"best_epoch", result.best_epoch},
                 {"epochs_run", result.epoch_losses.size()},
                 {"diverged", result.diverged},
                 {"steps_per_epoch", trainer.steps_per_epoch()},
                 {"task2_active", trainer.task2_active()},
                 {"task3_active", trainer.task3_active()},
                 {"kept_review_terms", setup.n_kept_terms},
                 {"loss_mode", loss_mode_name(cfg.train.loss_mode)}};
    write_text(dir + "/result.json", summary.dump(2) + "\n");
    write_manifest(dir, "pretrain", cfg);
    save_checkpoint(trainer.snapshot(), cfg.model, dir + "/checkpoint.bin");

    if (result.diverged)
        throw std::runtime_error("training aborted on non-finite loss; see " + dir +
                                 "/train_log.jsonl");
    return dir;
}

std::string run_evaluate(const PipelineConfig& cfg) {
    cfg.validate();
    std::string pdir = preprocess_dir(cfg);
    require_dir(pdir, "preprocess");
    std::string tdir = pretrain_dir(cfg);
    require_dir(tdir, "pretrain");

    PreprocessArtifacts artifacts = load_preprocess(pdir);
    TrainState state = load_checkpoint(tdir + "/checkpoint.bin", cfg.model);
    auto encoder = make_encoder(cfg);

    EmbeddingTable all_items =
        embed_items(inserted_graph(artifacts), state.best_params, *encoder);

    EmbeddingTable candidates;
    for (const auto& id : artifacts.test_items) candidates.ids.push_back(id);
    candidates.vectors = ad::Mat(static_cast<int>(candidates.ids.size()),
                                 all_items.vectors.cols());
    for (std::size_t i = 0; i < candidates.ids.size(); ++i)
        candidates.vectors.row(static_cast<int>(i)) =
            all_items.vectors.row(all_items.row(candidates.ids[i]));
    candidates.rebuild_index();

    std::map<std::string, std::vector<std::string>> histories;
    for (const auto& row : artifacts.train) histories[row.user_id].push_back(row.item_id);
    std::map<std::string, std::set<std::string>> relevant;
    for (const auto& row : artifacts.test) relevant[row.user_id].insert(row.item_id);

    int k = *std::max_element(cfg.eval_ns.begin(), cfg.eval_ns.end());
    std::map<std::string, std::vector<std::string>> ranked;
    std::ostringstream recs;
    for (const auto& [user, rel] : relevant) {
        auto hist = histories.find(user);
        if (hist == histories.end()) continue;  // unseen users were split out
        ad::Mat user_vec = embed_user(hist->second, all_items);
        Recommendation rec = recommend(user, user_vec, candidates, k);
        ranked[user] = rec.item_ids;
        json line{{"user", rec.user_id}, {"items", rec.item_ids}, {"scores", rec.scores}};
        recs << line.dump() << "\n";
    }
    EvalReport report = evaluate_rankings(ranked, relevant, cfg.eval_ns);

    std::string dir = evaluate_dir(cfg);
    fs::create_directories(dir);
    write_text(dir + "/recommendations.jsonl", recs.str());

    json rj{{"users_evaluated", report.users_evaluated},
            {"users_skipped", report.users_skipped},
            {"recall", json::object()},
            {"ndcg", json::object()}};
    std::ostringstream txt;
    txt << "users evaluated: " << report.users_evaluated << "\n";
    for (int n : cfg.eval_ns) {
        rj["recall"][std::to_string(n)] = report.recall.at(n);
        rj["ndcg"][std::to_string(n)] = report.ndcg.at(n);
        txt << "Recall@" << n << "\t" << report.recall.at(n) << "\n";
        txt << "NDCG@" << n << "\t" << report.ndcg.at(n) << "\n";
    }
    write_text(dir + "/report.json", rj.dump(2) + "\n");
    write_text(dir + "/report.txt", txt.str());
    write_manifest(dir, "evaluate", cfg);
    return dir;
}

std::string run_analyze(const PipelineConfig& cfg) {
    cfg.validate();
    std::string pdir = preprocess_dir(cfg);
    require_dir(pdir, "preprocess");
    std::string tdir = pretrain_dir(cfg);
    require_dir(tdir, "pretrain");

    PreprocessArtifacts artifacts = load_preprocess(pdir);
    TrainState state = load_checkpoint(tdir + "/checkpoint.bin", cfg.model);
    auto encoder = make_encoder(cfg);
    EmbeddingTable items =
        embed_items(inserted_graph(artifacts), state.best_params, *encoder);

    std::map<std::string, std::set<std::string>> attr_sets;
    for (const auto& id : items.ids) attr_sets[id] = artifacts.attrs.at(id);

    json out = json::object();
    const std::pair<const char*, PairFilter> filters[] = {
        {"all", PairFilter::All},
        {"scs-existing", PairFilter::ScsExisting},
        {"scs-scs", PairFilter::ScsScs}};
    for (const auto& [name, filter] : filters) {
        CorrelationResult r = correlation_report(items, attr_sets, artifacts.test_items,
                                                 filter, 0.01, 10000, cfg.train.seed);
        out[name] = {{"r", r.r},
                     {"p_value", r.p_value},
                     {"significant", r.significant},
                     {"n_pairs", r.n_pairs}};
    }
    std::string dir = analyze_dir(cfg);
    fs::create_directories(dir);
    write_text(dir + "/correlations.json", out.dump(2) + "\n");
    write_manifest(dir, "analyze", cfg);
    return dir;
}

}  // namespace coldrec
