#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "support/tmpdir.hpp"

namespace fs = std::filesystem;
using testsupport::TempDir;
using testsupport::read_file;
using testsupport::write_file;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(COLDREC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string demo_config(const TempDir& dir, const std::string& extra = "") {
    std::string data = COLDREC_DATA_DIR;
    std::string cfg = std::string("{") + R"("items_path":")" + data +
                      R"(/demo/items.jsonl",)" + R"("interactions_path":")" + data +
                      R"(/demo/interactions.jsonl",)" + R"("workdir":")" + dir.str() +
                      R"(/work",)" +
                      R"("short_fields":["brand","category"],)"
                      R"("long_fields":["title","description"],)"
                      R"("term_min_items":1,"reviews_per_item":10,)"
                      R"("split":{"min_user_inter":3,"min_item_inter":2,"min_attrs":2,)"
                      R"("split_ratio":0.85,"val_frac":0.1},)"
                      R"("model":{"d_text":64,"d_hidden":32,"d":16,"max_seq_len":20},)"
                      R"("train":{"batch_size":64,"patience":5,"max_epochs":15,"seed":42},)"
                      R"("eval_ns":[1,3,5])" +
                      extra + "}";
    std::string path = dir.file("config.json");
    write_file(path, cfg);
    return path;
}

// Sole directory matching prefix under the workdir.
std::string artifact_dir(const TempDir& dir, const std::string& prefix) {
    for (const auto& entry : fs::directory_iterator(dir.str() + "/work"))
        if (entry.path().filename().string().rfind(prefix, 0) == 0)
            return entry.path().string();
    return "";
}

}  // namespace

TEST_CASE("missing or malformed config exits with code 1") {
    CHECK(run_cli("preprocess --config /definitely/not/here.json") == 1);
    TempDir dir("cli-badcfg");
    write_file(dir.file("bad.json"), "{not json");
    CHECK(run_cli("preprocess --config " + dir.file("bad.json")) == 1);
    write_file(dir.file("unknown.json"),
               R"({"items_path":"x","interactions_path":"y","frobnicate":1})");
    CHECK(run_cli("preprocess --config " + dir.file("unknown.json")) == 1);
}

TEST_CASE("missing referenced paths fail before any work") {
    TempDir dir("cli-missing");
    std::string cfg = demo_config(dir, R"(,"lexicon_positive":"/nope/pos.txt",)"
                                       R"("lexicon_negative":"/nope/neg.txt")");
    CHECK(run_cli("preprocess --config " + cfg) == 1);
    CHECK(!fs::exists(dir.str() + "/work"));
}

TEST_CASE("pretrain before preprocess is a config error") {
    TempDir dir("cli-order");
    std::string cfg = demo_config(dir);
    CHECK(run_cli("pretrain --config " + cfg) == 1);
}

TEST_CASE("bad flag values are rejected by the parser") {
    TempDir dir("cli-flags");
    std::string cfg = demo_config(dir);
    CHECK(run_cli("preprocess --config " + cfg + " --loss-mode sorcery") != 0);
    CHECK(run_cli("transmogrify --config " + cfg) != 0);
}

TEST_CASE("full pipeline runs and reruns deterministically") {
    TempDir dir("cli-full");
    std::string cfg = demo_config(dir);
    REQUIRE(run_cli("preprocess --config " + cfg) == 0);
    std::string pre = artifact_dir(dir, "preprocess-");
    REQUIRE(!pre.empty());
    std::string split_first = read_file(pre + "/split.json");
    std::string attrs_first = read_file(pre + "/attributes.json");

    REQUIRE(run_cli("preprocess --config " + cfg) == 0);
    CHECK(read_file(pre + "/split.json") == split_first);
    CHECK(read_file(pre + "/attributes.json") == attrs_first);

    REQUIRE(run_cli("pretrain --config " + cfg) == 0);
    std::string train = artifact_dir(dir, "pretrain-");
    REQUIRE(!train.empty());
    CHECK(fs::exists(train + "/checkpoint.bin"));
    CHECK(fs::exists(train + "/train_log.jsonl"));

    REQUIRE(run_cli("evaluate --config " + cfg) == 0);
    std::string eval = artifact_dir(dir, "evaluate-");
    REQUIRE(!eval.empty());
    std::string report_first = read_file(eval + "/report.json");
    CHECK(report_first.find("recall") != std::string::npos);
    REQUIRE(run_cli("evaluate --config " + cfg) == 0);
    CHECK(read_file(eval + "/report.json") == report_first);

    REQUIRE(run_cli("analyze --config " + cfg) == 0);
    std::string analyze = artifact_dir(dir, "analyze-");
    std::string correlations = read_file(analyze + "/correlations.json");
    CHECK(correlations.find("scs-existing") != std::string::npos);
}

TEST_CASE("seed and loss-mode overrides land in separate artifact directories") {
    TempDir dir("cli-hash");
    std::string cfg = demo_config(dir);
    REQUIRE(run_cli("preprocess --config " + cfg) == 0);
    REQUIRE(run_cli("pretrain --config " + cfg) == 0);
    REQUIRE(run_cli("pretrain --config " + cfg + " --seed 7") == 0);
    REQUIRE(run_cli("pretrain --config " + cfg + " --loss-mode infonce-ce") == 0);
    int n_pretrain = 0;
    for (const auto& entry : fs::directory_iterator(dir.str() + "/work"))
        if (entry.path().filename().string().rfind("pretrain-", 0) == 0) ++n_pretrain;
    CHECK(n_pretrain == 3);
}
