#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace coldrec {

struct ItemRecord {
    std::string item_id;
    std::unordered_map<std::string, std::string> contents;
};

struct InteractionRecord {
    std::string user_id;
    std::string item_id;
    std::int64_t timestamp = 0;
    std::optional<std::string> review_text;
};

// Names of the raw-corpus fields; lets datasets with different schemas load
// through one path.
struct CorpusSchema {
    std::string item_id_field = "item_id";
    std::string user_id_field = "user_id";
    std::string timestamp_field = "timestamp";
    std::string review_field = "review";
};

struct LoadReport {
    std::size_t parsed = 0;
    std::size_t malformed = 0;
};

// Line-delimited JSON, one object per line. Malformed lines are skipped and
// counted; duplicate item ids are fatal.
std::vector<ItemRecord> load_items(const std::string& path, const CorpusSchema& schema,
                                   LoadReport* report = nullptr);
std::vector<InteractionRecord> load_interactions(const std::string& path,
                                                 const CorpusSchema& schema,
                                                 LoadReport* report = nullptr);

struct SplitConfig {
    int min_user_inter = 20;
    int min_item_inter = 20;
    int min_attrs = 5;
    double split_ratio = 0.9;  // fraction of items kept as the training pool
    double val_frac = 0.05;    // trailing fraction of train interactions -> validation
};

// Dropped-interaction counts per pipeline stage; together with the three
// splits they conserve the input interaction count.
struct SplitStageCounts {
    std::size_t dropped_activity_filter = 0;  // iterated user/item count filter
    std::size_t dropped_attr_filter = 0;      // items with too few attributes
    std::size_t dropped_unseen_user = 0;      // val/test rows from users absent in train
};

struct SplitDataset {
    std::vector<InteractionRecord> train, val, test;
    std::set<std::string> train_items;  // items with train interactions
    std::set<std::string> val_items;    // items appearing only in validation
    std::set<std::string> test_items;   // SCS items
    std::set<std::string> users;        // users present in train
    SplitStageCounts stages;
    // Row indices into the (post-filter, pre-split) interaction order, for the
    // on-disk manifest.
    std::vector<std::size_t> train_rows, val_rows, test_rows;
};

using AttributeCountFn = std::function<std::size_t(const ItemRecord&)>;

// Leakage-free SCS split: iterated activity filter, attribute-count filter,
// popularity-sorted 9:1 item split, trailing-timestamp validation carve-out,
// unseen-user removal. Deterministic; ties broken by id.
SplitDataset build_scs_split(const std::vector<ItemRecord>& items,
                             const std::vector<InteractionRecord>& interactions,
                             const SplitConfig& config,
                             const AttributeCountFn& attribute_count);

struct PurchaseSequence {
    std::string user_id;
    std::vector<std::string> item_ids;  // ascending timestamp, ties by item_id
};

// One sequence per user over the train split, truncated to the most recent
// max_seq_len items.
std::vector<PurchaseSequence> build_purchase_sequences(
    const std::vector<InteractionRecord>& train_interactions, int max_seq_len = 100);

// Split manifest round-trip (JSON): row indices per split plus item partitions.
void save_split_manifest(const SplitDataset& split, const std::string& path);

}  // namespace coldrec
