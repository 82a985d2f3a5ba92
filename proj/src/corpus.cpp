#include "coldrec/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

namespace coldrec {

namespace {

using nlohmann::json;

std::string json_value_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string out;
        for (const auto& e : v) {
            if (!out.empty()) out += '|';
            out += e.is_string() ? e.get<std::string>() : e.dump();
        }
        return out;
    }
    return v.dump();
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return in;
}

}  // namespace

std::vector<ItemRecord> load_items(const std::string& path, const CorpusSchema& schema,
                                   LoadReport* report) {
    std::ifstream in = open_or_throw(path);
    std::vector<ItemRecord> items;
    std::unordered_set<std::string> seen_ids;
    LoadReport rep;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains(schema.item_id_field) ||
            !j[schema.item_id_field].is_string() ||
            j[schema.item_id_field].get<std::string>().empty()) {
            ++rep.malformed;
            continue;
        }
        ItemRecord rec;
        rec.item_id = j[schema.item_id_field].get<std::string>();
        if (!seen_ids.insert(rec.item_id).second)
            throw std::runtime_error("duplicate item_id in corpus: " + rec.item_id);
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == schema.item_id_field) continue;
            rec.contents[it.key()] = json_value_to_string(it.value());
        }
        if (rec.contents.empty()) {
            seen_ids.erase(rec.item_id);
            ++rep.malformed;
            continue;
        }
        items.push_back(std::move(rec));
        ++rep.parsed;
    }
    if (report) *report = rep;
    return items;
}

std::vector<InteractionRecord> load_interactions(const std::string& path,
                                                 const CorpusSchema& schema,
                                                 LoadReport* report) {
    std::ifstream in = open_or_throw(path);
    std::vector<InteractionRecord> rows;
    std::set<std::tuple<std::string, std::string, std::int64_t>> seen;
    LoadReport rep;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains(schema.user_id_field) ||
            !j.contains(schema.item_id_field) || !j.contains(schema.timestamp_field) ||
            !j[schema.user_id_field].is_string() || !j[schema.item_id_field].is_string() ||
            !j[schema.timestamp_field].is_number_integer()) {
            ++rep.malformed;
            continue;
        }
        InteractionRecord rec;
        rec.user_id = j[schema.user_id_field].get<std::string>();
        rec.item_id = j[schema.item_id_field].get<std::string>();
        rec.timestamp = j[schema.timestamp_field].get<std::int64_t>();
        if (rec.user_id.empty() || rec.item_id.empty() || rec.timestamp < 0) {
            ++rep.malformed;
            continue;
        }
        if (!seen.insert({rec.user_id, rec.item_id, rec.timestamp}).second) {
            ++rep.malformed;  // duplicate (user, item, timestamp)
            continue;
        }
        if (j.contains(schema.review_field) && j[schema.review_field].is_string())
            rec.review_text = j[schema.review_field].get<std::string>();
        rows.push_back(std::move(rec));
        ++rep.parsed;
    }
    if (report) *report = rep;
    return rows;
}

SplitDataset build_scs_split(const std::vector<ItemRecord>& items,
                             const std::vector<InteractionRecord>& interactions,
                             const SplitConfig& config,
                             const AttributeCountFn& attribute_count) {
    if (config.min_attrs < 1) throw std::invalid_argument("min_attrs must be >= 1");
    if (config.split_ratio <= 0.0 || config.split_ratio >= 1.0)
        throw std::invalid_argument("split_ratio must be in (0, 1)");

    SplitDataset out;

    std::unordered_map<std::string, const ItemRecord*> item_by_id;
    for (const auto& it : items) item_by_id[it.item_id] = &it;

    // (a) iterated user/item interaction-count filter to fixpoint. Rows whose
    // item has no record are dropped here as well.
    std::vector<std::size_t> live;  // indices into `interactions`
    for (std::size_t i = 0; i < interactions.size(); ++i) {
        if (item_by_id.count(interactions[i].item_id))
            live.push_back(i);
        else
            ++out.stages.dropped_activity_filter;
    }
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::string, int> user_count, item_count;
        for (std::size_t i : live) {
            ++user_count[interactions[i].user_id];
            ++item_count[interactions[i].item_id];
        }
        std::vector<std::size_t> next;
        next.reserve(live.size());
        for (std::size_t i : live) {
            const auto& r = interactions[i];
            if (user_count[r.user_id] < config.min_user_inter ||
                item_count[r.item_id] < config.min_item_inter) {
                ++out.stages.dropped_activity_filter;
                changed = true;
            } else {
                next.push_back(i);
            }
        }
        live = std::move(next);
    }

    // (b) drop items with too few attributes.
    std::unordered_set<std::string> attr_ok;
    {
        std::unordered_set<std::string> live_items;
        for (std::size_t i : live) live_items.insert(interactions[i].item_id);
        for (const auto& id : live_items)
            if (attribute_count(*item_by_id[id]) >=
                static_cast<std::size_t>(config.min_attrs))
                attr_ok.insert(id);
        std::vector<std::size_t> next;
        next.reserve(live.size());
        for (std::size_t i : live) {
            if (attr_ok.count(interactions[i].item_id))
                next.push_back(i);
            else
                ++out.stages.dropped_attr_filter;
        }
        live = std::move(next);
    }
    if (live.empty())
        throw std::runtime_error(
            "SCS split: no interactions survive filtering (activity-dropped=" +
            std::to_string(out.stages.dropped_activity_filter) + ", attr-dropped=" +
            std::to_string(out.stages.dropped_attr_filter) + ")");

    // (c) sort items by popularity (descending interaction count, ties by id).
    std::unordered_map<std::string, int> popularity;
    for (std::size_t i : live) ++popularity[interactions[i].item_id];
    std::vector<std::string> sorted_items(attr_ok.begin(), attr_ok.end());
    std::erase_if(sorted_items, [&](const std::string& id) { return !popularity.count(id); });
    std::sort(sorted_items.begin(), sorted_items.end(),
              [&](const std::string& a, const std::string& b) {
                  if (popularity[a] != popularity[b]) return popularity[a] > popularity[b];
                  return a < b;
              });

    // (d) top split_ratio of items form the training pool; the rest are SCS.
    auto n_pool = static_cast<std::size_t>(
        static_cast<double>(sorted_items.size()) * config.split_ratio + 1e-9);
    std::unordered_set<std::string> pool(sorted_items.begin(),
                                         sorted_items.begin() + static_cast<long>(n_pool));
    for (std::size_t k = n_pool; k < sorted_items.size(); ++k)
        out.test_items.insert(sorted_items[k]);

    std::vector<std::size_t> pool_rows, test_rows;
    for (std::size_t i : live) {
        if (pool.count(interactions[i].item_id))
            pool_rows.push_back(i);
        else
            test_rows.push_back(i);
    }

    // (e) trailing val_frac of the training interactions by timestamp.
    std::stable_sort(pool_rows.begin(), pool_rows.end(),
                     [&](std::size_t a, std::size_t b) {
                         const auto& x = interactions[a];
                         const auto& y = interactions[b];
                         return std::tie(x.timestamp, x.user_id, x.item_id) <
                                std::tie(y.timestamp, y.user_id, y.item_id);
                     });
    auto n_val = static_cast<std::size_t>(
        static_cast<double>(pool_rows.size()) * config.val_frac + 1e-9);
    std::size_t n_train = pool_rows.size() - n_val;
    std::vector<std::size_t> train_rows(pool_rows.begin(),
                                        pool_rows.begin() + static_cast<long>(n_train));
    std::vector<std::size_t> val_rows(pool_rows.begin() + static_cast<long>(n_train),
                                      pool_rows.end());

    for (std::size_t i : train_rows) {
        out.train_items.insert(interactions[i].item_id);
        out.users.insert(interactions[i].user_id);
    }
    for (std::size_t i : val_rows)
        if (!out.train_items.count(interactions[i].item_id))
            out.val_items.insert(interactions[i].item_id);

    // (f) val/test interactions from users unseen in train are removed.
    auto keep_seen_users = [&](std::vector<std::size_t>& rows) {
        std::vector<std::size_t> kept;
        kept.reserve(rows.size());
        for (std::size_t i : rows) {
            if (out.users.count(interactions[i].user_id))
                kept.push_back(i);
            else
                ++out.stages.dropped_unseen_user;
        }
        rows = std::move(kept);
    };
    keep_seen_users(val_rows);
    keep_seen_users(test_rows);

    for (std::size_t i : train_rows) out.train.push_back(interactions[i]);
    for (std::size_t i : val_rows) out.val.push_back(interactions[i]);
    for (std::size_t i : test_rows) out.test.push_back(interactions[i]);
    out.train_rows = std::move(train_rows);
    out.val_rows = std::move(val_rows);
    out.test_rows = std::move(test_rows);
    if (out.train.empty())
        throw std::runtime_error("SCS split: empty training set after filtering");
    return out;
}

std::vector<PurchaseSequence> build_purchase_sequences(
    const std::vector<InteractionRecord>& train_interactions, int max_seq_len) {
    std::map<std::string, std::vector<std::pair<std::int64_t, std::string>>> per_user;
    for (const auto& r : train_interactions)
        per_user[r.user_id].emplace_back(r.timestamp, r.item_id);
    std::vector<PurchaseSequence> out;
    out.reserve(per_user.size());
    for (auto& [user, purchases] : per_user) {
        std::sort(purchases.begin(), purchases.end());  // timestamp, then item_id
        PurchaseSequence seq;
        seq.user_id = user;
        std::size_t start = purchases.size() > static_cast<std::size_t>(max_seq_len)
                                ? purchases.size() - static_cast<std::size_t>(max_seq_len)
                                : 0;
        for (std::size_t i = start; i < purchases.size(); ++i)
            seq.item_ids.push_back(purchases[i].second);
        out.push_back(std::move(seq));
    }
    return out;
}

void save_split_manifest(const SplitDataset& split, const std::string& path) {
    json j;
    j["train_rows"] = split.train_rows;
    j["val_rows"] = split.val_rows;
    j["test_rows"] = split.test_rows;
    j["train_items"] = split.train_items;
    j["val_items"] = split.val_items;
    j["test_items"] = split.test_items;
    j["users"] = split.users;
    j["dropped"] = {{"activity_filter", split.stages.dropped_activity_filter},
                    {"attr_filter", split.stages.dropped_attr_filter},
                    {"unseen_user", split.stages.dropped_unseen_user}};
    std::ofstream outf(path);
    if (!outf) throw std::runtime_error("cannot write split manifest: " + path);
    outf << j.dump(2) << "\n";
}

}  // namespace coldrec
