#include "coldrec/text_encoder.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace coldrec {

namespace {

// FNV-1a, 64-bit.
std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
    std::uint64_t h = 14695981039346656037ull ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

Eigen::VectorXd TextEncoder::encode_item(std::vector<std::string> attribute_texts) const {
    if (attribute_texts.empty())
        throw std::invalid_argument("encode_item: empty attribute list");
    std::sort(attribute_texts.begin(), attribute_texts.end());
    std::string joined;
    for (const auto& a : attribute_texts) {
        if (!joined.empty()) joined += ' ';
        joined += a;
    }
    return encode(joined);
}

HashingTextEncoder::HashingTextEncoder(int dim) : dim_(dim) {
    if (dim < 2) throw std::invalid_argument("HashingTextEncoder: dim must be >= 2");
}

Eigen::VectorXd HashingTextEncoder::encode(const std::string& text) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    auto bump = [&](const std::string& feature) {
        std::uint64_t h = fnv1a(feature, 0x9e3779b97f4a7c15ull);
        auto bucket = static_cast<int>(h % static_cast<std::uint64_t>(dim_));
        double sign = ((h >> 63) & 1u) ? -1.0 : 1.0;
        v(bucket) += sign;
    };
    std::istringstream ss(text);
    std::string word;
    bool any = false;
    while (ss >> word) {
        any = true;
        bump("w:" + word);
        if (word.size() >= 3)
            for (std::size_t i = 0; i + 3 <= word.size(); ++i)
                bump("c:" + word.substr(i, 3));
        else
            bump("c:" + word);
    }
    if (!any) {
        v(0) = 1.0;
        return v;
    }
    double n = v.norm();
    if (n == 0.0) {  // total sign cancellation
        v(0) = 1.0;
        return v;
    }
    return v / n;
}

std::unique_ptr<PrecomputedTextEncoder> PrecomputedTextEncoder::load(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file: " + path);
    auto enc = std::make_unique<PrecomputedTextEncoder>();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        std::string text = j.at("text").get<std::string>();
        auto values = j.at("vector").get<std::vector<double>>();
        if (enc->dim_ == 0) enc->dim_ = static_cast<int>(values.size());
        if (static_cast<int>(values.size()) != enc->dim_ || enc->dim_ == 0)
            throw std::runtime_error("embedding dimension mismatch for text: " + text);
        Eigen::VectorXd v =
            Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<long>(values.size()));
        double n = v.norm();
        if (n == 0.0) throw std::runtime_error("zero embedding for text: " + text);
        enc->table_[text] = v / n;
    }
    if (enc->table_.empty())
        throw std::runtime_error("embedding file has no entries: " + path);
    return enc;
}

Eigen::VectorXd PrecomputedTextEncoder::encode(const std::string& text) const {
    auto it = table_.find(text);
    if (it == table_.end())
        throw std::runtime_error("no precomputed embedding for text: " + text);
    return it->second;
}

}  // namespace coldrec
