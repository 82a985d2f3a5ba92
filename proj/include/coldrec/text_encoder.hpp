#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace coldrec {

// Frozen text -> unit-norm vector map standing in for a pre-trained language
// model. Instances are immutable and shareable across threads.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual int dim() const = 0;
    virtual Eigen::VectorXd encode(const std::string& text) const = 0;

    // Item text is the sorted, space-joined concatenation of its attributes,
    // so the result is invariant to attribute order.
    Eigen::VectorXd encode_item(std::vector<std::string> attribute_texts) const;
};

// Deterministic feature-hashing encoder: word unigrams plus character
// 3-grams, each hashed to a signed bucket, accumulated and L2-normalized.
// Empty text maps to the unit basis vector e0.
class HashingTextEncoder : public TextEncoder {
public:
    explicit HashingTextEncoder(int dim = 256);
    int dim() const override { return dim_; }
    Eigen::VectorXd encode(const std::string& text) const override;

private:
    int dim_;
};

// Lookup encoder over an offline-produced embedding file: one JSON object per
// line, {"text": ..., "vector": [...]}; vectors are re-normalized on load.
// Unseen text is a hard error.
class PrecomputedTextEncoder : public TextEncoder {
public:
    static std::unique_ptr<PrecomputedTextEncoder> load(const std::string& path);
    int dim() const override { return dim_; }
    Eigen::VectorXd encode(const std::string& text) const override;

private:
    int dim_ = 0;
    std::unordered_map<std::string, Eigen::VectorXd> table_;
};

}  // namespace coldrec
