#pragma once

#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace coldrec {

// A normalized phrase describing an item, plus the content field it came from.
struct Attribute {
    std::string text;
    std::string source_field;
    bool operator<(const Attribute& o) const { return text < o.text; }
};

// Sentiment-binarized phrase distilled from a review ("good lock" / "bad hinge").
struct ReviewTerm {
    std::string text;    // "good <phrase>" or "bad <phrase>"
    int polarity = 0;    // +1 or -1, matches the prefix
    std::string phrase;  // underlying noun phrase
};

struct SentimentLexicon {
    std::unordered_set<std::string> positive;
    std::unordered_set<std::string> negative;

    bool is_opinion(const std::string& w) const {
        return positive.count(w) > 0 || negative.count(w) > 0;
    }
    // One word per line, UTF-8; throws on overlap between the two sets.
    static SentimentLexicon load(const std::string& positive_path,
                                 const std::string& negative_path);
    static SentimentLexicon bundled();
};

// Removes URLs and HTML tags, lowercases, drops characters outside
// letters/digits/basic punctuation, collapses repeated punctuation and
// whitespace. Idempotent.
std::string clean_text(const std::string& raw);

std::vector<std::string> tokenize(const std::string& cleaned);

enum class PosTag { Noun, Adjective, Function };

// Part-of-speech tagging behind an interface so a richer tagger can be
// plugged in; the default is a closed-class/adjective lexicon with a
// default-noun fallback.
class PosTagger {
public:
    virtual ~PosTagger() = default;
    virtual std::vector<PosTag> tag(const std::vector<std::string>& tokens) const = 0;
};

class LexiconTagger : public PosTagger {
public:
    std::vector<PosTag> tag(const std::vector<std::string>& tokens) const override;
};

const PosTagger& default_tagger();

// Maximal non-overlapping (adjective)*(noun)+ chunks of 1-4 tokens,
// left to right. Expects cleaned text.
std::vector<std::string> extract_noun_phrases(const std::string& text,
                                              const PosTagger& tagger = default_tagger());

struct NounChunk {
    std::vector<std::string> tokens;
    int begin = 0;  // token index of first token
    int end = 0;    // token index of last token (inclusive)
};
std::vector<NounChunk> chunk_tokens(const std::vector<std::string>& tokens,
                                    const PosTagger& tagger = default_tagger());

// Short fields pass through clean_text verbatim (multi-valued fields use '|'
// as a separator); long fields go through the noun-phrase chunker. Returns the
// union, deduplicated by text.
std::vector<Attribute> extract_attributes(
    const std::unordered_map<std::string, std::string>& contents,
    const std::set<std::string>& short_fields,
    const std::set<std::string>& long_fields,
    const PosTagger& tagger = default_tagger());

// Pairs each opinion word with the nearest noun phrase within `window` tokens;
// opinion words themselves are stripped from the emitted phrase.
std::vector<ReviewTerm> extract_review_terms(const std::string& review,
                                             const SentimentLexicon& lexicon,
                                             int window = 5,
                                             const PosTagger& tagger = default_tagger());

// Keeps terms appearing in at least min_items items and at most
// max_item_frac * n_items items.
std::set<std::string> filter_review_terms(
    const std::unordered_map<std::string, int>& term_item_counts, int min_items,
    double max_item_frac, int n_items);

}  // namespace coldrec
