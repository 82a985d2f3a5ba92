#include "coldrec/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coldrec {

namespace {

bool is_space_char(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool is_basic_punct(char c) {
    switch (c) {
        case '.': case ',': case '!': case '?': case ';': case ':':
        case '\'': case '"': case '(': case ')': case '-': case '&':
            return true;
        default:
            return false;
    }
}

bool starts_with_nocase(const std::string& s, std::size_t i, const char* prefix) {
    for (std::size_t k = 0; prefix[k]; ++k) {
        if (i + k >= s.size()) return false;
        if (std::tolower(static_cast<unsigned char>(s[i + k])) != prefix[k]) return false;
    }
    return true;
}

bool starts_url(const std::string& s, std::size_t i) {
    return starts_with_nocase(s, i, "http://") || starts_with_nocase(s, i, "https://") ||
           starts_with_nocase(s, i, "www.");
}

const std::unordered_set<std::string>& function_words() {
    static const std::unordered_set<std::string> words = {
        // determiners / pronouns
        "a", "an", "the", "this", "that", "these", "those", "some", "any", "each",
        "every", "no", "all", "both", "either", "neither", "such", "own", "same",
        "other", "another", "i", "me", "my", "mine", "myself", "we", "us", "our",
        "ours", "ourselves", "you", "your", "yours", "yourself", "yourselves",
        "he", "him", "his", "himself", "she", "her", "hers", "herself", "it",
        "its", "itself", "they", "them", "their", "theirs", "themselves", "who",
        "whom", "whose", "which", "what", "something", "anything", "nothing",
        "everything", "someone", "anyone", "everyone",
        // contractions (post-clean tokens keep the apostrophe)
        "i'm", "i've", "i'll", "i'd", "you're", "you've", "you'll", "you'd",
        "he's", "she's", "it's", "we're", "we've", "we'll", "they're", "they've",
        "they'll", "don't", "doesn't", "didn't", "isn't", "aren't", "wasn't",
        "weren't", "won't", "wouldn't", "can't", "couldn't", "shouldn't",
        "haven't", "hasn't", "hadn't", "that's", "there's", "what's", "let's",
        // conjunctions / complementizers
        "and", "or", "but", "nor", "so", "yet", "if", "whether", "because",
        "although", "though", "unless", "until", "while", "since", "than",
        "that", "as", "whereas", "once",
        // prepositions
        "of", "in", "on", "at", "by", "for", "with", "without", "about",
        "against", "between", "among", "into", "onto", "through", "during",
        "before", "after", "above", "below", "to", "from", "up", "down", "out",
        "off", "over", "under", "again", "further", "per", "via", "upon",
        "within", "across", "behind", "beyond", "near", "around", "along",
        // auxiliaries / common verbs
        "is", "am", "are", "was", "were", "be", "been", "being", "have", "has",
        "had", "having", "do", "does", "did", "doing", "will", "would", "shall",
        "should", "can", "could", "may", "might", "must", "get", "got", "gets",
        "getting", "make", "makes", "made", "go", "goes", "went", "gone",
        "come", "came", "use", "used", "using", "need", "needs", "want",
        "wants", "buy", "bought", "say", "says", "said", "see", "saw", "seen",
        "know", "knew", "known", "think", "thought", "take", "took", "taken",
        "give", "gave", "given", "keep", "kept", "let", "put", "seem", "seems",
        "seemed", "look", "looks", "looked", "feel", "feels", "felt", "work",
        "works", "worked", "try", "tried", "tries",
        // adverbs / fillers
        "not", "very", "really", "quite", "rather", "too", "also", "just",
        "only", "even", "still", "already", "always", "never", "often",
        "sometimes", "usually", "here", "there", "now", "then", "when", "where",
        "why", "how", "again", "more", "most", "less", "least", "much", "many",
        "few", "lot", "lots", "etc", "however", "therefore", "thus", "maybe",
        "perhaps", "please", "well", "ok", "okay", "yes", "yeah",
    };
    return words;
}

const std::unordered_set<std::string>& adjective_words() {
    static const std::unordered_set<std::string> words = {
        "good", "bad", "great", "best", "worst", "better", "worse", "new",
        "old", "big", "small", "large", "little", "long", "short", "high",
        "low", "wide", "narrow", "thick", "thin", "heavy", "light", "fast",
        "slow", "easy", "hard", "soft", "firm", "strong", "weak", "cheap",
        "expensive", "free", "full", "empty", "clean", "dirty", "hot", "cold",
        "warm", "cool", "dry", "wet", "fresh", "nice", "fine", "pretty",
        "beautiful", "ugly", "simple", "complex", "smooth", "rough", "sharp",
        "dull", "bright", "dark", "deep", "shallow", "early", "late", "quick",
        "ready", "happy", "safe", "sure", "real", "true", "false", "wrong",
        "sturdy", "durable", "flimsy", "solid", "hollow", "round", "square",
        "flat", "red", "blue", "green", "black", "white", "gray", "grey",
        "brown", "yellow", "orange", "purple", "pink", "silver", "gold",
        "golden", "plastic", "wooden", "metal", "ceramic", "glass", "leather",
        "cotton", "steel", "stainless", "aluminum", "rubber", "vinyl", "wool",
        "top", "bottom", "left", "right", "front", "back", "inner", "outer",
        "main", "extra", "double", "single", "mini", "portable", "compact",
        "digital", "electric", "electronic", "manual", "automatic", "wireless",
        "italian", "french", "chinese", "japanese", "mexican", "american",
        "seasonal", "holiday", "perfect", "awesome", "terrible", "horrible",
        "broken", "defective", "reliable", "comfortable", "cozy", "tasty",
        "delicious", "sweet", "sour", "bitter", "salty", "spicy", "crispy",
        "tender", "juicy", "friendly", "rude", "quiet", "loud", "busy",
        "popular", "favorite", "local", "organic", "natural", "premium",
        "classic", "modern", "vintage", "handmade", "decorative", "adjustable",
        "waterproof", "lightweight", "heavy-duty",
    };
    return words;
}

bool has_adjective_suffix(const std::string& w) {
    static const std::vector<std::string> suffixes = {
        "ous", "ful", "ive", "ible", "able", "ish", "less", "ic", "ing", "ed",
    };
    for (const auto& s : suffixes) {
        if (w.size() >= s.size() + 3 &&
            w.compare(w.size() - s.size(), s.size(), s) == 0)
            return true;
    }
    return false;
}

std::string strip_token_punct(const std::string& t) {
    std::size_t b = 0, e = t.size();
    auto strippable = [](char c) {
        return is_basic_punct(c) && c != '-' && c != '\'';
    };
    while (b < e && strippable(t[b])) ++b;
    while (e > b && strippable(t[e - 1])) --e;
    return t.substr(b, e - b);
}

std::string join_tokens(const std::vector<std::string>& toks, std::size_t b,
                        std::size_t e) {
    std::string out;
    for (std::size_t i = b; i < e; ++i) {
        if (!out.empty()) out += ' ';
        out += toks[i];
    }
    return out;
}

}  // namespace

std::string clean_text(const std::string& raw) {
    // 1) remove URLs, 2) strip HTML tags.
    std::string s;
    s.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size();) {
        if (starts_url(raw, i)) {
            while (i < raw.size() && !is_space_char(raw[i])) ++i;
            s += ' ';
        } else if (raw[i] == '<') {
            std::size_t close = raw.find('>', i);
            if (close != std::string::npos) {
                i = close + 1;
                s += ' ';
            } else {
                ++i;  // lone '<' is not basic punctuation; dropped below
                s += ' ';
            }
        } else {
            s += raw[i++];
        }
    }
    // 3) lowercase, keep letters/digits/basic punctuation, 4) collapse
    // repeated punctuation, 5) collapse whitespace.
    std::string out;
    out.reserve(s.size());
    char prev = '\0';
    for (char c : s) {
        char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (std::isalnum(static_cast<unsigned char>(lc)) || is_basic_punct(lc)) {
            if (is_basic_punct(lc) && lc == prev) continue;
            out += lc;
            prev = lc;
        } else {
            if (prev != ' ' && !out.empty()) out += ' ';
            prev = ' ';
        }
    }
    // trim + collapse spaces (punctuation collapse above may leave doubles)
    std::string final_out;
    final_out.reserve(out.size());
    for (char c : out) {
        if (c == ' ' && (final_out.empty() || final_out.back() == ' ')) continue;
        final_out += c;
    }
    while (!final_out.empty() && final_out.back() == ' ') final_out.pop_back();
    return final_out;
}

std::vector<std::string> tokenize(const std::string& cleaned) {
    std::vector<std::string> toks;
    std::istringstream ss(cleaned);
    std::string t;
    while (ss >> t) {
        std::string stripped = strip_token_punct(t);
        if (!stripped.empty()) toks.push_back(stripped);
    }
    return toks;
}

std::vector<PosTag> LexiconTagger::tag(const std::vector<std::string>& tokens) const {
    std::vector<PosTag> tags;
    tags.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (function_words().count(t)) {
            tags.push_back(PosTag::Function);
        } else if (adjective_words().count(t) || t.find('-') != std::string::npos ||
                   has_adjective_suffix(t)) {
            tags.push_back(PosTag::Adjective);
        } else {
            tags.push_back(PosTag::Noun);  // default-noun fallback
        }
    }
    return tags;
}

const PosTagger& default_tagger() {
    static const LexiconTagger tagger;
    return tagger;
}

std::vector<NounChunk> chunk_tokens(const std::vector<std::string>& tokens,
                                    const PosTagger& tagger) {
    constexpr std::size_t kMaxChunkTokens = 4;
    std::vector<PosTag> tags = tagger.tag(tokens);
    std::vector<NounChunk> chunks;
    std::size_t i = 0;
    while (i < tokens.size()) {
        if (tags[i] == PosTag::Function) {
            ++i;
            continue;
        }
        std::size_t adj_begin = i;
        while (i < tokens.size() && tags[i] == PosTag::Adjective) ++i;
        if (i >= tokens.size() || tags[i] != PosTag::Noun) continue;  // no noun head
        std::size_t noun_begin = i;
        while (i < tokens.size() && tags[i] == PosTag::Noun) ++i;
        std::size_t begin = adj_begin, end = i;  // [begin, end)
        if (end - begin > kMaxChunkTokens) begin = end - kMaxChunkTokens;
        (void)noun_begin;
        NounChunk c;
        c.begin = static_cast<int>(begin);
        c.end = static_cast<int>(end) - 1;
        c.tokens.assign(tokens.begin() + static_cast<long>(begin),
                        tokens.begin() + static_cast<long>(end));
        chunks.push_back(std::move(c));
    }
    return chunks;
}

std::vector<std::string> extract_noun_phrases(const std::string& text,
                                              const PosTagger& tagger) {
    std::vector<std::string> out;
    for (const auto& c : chunk_tokens(tokenize(text), tagger))
        out.push_back(join_tokens(c.tokens, 0, c.tokens.size()));
    return out;
}

std::vector<Attribute> extract_attributes(
    const std::unordered_map<std::string, std::string>& contents,
    const std::set<std::string>& short_fields, const std::set<std::string>& long_fields,
    const PosTagger& tagger) {
    std::vector<Attribute> out;
    std::unordered_set<std::string> seen;
    auto emit = [&](std::string text, const std::string& field) {
        if (text.empty() || seen.count(text)) return;
        seen.insert(text);
        out.push_back(Attribute{std::move(text), field});
    };
    // Deterministic field order: sorted field names, short fields first.
    for (const auto& field : short_fields) {
        auto it = contents.find(field);
        if (it == contents.end()) continue;
        std::string value = it->second;
        std::size_t start = 0;
        while (start <= value.size()) {
            std::size_t sep = value.find('|', start);
            std::string part =
                value.substr(start, sep == std::string::npos ? std::string::npos
                                                             : sep - start);
            emit(clean_text(part), field);
            if (sep == std::string::npos) break;
            start = sep + 1;
        }
    }
    for (const auto& field : long_fields) {
        auto it = contents.find(field);
        if (it == contents.end()) continue;
        for (auto& phrase : extract_noun_phrases(clean_text(it->second), tagger))
            emit(std::move(phrase), field);
    }
    return out;
}

std::vector<ReviewTerm> extract_review_terms(const std::string& review,
                                             const SentimentLexicon& lexicon,
                                             int window, const PosTagger& tagger) {
    std::vector<ReviewTerm> terms;
    std::vector<std::string> toks = tokenize(clean_text(review));
    if (toks.empty()) return terms;
    std::vector<NounChunk> chunks = chunk_tokens(toks, tagger);
    for (int p = 0; p < static_cast<int>(toks.size()); ++p) {
        const std::string& w = toks[static_cast<std::size_t>(p)];
        bool pos = lexicon.positive.count(w) > 0;
        bool neg = lexicon.negative.count(w) > 0;
        if (!pos && !neg) continue;
        // Nearest chunk by token distance; ties go to the earlier chunk.
        const NounChunk* best = nullptr;
        int best_dist = window + 1;
        for (const auto& c : chunks) {
            int dist = 0;
            if (p < c.begin)
                dist = c.begin - p;
            else if (p > c.end)
                dist = p - c.end;
            if (dist < best_dist) {
                best_dist = dist;
                best = &c;
            }
        }
        if (!best) continue;
        // A term is sentiment prefix + noun phrase only, so opinion words
        // inside the chunk are dropped.
        std::vector<std::string> phrase_toks;
        for (const auto& t : best->tokens)
            if (!lexicon.is_opinion(t)) phrase_toks.push_back(t);
        if (phrase_toks.empty()) continue;
        ReviewTerm term;
        term.polarity = pos ? 1 : -1;
        term.phrase = join_tokens(phrase_toks, 0, phrase_toks.size());
        term.text = (pos ? "good " : "bad ") + term.phrase;
        terms.push_back(std::move(term));
    }
    return terms;
}

std::set<std::string> filter_review_terms(
    const std::unordered_map<std::string, int>& term_item_counts, int min_items,
    double max_item_frac, int n_items) {
    if (max_item_frac <= 0.0 || max_item_frac > 1.0)
        throw std::invalid_argument("filter_review_terms: max_item_frac out of (0,1]");
    std::set<std::string> kept;
    const double cap = max_item_frac * n_items;
    for (const auto& [term, count] : term_item_counts)
        if (count >= min_items && count <= cap) kept.insert(term);
    return kept;
}

SentimentLexicon SentimentLexicon::load(const std::string& positive_path,
                                        const std::string& negative_path) {
    auto read = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open lexicon file: " + path);
        std::unordered_set<std::string> words;
        std::string line;
        while (std::getline(in, line)) {
            std::string w = clean_text(line);
            if (!w.empty()) words.insert(w);
        }
        return words;
    };
    SentimentLexicon lex;
    lex.positive = read(positive_path);
    lex.negative = read(negative_path);
    for (const auto& w : lex.positive)
        if (lex.negative.count(w))
            throw std::runtime_error("lexicon sets overlap on word: " + w);
    return lex;
}

SentimentLexicon SentimentLexicon::bundled() {
    return load(std::string(COLDREC_DATA_DIR) + "/lexicons/positive.txt",
                std::string(COLDREC_DATA_DIR) + "/lexicons/negative.txt");
}

}  // namespace coldrec
