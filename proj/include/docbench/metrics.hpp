#pragma once

// Documentation quality metrics: smoothed sentence BLEU, Flesch-Kincaid
// grade level, length in words, and summed TF-IDF.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "docbench/error.hpp"

namespace docbench {

using TokenList = std::vector<std::string>;

namespace detail {

inline bool is_word_byte(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || (u >= '0' && u <= '9') || u >= 0x80;
}

inline bool is_space_byte(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace detail

// Lowercased maximal letter/digit runs plus single punctuation marks.
// Bytes outside ASCII count as letters so UTF-8 words stay intact.
inline TokenList tokenize_text(std::string_view text) {
    TokenList tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (detail::is_space_byte(c)) {
            ++i;
        } else if (detail::is_word_byte(c)) {
            std::string word;
            while (i < text.size() && detail::is_word_byte(text[i])) {
                word.push_back(detail::ascii_lower(text[i]));
                ++i;
            }
            tokens.push_back(std::move(word));
        } else {
            tokens.emplace_back(1, c);
            ++i;
        }
    }
    return tokens;
}

inline bool is_punctuation_token(std::string_view token) {
    return std::none_of(token.begin(), token.end(), detail::is_word_byte);
}

inline constexpr std::string_view kStopwordListVersion = "en-127-v1";

// Fixed English stop-word list (127 entries).
inline constexpr std::array<std::string_view, 127> kStopwords = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
    "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
    "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
    "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
    "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
    "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
    "for", "with", "about", "against", "between", "into", "through", "during", "before",
    "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
    "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
    "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
    "just", "don", "should", "now"};

inline bool is_stopword(std::string_view token) {
    static const std::unordered_set<std::string_view> set(kStopwords.begin(), kStopwords.end());
    return set.contains(token);
}

// Tokens that carry weight for TF-IDF: not punctuation, not stop-words.
inline TokenList content_words(std::string_view text) {
    TokenList words;
    for (auto& tok : tokenize_text(text)) {
        if (!is_punctuation_token(tok) && !is_stopword(tok)) words.push_back(std::move(tok));
    }
    return words;
}

inline std::size_t doc_length(std::string_view text) {
    const auto tokens = tokenize_text(text);
    return static_cast<std::size_t>(
        std::count_if(tokens.begin(), tokens.end(), [](const auto& t) { return !is_punctuation_token(t); }));
}

// ---------------------------------------------------------------------------
// BLEU

inline constexpr int kMaxNgramOrder = 4;

namespace detail {

using NgramCounts = std::map<std::vector<std::string_view>, int>;

inline NgramCounts count_ngrams(std::span<const std::string> tokens, std::size_t order) {
    NgramCounts counts;
    if (tokens.size() < order) return counts;
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
        std::vector<std::string_view> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                           tokens.begin() + static_cast<std::ptrdiff_t>(i + order));
        ++counts[std::move(gram)];
    }
    return counts;
}

}  // namespace detail

// Sentence-level BLEU against a single reference. Orders 2..4 are add-one
// smoothed; unigram precision is not, and a zero unigram match scores 0.
inline double sentence_bleu(std::span<const std::string> candidate, std::span<const std::string> reference) {
    if (reference.empty()) throw ArgumentError("sentence_bleu: reference must be non-empty");
    if (candidate.empty()) return 0.0;

    double log_precision_sum = 0.0;
    for (int order = 1; order <= kMaxNgramOrder; ++order) {
        const auto n = static_cast<std::size_t>(order);
        const auto cand = detail::count_ngrams(candidate, n);
        const auto ref = detail::count_ngrams(reference, n);
        long matched = 0;
        long total = 0;
        for (const auto& [gram, count] : cand) {
            total += count;
            if (auto it = ref.find(gram); it != ref.end()) matched += std::min(count, it->second);
        }
        if (order == 1) {
            if (matched == 0) return 0.0;
            log_precision_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
        } else {
            log_precision_sum +=
                std::log(static_cast<double>(matched + 1) / static_cast<double>(total + 1));
        }
    }

    const auto c = static_cast<double>(candidate.size());
    const auto r = static_cast<double>(reference.size());
    const double brevity = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return 100.0 * brevity * std::exp(log_precision_sum / kMaxNgramOrder);
}

inline double sentence_bleu(const TokenList& candidate, const TokenList& reference) {
    return sentence_bleu(std::span<const std::string>(candidate), std::span<const std::string>(reference));
}

// Unweighted mean of sentence scores.
inline double corpus_bleu(std::span<const std::pair<TokenList, TokenList>> records) {
    if (records.empty()) throw ArgumentError("corpus_bleu: no records");
    double sum = 0.0;
    for (const auto& [candidate, reference] : records) sum += sentence_bleu(candidate, reference);
    return sum / static_cast<double>(records.size());
}

// ---------------------------------------------------------------------------
// Readability

inline std::size_t count_syllables(std::string_view word) {
    auto is_vowel = [](char c) {
        c = detail::ascii_lower(c);
        return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
    };
    std::size_t groups = 0;
    bool in_group = false;
    for (char c : word) {
        const bool v = is_vowel(c);
        if (v && !in_group) ++groups;
        in_group = v;
    }
    const std::size_t n = word.size();
    if (n >= 1 && detail::ascii_lower(word[n - 1]) == 'e') {
        const bool consonant_le = n >= 3 && detail::ascii_lower(word[n - 2]) == 'l' &&
                                  !is_vowel(word[n - 3]) && detail::is_word_byte(word[n - 3]);
        if (!consonant_le && groups > 0) --groups;
    }
    return std::max<std::size_t>(groups, 1);
}

// Pieces separated by '.', '!' or '?' followed by whitespace or end of
// text; only pieces containing a word count. Always at least one.
inline std::size_t count_sentences(std::string_view text) {
    std::size_t sentences = 0;
    bool piece_has_word = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (detail::is_word_byte(c)) piece_has_word = true;
        const bool terminator = (c == '.' || c == '!' || c == '?') &&
                                (i + 1 == text.size() || detail::is_space_byte(text[i + 1]));
        if (terminator) {
            if (piece_has_word) ++sentences;
            piece_has_word = false;
        }
    }
    if (piece_has_word) ++sentences;
    return std::max<std::size_t>(sentences, 1);
}

inline double flesch_kincaid(std::string_view text) {
    std::size_t words = 0;
    std::size_t syllables = 0;
    for (const auto& tok : tokenize_text(text)) {
        if (is_punctuation_token(tok)) continue;
        ++words;
        syllables += count_syllables(tok);
    }
    if (words == 0) throw ArgumentError("flesch_kincaid: text contains no words");
    const auto w = static_cast<double>(words);
    const auto s = static_cast<double>(count_sentences(text));
    return 0.39 * (w / s) + 11.8 * (static_cast<double>(syllables) / w) - 15.59;
}

// ---------------------------------------------------------------------------
// TF-IDF

class IdfTable {
public:
    IdfTable() = default;

    std::size_t doc_count() const { return doc_count_; }

    // Unseen words are treated as occurring in a single document.
    std::size_t df(const std::string& word) const {
        auto it = df_.find(word);
        return it == df_.end() ? 1 : it->second;
    }

    bool contains(const std::string& word) const { return df_.contains(word); }

    double idf(const std::string& word) const {
        return std::log(static_cast<double>(doc_count_) / static_cast<double>(df(word)));
    }

    const std::unordered_map<std::string, std::size_t>& frequencies() const { return df_; }

    friend IdfTable build_idf(std::span<const std::string> references);

private:
    std::size_t doc_count_ = 0;
    std::unordered_map<std::string, std::size_t> df_;
};

inline IdfTable build_idf(std::span<const std::string> references) {
    if (references.empty()) throw ArgumentError("build_idf: no reference documents");
    IdfTable table;
    table.doc_count_ = references.size();
    for (const auto& doc : references) {
        auto words = content_words(doc);
        std::sort(words.begin(), words.end());
        words.erase(std::unique(words.begin(), words.end()), words.end());
        for (auto& w : words) ++table.df_[std::move(w)];
    }
    return table;
}

inline double tfidf_informativeness(std::string_view doc, const IdfTable& idf) {
    double score = 0.0;
    for (const auto& w : content_words(doc)) score += idf.idf(w);
    return score;
}

// ---------------------------------------------------------------------------

struct MetricRecord {
    double bleu = 0.0;
    double fk_grade = 0.0;
    std::size_t length_words = 0;
    double tfidf = 0.0;
};

// fk_grade is 0 for a wordless generation (the grade is undefined there).
inline MetricRecord score_generation(std::string_view generated, std::string_view reference,
                                     const IdfTable& idf) {
    MetricRecord m;
    m.bleu = sentence_bleu(tokenize_text(generated), tokenize_text(reference));
    m.length_words = doc_length(generated);
    m.fk_grade = m.length_words == 0 ? 0.0 : flesch_kincaid(generated);
    m.tfidf = tfidf_informativeness(generated, idf);
    return m;
}

}  // namespace docbench
