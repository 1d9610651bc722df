#pragma once

// CodeSearchNet-style corpus records: loading, cleaning rules, sample-size
// arithmetic and seeded sampling.

#include <boost/math/distributions/normal.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "docbench/error.hpp"
#include "docbench/language.hpp"
#include "docbench/lexers.hpp"
#include "docbench/metrics.hpp"
#include "docbench/parallel.hpp"

namespace docbench {

enum class Split { train, valid, test };

inline std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
    }
    return "unknown";
}

inline Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "valid") return Split::valid;
    if (name == "test") return Split::test;
    throw ArgumentError("unknown split '" + std::string(name) + "'");
}

struct CodeDocPair {
    std::string id;
    Language language = Language::python;
    std::string code;
    std::string doc;
    std::optional<TokenList> doc_tokens;
    Split split = Split::test;
    // The source record as read, so fields we do not interpret survive a rewrite.
    nlohmann::ordered_json source = nlohmann::ordered_json::object();
};

// True when the pre-tokenized doc survives a join-and-retokenize round trip.
inline bool doc_tokens_consistent(const CodeDocPair& pair) {
    if (!pair.doc_tokens) return true;
    std::string joined;
    for (std::size_t i = 0; i < pair.doc_tokens->size(); ++i) {
        if (i) joined.push_back(' ');
        joined += (*pair.doc_tokens)[i];
    }
    return tokenize_text(joined) == *pair.doc_tokens;
}

// ---------------------------------------------------------------------------
// Loading

struct LoadResult {
    std::vector<CodeDocPair> pairs;
    std::size_t skipped = 0;
    std::vector<std::string> diagnostics;
};

inline std::string default_record_id(Language lang, Split split, std::size_t line_no) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%07zu", line_no);
    return std::string(to_string(lang)) + "-" + std::string(to_string(split)) + "-" + buf;
}

// Parses one JSON-lines record; returns an error message instead of a pair
// when the record is unusable.
inline std::variant<CodeDocPair, std::string> parse_record(std::string_view line, Split split,
                                                           std::size_t line_no) {
    auto obj = nlohmann::ordered_json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) return std::string("not a JSON object");
    for (const char* field : {"language", "code", "docstring"}) {
        if (!obj.contains(field) || !obj[field].is_string()) {
            return "missing or non-string field \"" + std::string(field) + "\"";
        }
    }
    const auto lang = try_parse_language(obj["language"].get<std::string>());
    if (!lang) return "unsupported language \"" + obj["language"].get<std::string>() + "\"";

    CodeDocPair pair;
    pair.language = *lang;
    pair.split = split;
    pair.code = obj["code"].get<std::string>();
    pair.doc = obj["docstring"].get<std::string>();
    if (auto it = obj.find("docstring_tokens"); it != obj.end() && it->is_array()) {
        TokenList tokens;
        bool ok = true;
        for (const auto& t : *it) {
            if (!t.is_string()) {
                ok = false;
                break;
            }
            tokens.push_back(t.get<std::string>());
        }
        if (ok) pair.doc_tokens = std::move(tokens);
    }
    if (auto it = obj.find("id"); it != obj.end() && it->is_string()) {
        pair.id = it->get<std::string>();
    } else {
        pair.id = default_record_id(*lang, split, line_no);
    }
    pair.source = std::move(obj);
    return pair;
}

inline LoadResult load_corpus(const std::filesystem::path& path, Split split) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read corpus file " + path.string());
    LoadResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto parsed = parse_record(line, split, line_no);
        if (auto* pair = std::get_if<CodeDocPair>(&parsed)) {
            result.pairs.push_back(std::move(*pair));
        } else {
            ++result.skipped;
            result.diagnostics.push_back(path.string() + ":" + std::to_string(line_no) + ": " +
                                         std::get<std::string>(parsed));
        }
    }
    if (in.bad()) throw IoError("read error on " + path.string());
    return result;
}

inline nlohmann::ordered_json to_json(const CodeDocPair& pair) {
    nlohmann::ordered_json obj = pair.source.is_object() ? pair.source : nlohmann::ordered_json::object();
    obj["language"] = to_string(pair.language);
    obj["code"] = pair.code;
    obj["docstring"] = pair.doc;
    if (pair.doc_tokens) obj["docstring_tokens"] = *pair.doc_tokens;
    obj["id"] = pair.id;
    return obj;
}

inline std::string dump_json_line(const nlohmann::ordered_json& obj) {
    return obj.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

inline void write_corpus(const std::filesystem::path& path, std::span<const CodeDocPair> pairs) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& pair : pairs) out << dump_json_line(to_json(pair)) << '\n';
    if (!out) throw IoError("write error on " + path.string());
}

// ---------------------------------------------------------------------------
// Cleaning rules

enum class FilterReason { ok, unparsable_code, doc_too_short, doc_too_long, special_token, non_english };

inline constexpr std::array<FilterReason, 6> kAllFilterReasons = {
    FilterReason::ok,           FilterReason::unparsable_code, FilterReason::doc_too_short,
    FilterReason::doc_too_long, FilterReason::special_token,   FilterReason::non_english};

inline std::string_view to_string(FilterReason reason) {
    switch (reason) {
        case FilterReason::ok: return "ok";
        case FilterReason::unparsable_code: return "unparsable_code";
        case FilterReason::doc_too_short: return "doc_too_short";
        case FilterReason::doc_too_long: return "doc_too_long";
        case FilterReason::special_token: return "special_token";
        case FilterReason::non_english: return "non_english";
    }
    return "unknown";
}

struct FilterVerdict {
    bool accepted = true;
    FilterReason reason = FilterReason::ok;

    static FilterVerdict reject(FilterReason reason) { return {false, reason}; }
};

inline constexpr std::size_t kMinDocTokens = 3;
inline constexpr std::size_t kMaxDocTokens = 256;
inline constexpr double kEnglishLatinShare = 0.90;

inline std::size_t doc_token_count(const CodeDocPair& pair) {
    return pair.doc_tokens ? pair.doc_tokens->size() : tokenize_text(pair.doc).size();
}

// "<img", URLs, or a tag-like "<letters>" run.
inline bool has_special_token(std::string_view doc) {
    std::string lower(doc);
    for (auto& c : lower) c = detail::ascii_lower(c);
    for (std::string_view needle : {"<img", "http://", "https://"}) {
        if (lower.find(needle) != std::string::npos) return true;
    }
    auto is_alpha = [](char c) { return c >= 'a' && c <= 'z'; };
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (lower[i] != '<') continue;
        std::size_t j = i + 1;
        while (j < lower.size() && is_alpha(lower[j])) ++j;
        if (j > i + 1 && j < lower.size() && lower[j] == '>') return true;
    }
    return false;
}

namespace detail {

// Decodes one UTF-8 code point starting at text[i]; advances i. Malformed
// sequences yield U+FFFD and consume a single byte.
inline char32_t next_code_point(std::string_view text, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= text.size()) return -1;
        const auto b = static_cast<unsigned char>(text[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k < len; ++k) {
        const int c = cont(static_cast<std::size_t>(k));
        if (c < 0) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | static_cast<char32_t>(c);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

// Non-ASCII code points that are punctuation, symbols, marks or spacing
// rather than letters.
inline bool is_non_letter_code_point(char32_t cp) {
    return (cp >= 0x80 && cp <= 0xBF) || cp == 0xD7 || cp == 0xF7 || (cp >= 0x300 && cp <= 0x36F) ||
           (cp >= 0x2000 && cp <= 0x2BFF) || (cp >= 0x3000 && cp <= 0x303F) ||
           (cp >= 0xFE00 && cp <= 0xFE0F) || (cp >= 0xFE30 && cp <= 0xFE4F) ||
           (cp >= 0xFF00 && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
           (cp >= 0xFF5B && cp <= 0xFF65) || (cp >= 0x1F000 && cp <= 0x1FAFF) || cp == 0xFFFD;
}

}  // namespace detail

// Share of alphabetic characters in the basic Latin range must reach 90%.
inline bool is_english(std::string_view text) {
    std::size_t latin = 0;
    std::size_t other = 0;
    for (std::size_t i = 0; i < text.size();) {
        const char32_t cp = detail::next_code_point(text, i);
        if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) {
            ++latin;
        } else if (cp >= 0x80 && !detail::is_non_letter_code_point(cp)) {
            ++other;
        }
    }
    const std::size_t letters = latin + other;
    if (letters == 0) return false;
    return static_cast<double>(latin) >= kEnglishLatinShare * static_cast<double>(letters);
}

// Structural validity hook; defaults to the delimiter check.
using StructureValidator = std::function<bool(std::string_view code, Language lang)>;

inline StructureValidator default_structure_validator() {
    return [](std::string_view code, Language lang) { return check_structure(code, lang); };
}

// Pipes the code to `command` (with the language name appended as the last
// argument); exit status 0 means parsable.
inline StructureValidator command_structure_validator(std::string command) {
    return [command = std::move(command)](std::string_view code, Language lang) {
        const std::string full = command + " " + std::string(to_string(lang));
        FILE* pipe = ::popen(full.c_str(), "w");
        if (!pipe) throw ConfigError("cannot start validator: " + command);
        std::fwrite(code.data(), 1, code.size(), pipe);
        const int status = ::pclose(pipe);
        return status == 0;
    };
}

inline FilterVerdict filter_pair(const CodeDocPair& pair, const StructureValidator& validator) {
    const bool blank_code = pair.code.find_first_not_of(" \t\r\n") == std::string::npos;
    if (blank_code || !validator(pair.code, pair.language)) {
        return FilterVerdict::reject(FilterReason::unparsable_code);
    }
    const std::size_t tokens = doc_token_count(pair);
    if (tokens < kMinDocTokens) return FilterVerdict::reject(FilterReason::doc_too_short);
    if (tokens > kMaxDocTokens) return FilterVerdict::reject(FilterReason::doc_too_long);
    if (has_special_token(pair.doc)) return FilterVerdict::reject(FilterReason::special_token);
    if (!is_english(pair.doc)) return FilterVerdict::reject(FilterReason::non_english);
    return {};
}

inline FilterVerdict filter_pair(const CodeDocPair& pair) {
    return filter_pair(pair, default_structure_validator());
}

// Per-language rejection tallies.
class FilterStats {
public:
    void add(Language lang, FilterReason reason) { ++counts_[lang][static_cast<std::size_t>(reason)]; }

    void merge(const FilterStats& other) {
        for (const auto& [lang, row] : other.counts_) {
            auto& mine = counts_[lang];
            for (std::size_t i = 0; i < row.size(); ++i) mine[i] += row[i];
        }
    }

    std::size_t count(Language lang, FilterReason reason) const {
        auto it = counts_.find(lang);
        return it == counts_.end() ? 0 : it->second[static_cast<std::size_t>(reason)];
    }

    std::size_t total(Language lang) const {
        std::size_t sum = 0;
        for (auto reason : kAllFilterReasons) sum += count(lang, reason);
        return sum;
    }

    std::size_t total_for(FilterReason reason) const {
        std::size_t sum = 0;
        for (const auto& [lang, row] : counts_) sum += row[static_cast<std::size_t>(reason)];
        return sum;
    }

    std::string to_csv() const {
        std::ostringstream out;
        out << "language,total,accepted";
        for (auto reason : kAllFilterReasons) {
            if (reason != FilterReason::ok) out << ',' << to_string(reason);
        }
        out << '\n';
        for (Language lang : kAllLanguages) {
            if (!counts_.contains(lang)) continue;
            out << to_string(lang) << ',' << total(lang) << ',' << count(lang, FilterReason::ok);
            for (auto reason : kAllFilterReasons) {
                if (reason != FilterReason::ok) out << ',' << count(lang, reason);
            }
            out << '\n';
        }
        return out.str();
    }

private:
    std::map<Language, std::array<std::size_t, kAllFilterReasons.size()>> counts_{};
};

struct CleanResult {
    std::vector<CodeDocPair> accepted;
    std::vector<FilterVerdict> verdicts;  // one per input, input order
    FilterStats stats;
};

// Strips comments from every record's code, then applies the rules.
// Records are processed concurrently; outputs keep input order.
inline CleanResult clean_corpus(std::vector<CodeDocPair> pairs, const StructureValidator& validator,
                                std::size_t workers = 1) {
    CleanResult result;
    result.verdicts.resize(pairs.size());
    parallel_for_index(pairs.size(), workers, [&](std::size_t i) {
        pairs[i].code = strip_comments(pairs[i].code, pairs[i].language).stripped;
        result.verdicts[i] = filter_pair(pairs[i], validator);
    });
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        result.stats.add(pairs[i].language, result.verdicts[i].reason);
        if (result.verdicts[i].accepted) result.accepted.push_back(std::move(pairs[i]));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Sample size and sampling

struct SampleSpec {
    std::size_t population = 0;
    double confidence = 0.95;
    double margin = 0.05;
    std::uint64_t seed = 0;
};

// Two-sided normal quantile for `confidence`, rounded to two decimals as in
// printed z tables (0.95 -> 1.96).
inline double z_score(double confidence) {
    const boost::math::normal_distribution<double> standard;
    const double z = boost::math::quantile(standard, 1.0 - (1.0 - confidence) / 2.0);
    return std::round(z * 100.0) / 100.0;
}

// Cochran's formula at p = 0.5 with finite-population correction.
inline std::size_t required_sample_size(const SampleSpec& spec) {
    if (!(spec.confidence > 0.0 && spec.confidence < 1.0)) {
        throw ArgumentError("required_sample_size: confidence must lie in (0,1)");
    }
    if (!(spec.margin > 0.0 && spec.margin < 1.0)) {
        throw ArgumentError("required_sample_size: margin must lie in (0,1)");
    }
    if (spec.population == 0) throw ArgumentError("required_sample_size: population must be positive");

    const double z = z_score(spec.confidence);
    const double n0 = z * z * 0.25 / (spec.margin * spec.margin);
    const auto population = static_cast<double>(spec.population);
    const double corrected = n0 / (1.0 + (n0 - 1.0) / population);
    const auto n = static_cast<std::size_t>(std::ceil(corrected - 1e-9));
    return std::clamp<std::size_t>(n, 1, spec.population);
}

// mt19937_64 has a standard-mandated output sequence; bounded draws use
// rejection so results do not depend on the library's distributions.
class PortableRng {
public:
    static constexpr std::string_view kName = "mt19937_64+rejection";

    explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw ArgumentError("PortableRng::below: empty range");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x = 0;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

private:
    std::mt19937_64 engine_;
};

// n distinct indices from [0, population) in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n, std::uint64_t seed) {
    if (n > population) {
        throw ArgumentError("sample: requested " + std::to_string(n) + " of " + std::to_string(population) +
                            " records");
    }
    std::vector<std::size_t> idx(population);
    for (std::size_t i = 0; i < population; ++i) idx[i] = i;
    PortableRng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(population - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    return idx;
}

template <typename T>
std::vector<T> sample(std::span<const T> items, std::size_t n, std::uint64_t seed) {
    std::vector<T> out;
    out.reserve(n);
    for (auto i : sample_indices(items.size(), n, seed)) out.push_back(items[i]);
    return out;
}

inline std::vector<CodeDocPair> sample(const std::vector<CodeDocPair>& pairs, std::size_t n, std::uint64_t seed) {
    return sample(std::span<const CodeDocPair>(pairs), n, seed);
}

// Derives an independent stream seed for (base seed, stream label, index).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index = 0) {
    // splitmix64 over an FNV-1a hash of the label.
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    std::uint64_t z = base ^ h ^ (index * 0x9E3779B97F4A7C15ULL);
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace docbench
