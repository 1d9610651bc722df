#pragma once

// Comment stripping and delimiter-level structural checks for the six
// corpus languages. The scanner splits a record into code, literal and
// comment segments; both public operations are folds over that split.

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "docbench/language.hpp"

namespace docbench {

struct Diagnostic {
    std::size_t offset = 0;
    std::string message;
};

struct LexOutcome {
    std::string stripped;
    bool balanced = true;
    std::vector<Diagnostic> diagnostics;
};

namespace lex {

enum class SegmentKind { code, string, line_comment, block_comment, docstring, heredoc };

struct Segment {
    SegmentKind kind = SegmentKind::code;
    std::size_t begin = 0;
    std::size_t end = 0;
    bool terminated = true;
};

struct ScanResult {
    std::vector<Segment> segments;
    std::vector<Diagnostic> diagnostics;
};

namespace detail {

inline bool is_ident_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || (u >= '0' && u <= '9') ||
           u == '_' || u == '$' || u >= 0x80;
}

inline bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

inline bool uses_slash_comments(Language lang) {
    return lang == Language::java || lang == Language::go || lang == Language::javascript ||
           lang == Language::php;
}

inline bool uses_hash_comments(Language lang) {
    return lang == Language::python || lang == Language::ruby || lang == Language::php;
}

// Strings that may contain raw newlines.
inline bool quote_spans_lines(Language lang, char quote) {
    switch (lang) {
        case Language::php:
        case Language::ruby: return true;
        case Language::go: return quote == '`';
        case Language::javascript: return quote == '`';
        default: return false;
    }
}

inline bool quote_has_escapes(Language lang, char quote) {
    return !(lang == Language::go && quote == '`');
}

inline bool is_quote(Language lang, char c) {
    if (c == '"' || c == '\'') return true;
    if (c == '`') {
        return lang == Language::go || lang == Language::javascript || lang == Language::php ||
               lang == Language::ruby;
    }
    return false;
}

class Scanner {
public:
    Scanner(std::string_view src, Language lang) : src_(src), lang_(lang) {}

    ScanResult run() {
        while (pos_ < src_.size()) {
            if (try_comment() || try_heredoc() || try_string() || try_regex()) continue;
            consume_code_char();
        }
        flush_code(src_.size());
        return std::move(result_);
    }

private:
    std::string_view src_;
    Language lang_;
    std::size_t pos_ = 0;
    std::size_t code_start_ = 0;
    ScanResult result_;

    // Context tracked over code characters only.
    bool line_start_ = true;
    int depth_ = 0;
    char prev_significant_ = '\0';
    std::string prev_word_;

    bool starts_with(std::size_t at, std::string_view s) const {
        return src_.substr(at, s.size()) == s;
    }

    void flush_code(std::size_t upto) {
        if (upto > code_start_) {
            result_.segments.push_back({SegmentKind::code, code_start_, upto, true});
        }
    }

    void push(SegmentKind kind, std::size_t begin, std::size_t end, bool terminated) {
        flush_code(begin);
        result_.segments.push_back({kind, begin, end, terminated});
        pos_ = end;
        code_start_ = end;
    }

    void diagnose(std::size_t at, std::string message) {
        result_.diagnostics.push_back({at, std::move(message)});
    }

    void consume_code_char() {
        const char c = src_[pos_];
        if (c == '\n') {
            const bool continued = pos_ > 0 && src_[pos_ - 1] == '\\';
            line_start_ = !continued;
        } else if (!is_blank(c)) {
            line_start_ = false;
            if (c == '(' || c == '[' || c == '{') ++depth_;
            if (c == ')' || c == ']' || c == '}') --depth_;
            if (is_ident_char(c)) {
                if (pos_ == 0 || !is_ident_char(src_[pos_ - 1])) prev_word_.clear();
                prev_word_.push_back(c);
            } else {
                prev_word_.clear();
            }
            prev_significant_ = c;
        }
        ++pos_;
    }

    void after_literal() {
        line_start_ = false;
        prev_significant_ = '"';
        prev_word_.clear();
    }

    bool at_column_zero() const { return pos_ == 0 || src_[pos_ - 1] == '\n'; }

    bool try_comment() {
        const std::size_t begin = pos_;
        if (uses_slash_comments(lang_) && starts_with(begin, "//")) {
            push(SegmentKind::line_comment, begin, line_end(begin), true);
            return true;
        }
        if (uses_slash_comments(lang_) && starts_with(begin, "/*")) {
            const std::size_t close = src_.find("*/", begin + 2);
            if (close == std::string_view::npos) {
                diagnose(begin, "unterminated block comment");
                push(SegmentKind::block_comment, begin, src_.size(), false);
            } else {
                push(SegmentKind::block_comment, begin, close + 2, true);
            }
            return true;
        }
        if (lang_ == Language::ruby && at_column_zero() && starts_with(begin, "=begin") &&
            (begin + 6 == src_.size() || is_blank(src_[begin + 6]) || src_[begin + 6] == '\n')) {
            std::size_t line = line_end(begin);
            while (line < src_.size()) {
                const std::size_t next = line + 1;
                if (starts_with(next, "=end") &&
                    (next + 4 == src_.size() || is_blank(src_[next + 4]) || src_[next + 4] == '\n')) {
                    push(SegmentKind::block_comment, begin, line_end(next), true);
                    return true;
                }
                line = line_end(next);
            }
            diagnose(begin, "unterminated =begin block");
            push(SegmentKind::block_comment, begin, src_.size(), false);
            return true;
        }
        if (uses_hash_comments(lang_) && src_[begin] == '#') {
            if (lang_ == Language::php && starts_with(begin, "#[")) return false;
            push(SegmentKind::line_comment, begin, line_end(begin), true);
            return true;
        }
        return false;
    }

    std::size_t line_end(std::size_t from) const {
        const std::size_t nl = src_.find('\n', from);
        return nl == std::string_view::npos ? src_.size() : nl;
    }

    bool try_heredoc() {
        const std::size_t begin = pos_;
        bool found = false;
        if (lang_ == Language::php && starts_with(begin, "<<<")) {
            found = true;
        } else if (lang_ == Language::ruby && starts_with(begin, "<<") && begin + 2 < src_.size()) {
            std::size_t at = begin + 2;
            if (src_[at] == '~' || src_[at] == '-') ++at;
            if (at < src_.size()) {
                const char c = src_[at];
                const bool squiggly = at != begin + 2;
                found = (c >= 'A' && c <= 'Z') || c == '_' || c == '\'' || c == '"' ||
                        (squiggly && c >= 'a' && c <= 'z');
            }
        }
        if (!found) return false;
        diagnose(begin, "heredoc treated as opaque through end of record");
        push(SegmentKind::heredoc, begin, src_.size(), true);
        return true;
    }

    // Returns the end offset of a quoted literal whose body starts at
    // `body` and closes with `close`; sets `terminated` accordingly.
    std::size_t scan_quoted(std::size_t body, std::string_view close, bool escapes, bool multiline,
                            bool& terminated) const {
        std::size_t i = body;
        while (i < src_.size()) {
            const char c = src_[i];
            if (escapes && c == '\\') {
                i += 2;
                continue;
            }
            if (c == '\n' && !multiline) {
                terminated = false;
                return i;
            }
            if (starts_with(i, close)) {
                terminated = true;
                return i + close.size();
            }
            ++i;
        }
        terminated = false;
        return src_.size();
    }

    bool try_string() {
        const std::size_t begin = pos_;
        std::size_t quote_at = begin;
        if (lang_ == Language::python && is_ident_char(src_[begin]) &&
            (begin == 0 || !is_ident_char(src_[begin - 1]))) {
            std::size_t at = begin;
            while (at < src_.size() && at - begin < 2 && std::string_view("rRbBuUfF").find(src_[at]) != std::string_view::npos) {
                ++at;
            }
            if (at == begin || at >= src_.size() || (src_[at] != '"' && src_[at] != '\'')) return false;
            quote_at = at;
        }
        const char quote = src_[quote_at];
        if (!is_quote(lang_, quote)) return false;

        const bool triple = (lang_ == Language::python || (lang_ == Language::java && quote == '"')) &&
                            starts_with(quote_at, std::string(3, quote));
        bool terminated = true;
        std::size_t end = 0;
        if (triple) {
            end = scan_quoted(quote_at + 3, std::string(3, quote), true, true, terminated);
        } else {
            end = scan_quoted(quote_at + 1, std::string(1, quote), quote_has_escapes(lang_, quote),
                              quote_spans_lines(lang_, quote), terminated);
        }
        if (!terminated) diagnose(begin, "unterminated string literal");

        SegmentKind kind = SegmentKind::string;
        if (triple && lang_ == Language::python && line_start_ && depth_ == 0 && terminated &&
            rest_of_line_is_empty(end)) {
            kind = SegmentKind::docstring;
        }
        push(kind, begin, end, terminated);
        after_literal();
        return true;
    }

    bool rest_of_line_is_empty(std::size_t from) const {
        std::size_t i = from;
        while (i < src_.size() && is_blank(src_[i])) ++i;
        return i == src_.size() || src_[i] == '\n' || src_[i] == '#';
    }

    bool regex_allowed() const {
        if (prev_significant_ == '\0') return true;
        if (!prev_word_.empty()) {
            static constexpr std::string_view keywords[] = {
                "return", "typeof", "case", "do", "else", "in", "of", "new", "delete",
                "void", "throw", "yield", "await", "instanceof"};
            for (auto kw : keywords) {
                if (prev_word_ == kw) return true;
            }
            return false;
        }
        return std::string_view("(,=:[!&|?{};+-*%<>~^").find(prev_significant_) != std::string_view::npos;
    }

    bool try_regex() {
        if (lang_ != Language::javascript || src_[pos_] != '/') return false;
        if (!regex_allowed()) return false;
        std::size_t i = pos_ + 1;
        bool in_class = false;
        while (i < src_.size()) {
            const char c = src_[i];
            if (c == '\n') return false;
            if (c == '\\') {
                i += 2;
                continue;
            }
            if (c == '[') in_class = true;
            else if (c == ']') in_class = false;
            else if (c == '/' && !in_class) break;
            ++i;
        }
        if (i >= src_.size()) return false;
        ++i;
        while (i < src_.size() && is_ident_char(src_[i])) ++i;
        push(SegmentKind::string, pos_, i, true);
        after_literal();
        return true;
    }
};

}  // namespace detail

inline ScanResult scan(std::string_view code, Language lang) {
    return detail::Scanner(code, lang).run();
}

}  // namespace lex

// Removes comments (and, for Python, standalone triple-quoted string
// statements). Block comments become a single space; lines left blank by a
// removal are dropped; trailing whitespace outside literals is trimmed.
inline LexOutcome strip_comments(std::string_view code, Language lang) {
    using lex::SegmentKind;
    auto scanned = lex::scan(code, lang);

    LexOutcome outcome;
    outcome.diagnostics = std::move(scanned.diagnostics);
    std::string& out = outcome.stripped;
    out.reserve(code.size());

    std::size_t protected_len = 0;
    std::size_t line_start = 0;
    bool line_had_comment = false;

    auto finish_line = [&](bool emit_newline) {
        const std::size_t floor = std::max(protected_len, line_start);
        while (out.size() > floor && lex::detail::is_blank(out.back()) && out.back() != '\r') {
            out.pop_back();
        }
        const bool blank = out.size() == line_start && line_start >= protected_len;
        const bool drop = line_had_comment && blank;
        if (emit_newline && !drop) out.push_back('\n');
        line_start = out.size();
        line_had_comment = false;
    };

    for (const auto& seg : scanned.segments) {
        const auto text = code.substr(seg.begin, seg.end - seg.begin);
        if (!seg.terminated) outcome.balanced = false;
        switch (seg.kind) {
            case SegmentKind::code:
                for (char c : text) {
                    if (c == '\n') {
                        finish_line(true);
                    } else {
                        out.push_back(c);
                    }
                }
                break;
            case SegmentKind::string:
            case SegmentKind::heredoc: {
                out.append(text);
                protected_len = out.size();
                const auto nl = text.rfind('\n');
                if (nl != std::string_view::npos) {
                    line_start = out.size() - (text.size() - nl - 1);
                }
                break;
            }
            case SegmentKind::block_comment:
                out.push_back(' ');
                line_had_comment = true;
                break;
            case SegmentKind::line_comment:
            case SegmentKind::docstring:
                line_had_comment = true;
                break;
        }
    }
    finish_line(false);
    return outcome;
}

// Delimiter nesting, literal termination and (Python) indentation sanity.
inline bool check_structure(std::string_view code, Language lang) {
    using lex::SegmentKind;
    const auto scanned = lex::scan(code, lang);
    std::vector<char> stack;
    bool at_line_start = true;
    bool saw_space = false;
    bool saw_tab = false;

    for (const auto& seg : scanned.segments) {
        if (!seg.terminated) return false;
        if (seg.kind == SegmentKind::heredoc) {
            // Opaque tail: openers before it may legitimately close inside.
            return true;
        }
        if (seg.kind != SegmentKind::code) {
            at_line_start = false;
            continue;
        }
        for (std::size_t i = seg.begin; i < seg.end; ++i) {
            const char c = code[i];
            if (c == '\n') {
                at_line_start = true;
                saw_space = saw_tab = false;
                continue;
            }
            if (at_line_start) {
                if (c == ' ') {
                    saw_space = true;
                } else if (c == '\t') {
                    saw_tab = true;
                } else {
                    at_line_start = false;
                }
                if (lang == Language::python && saw_space && saw_tab) return false;
                if (c == ' ' || c == '\t') continue;
            }
            switch (c) {
                case '(': stack.push_back(')'); break;
                case '[': stack.push_back(']'); break;
                case '{': stack.push_back('}'); break;
                case ')':
                case ']':
                case '}':
                    if (stack.empty() || stack.back() != c) return false;
                    stack.pop_back();
                    break;
                default: break;
            }
        }
    }
    return stack.empty();
}

}  // namespace docbench
