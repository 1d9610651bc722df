#pragma once

// Lexer golden fixtures and an independent bracket/literal oracle.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "docbench/language.hpp"

namespace fixtures {

namespace fs = std::filesystem;
using docbench::Language;
using docbench::to_string;

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Fixture {
    std::string name;
    std::string input;
    std::string expected;
    bool lexed_ok = true;
    bool balanced = true;
};

inline std::vector<Fixture> load_fixtures(Language lang) {
    const fs::path dir = fs::path(DOCBENCH_TEST_DATA) / "lexers" / std::string(to_string(lang));
    std::vector<Fixture> out;
    std::ifstream verdicts(dir / "verdicts.csv");
    std::string line;
    std::getline(verdicts, line);
    while (std::getline(verdicts, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, lexed, structure;
        std::getline(ss, id, ',');
        std::getline(ss, lexed, ',');
        std::getline(ss, structure, ',');
        Fixture f;
        f.name = std::string(to_string(lang)) + "/" + id;
        f.input = slurp(dir / (id + ".in"));
        f.expected = slurp(dir / (id + ".expected"));
        f.lexed_ok = lexed == "ok";
        f.balanced = structure == "balanced";
        out.push_back(std::move(f));
    }
    return out;
}

// Independent stack oracle for comment-free text: walks characters, skips
// quoted literals by the language's quote table, and matches brackets.
inline bool oracle_balanced(const std::string& s, Language lang) {
    std::vector<char> stack;
    std::size_t i = 0;
    std::size_t line_begin = 0;
    const bool python = lang == Language::python;
    auto heredoc_at = [&](std::size_t at) {
        if (lang == Language::php) return s.compare(at, 3, "<<<") == 0;
        if (lang == Language::ruby) {
            return s.compare(at, 3, "<<~") == 0 || s.compare(at, 3, "<<-") == 0 ||
                   (s.compare(at, 2, "<<") == 0 && at + 2 < s.size() && std::isupper(static_cast<unsigned char>(s[at + 2])));
        }
        return false;
    };
    while (i < s.size()) {
        const char c = s[i];
        if (c == '\n') {
            line_begin = i + 1;
            ++i;
            continue;
        }
        if (python && i == line_begin) {
            bool sp = false, tab = false;
            std::size_t j = i;
            while (j < s.size() && (s[j] == ' ' || s[j] == '\t')) {
                (s[j] == ' ' ? sp : tab) = true;
                ++j;
            }
            if (sp && tab) return false;
        }
        if (heredoc_at(i)) return true;
        if (lang == Language::javascript && c == '/' && i > 0) {
            // Regex literal after an operator or keyword start.
            std::size_t k = i;
            while (k > 0 && s[k - 1] == ' ') --k;
            const char before = k > 0 ? s[k - 1] : '(';
            const bool kw = k >= 6 && s.compare(k - 6, 6, "return") == 0;
            if (kw || std::string("(,=:[!&|?{};").find(before) != std::string::npos) {
                std::size_t j = i + 1;
                bool cls = false;
                while (j < s.size() && s[j] != '\n' && (cls || s[j] != '/')) {
                    if (s[j] == '\\') ++j;
                    else if (s[j] == '[') cls = true;
                    else if (s[j] == ']') cls = false;
                    ++j;
                }
                if (j < s.size() && s[j] == '/') {
                    i = j + 1;
                    continue;
                }
            }
        }
        const bool triple = (python || lang == Language::java) && (c == '"' || (python && c == '\'')) &&
                            s.compare(i, 3, std::string(3, c)) == 0;
        const bool backtick = c == '`' && lang != Language::java && lang != Language::python;
        if (c == '"' || c == '\'' || backtick) {
            const std::string close = triple ? std::string(3, c) : std::string(1, c);
            const bool raw = lang == Language::go && backtick;
            const bool multiline = triple || lang == Language::php || lang == Language::ruby ||
                                   (backtick && lang != Language::java);
            std::size_t j = i + close.size();
            bool closed = false;
            while (j < s.size()) {
                if (!raw && s[j] == '\\') {
                    j += 2;
                    continue;
                }
                if (s[j] == '\n' && !multiline) break;
                if (s.compare(j, close.size(), close) == 0) {
                    closed = true;
                    j += close.size();
                    break;
                }
                ++j;
            }
            if (!closed) return false;
            i = j;
            continue;
        }
        if (c == '(' || c == '[' || c == '{') stack.push_back(c);
        if (c == ')' || c == ']' || c == '}') {
            const char open = c == ')' ? '(' : c == ']' ? '[' : '{';
            if (stack.empty() || stack.back() != open) return false;
            stack.pop_back();
        }
        ++i;
    }
    return stack.empty();
}

}  // namespace fixtures
