#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docbench/corpus.hpp"
#include "docbench/error.hpp"

namespace docbench {

inline constexpr std::string_view kCodeMarker = "Code:\n";
inline constexpr std::string_view kDocMarker = "\nDocumentation:";
inline constexpr std::string_view kStopMarker = "\nCode:";

struct Exemplar {
    std::string code;
    std::string doc;
    std::string origin_id;
};

struct Prompt {
    std::string text;
    std::size_t shots = 0;
    std::string target_id;
    std::string stop_marker = std::string(kStopMarker);
    // Byte range of the target code inside `text`.
    std::size_t target_offset = 0;
    std::size_t target_length = 0;

    std::string_view target_code() const {
        return std::string_view(text).substr(target_offset, target_length);
    }
};

// k distinct training pairs, uniformly at random under `seed`.
inline std::vector<Exemplar> select_exemplars(std::span<const CodeDocPair> train, std::size_t k,
                                              std::uint64_t seed) {
    if (k > train.size()) {
        throw ArgumentError("select_exemplars: k=" + std::to_string(k) + " exceeds train size " +
                            std::to_string(train.size()));
    }
    std::vector<Exemplar> out;
    out.reserve(k);
    for (auto i : sample_indices(train.size(), k, seed)) {
        out.push_back({train[i].code, train[i].doc, train[i].id});
    }
    return out;
}

// Newlines and other whitespace runs inside an exemplar doc become single
// spaces so each "Documentation:" line stays one line.
inline std::string single_line(std::string_view doc) {
    std::string out;
    out.reserve(doc.size());
    bool pending_space = false;
    for (char c : doc) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

// prompt := block* target
// block  := "Code:\n" code "\nDocumentation: " doc "\n"
// target := "Code:\n" code "\nDocumentation:"
inline Prompt build_prompt(const CodeDocPair& target, std::span<const Exemplar> exemplars) {
    Prompt prompt;
    prompt.shots = exemplars.size();
    prompt.target_id = target.id;
    std::string& text = prompt.text;
    for (const auto& ex : exemplars) {
        text += kCodeMarker;
        text += ex.code;
        text += kDocMarker;
        text += ' ';
        text += single_line(ex.doc);
        text += '\n';
    }
    text += kCodeMarker;
    prompt.target_offset = text.size();
    prompt.target_length = target.code.size();
    text += target.code;
    text += kDocMarker;
    return prompt;
}

}  // namespace docbench
