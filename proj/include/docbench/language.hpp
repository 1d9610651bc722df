#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "docbench/error.hpp"

namespace docbench {

enum class Language { java, python, php, go, javascript, ruby };

inline constexpr std::array<Language, 6> kAllLanguages = {
    Language::java, Language::python, Language::php,
    Language::go,   Language::javascript, Language::ruby};

// Column order used by the results table.
inline constexpr std::array<Language, 6> kReportOrder = {
    Language::ruby, Language::javascript, Language::go,
    Language::python, Language::java, Language::php};

inline std::string_view to_string(Language lang) {
    switch (lang) {
        case Language::java: return "java";
        case Language::python: return "python";
        case Language::php: return "php";
        case Language::go: return "go";
        case Language::javascript: return "javascript";
        case Language::ruby: return "ruby";
    }
    return "unknown";
}

// Header label as printed in result tables.
inline std::string_view display_name(Language lang) {
    switch (lang) {
        case Language::java: return "Java";
        case Language::python: return "Python";
        case Language::php: return "PHP";
        case Language::go: return "GO";
        case Language::javascript: return "JavaScript";
        case Language::ruby: return "Ruby";
    }
    return "unknown";
}

inline std::optional<Language> try_parse_language(std::string_view name) {
    for (Language lang : kAllLanguages) {
        if (to_string(lang) == name) return lang;
    }
    return std::nullopt;
}

inline Language parse_language(std::string_view name) {
    if (auto lang = try_parse_language(name)) return *lang;
    throw ArgumentError("unsupported language '" + std::string(name) +
                        "' (expected one of java, python, php, go, javascript, ruby)");
}

inline std::size_t report_index(Language lang) {
    for (std::size_t i = 0; i < kReportOrder.size(); ++i) {
        if (kReportOrder[i] == lang) return i;
    }
    return kReportOrder.size();
}

}  // namespace docbench
