#pragma once

// Run configuration: a flat "key = value" document. Values resolve as
// command line > file > built-in default.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "docbench/backends.hpp"
#include "docbench/error.hpp"
#include "docbench/language.hpp"

#ifndef DOCBENCH_DEFAULT_BASELINES
#define DOCBENCH_DEFAULT_BASELINES "data/baselines_bleu.csv"
#endif

namespace docbench {

struct ConfigKey {
    std::string_view name;
    std::string_view default_value;
    std::string_view help;
};

inline constexpr std::array<ConfigKey, 27> kConfigKeys = {{
    {"corpus", "corpus", "corpus root; files are <root>/<language>/<split>.jsonl"},
    {"languages", "ruby,javascript,go,python,java,php", "comma-separated subset of the six languages"},
    {"shots", "1", "exemplars per prompt, 0..8"},
    {"samples", "1000", "test records per language (capped at the split size), or 'auto'"},
    {"confidence", "0.95", "confidence level used when samples = auto"},
    {"margin", "0.05", "error margin used when samples = auto"},
    {"seed", "42", "seed for sampling and exemplar selection"},
    {"backend", "retrieval", "generation backend: retrieval | remote"},
    {"endpoint", "https://api.openai.com/v1/completions", "completion endpoint URL (remote)"},
    {"model", "code-davinci-002", "model name sent to the endpoint (remote)"},
    {"temperature", "0.2", "sampling temperature"},
    {"top_p", "1.0", "nucleus sampling mass"},
    {"frequency_penalty", "0.0", "frequency penalty"},
    {"presence_penalty", "0.0", "presence penalty"},
    {"max_tokens", "256", "completion length cap in tokens"},
    {"stop", "\\nCode:", "comma-separated stop strings; \\n, \\t, \\\\ and \\, escapes"},
    {"out", "out", "output directory"},
    {"cache", ".docbench-cache", "completion cache directory; empty keeps the cache in memory"},
    {"workers", "4", "record-parallel workers (also the remote in-flight cap)"},
    {"rate_limit", "0", "remote requests per second; 0 disables limiting"},
    {"max_attempts", "5", "remote attempts per request before giving up"},
    {"backoff_ms", "500", "first retry delay; doubles per attempt"},
    {"backoff_max_ms", "30000", "retry delay cap"},
    {"timeout_ms", "60000", "remote connect/read/write timeout"},
    {"validator", "", "external structure validator command; empty uses the built-in check"},
    {"timestamp", "", "manifest timestamp; empty uses SOURCE_DATE_EPOCH, else the newest input file time"},
    {"baselines", DOCBENCH_DEFAULT_BASELINES, "published comparison rows rendered above measured results"},
}};

// Keys that only say where outputs go; they are left out of manifests.
inline bool is_location_key(std::string_view key) { return key == "out" || key == "cache" || key == "timestamp"; }

inline const ConfigKey* find_config_key(std::string_view name) {
    for (const auto& k : kConfigKeys) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

using ConfigMap = std::map<std::string, std::string>;

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Parses "key = value" lines; '#' starts a comment line.
inline ConfigMap parse_config_text(std::string_view text, std::string_view origin = "config") {
    ConfigMap map;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = trim(line);
        if (content.empty() || content[0] == '#') continue;
        const auto eq = content.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key = value");
        }
        auto key = trim(std::string_view(content).substr(0, eq));
        if (!find_config_key(key)) {
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        map[key] = trim(std::string_view(content).substr(eq + 1));
    }
    return map;
}

inline ConfigMap read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

inline std::vector<std::string> split_escaped_list(std::string_view value) {
    std::vector<std::string> items;
    std::string cur;
    for (std::size_t i = 0; i < value.size(); ++i) {
        const char c = value[i];
        if (c == '\\' && i + 1 < value.size()) {
            const char e = value[++i];
            switch (e) {
                case 'n': cur.push_back('\n'); break;
                case 't': cur.push_back('\t'); break;
                case ',': cur.push_back(','); break;
                case '\\': cur.push_back('\\'); break;
                default:
                    cur.push_back('\\');
                    cur.push_back(e);
            }
        } else if (c == ',') {
            items.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    items.push_back(std::move(cur));
    return items;
}

struct RunConfig {
    std::filesystem::path corpus;
    std::vector<Language> languages;
    std::size_t shots = 1;
    std::optional<std::size_t> samples;  // absent: derive from confidence/margin
    double confidence = 0.95;
    double margin = 0.05;
    std::uint64_t seed = 42;
    std::string backend;
    RemoteOptions remote;
    GenerationParams params;
    std::filesystem::path out;
    std::filesystem::path cache;
    std::size_t workers = 4;
    std::string validator;
    std::string timestamp;
    std::filesystem::path baselines;
    ConfigMap values;  // resolved key/value view, every key present

    // Snapshot for manifests: everything except output locations.
    ConfigMap snapshot() const {
        ConfigMap m;
        for (const auto& [k, v] : values) {
            if (!is_location_key(k)) m[k] = v;
        }
        return m;
    }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    if constexpr (std::is_floating_point_v<T>) {
        char* end = nullptr;
        out = static_cast<T>(std::strtod(value.c_str(), &end));
        if (value.empty() || end != value.c_str() + value.size()) {
            throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
        }
    } else {
        auto [ptr, ec] = std::from_chars(first, last, out);
        if (ec != std::errc() || ptr != last) {
            throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
        }
    }
    return out;
}

}  // namespace detail

inline ConfigMap default_config_map() {
    ConfigMap m;
    for (const auto& k : kConfigKeys) m[std::string(k.name)] = std::string(k.default_value);
    return m;
}

// Layers `overrides` (lowest first) over the defaults and validates.
inline RunConfig resolve_config(std::initializer_list<const ConfigMap*> layers) {
    ConfigMap values = default_config_map();
    for (const auto* layer : layers) {
        if (!layer) continue;
        for (const auto& [k, v] : *layer) {
            if (!find_config_key(k)) throw ConfigError("unknown config key '" + k + "'");
            values[k] = v;
        }
    }

    RunConfig cfg;
    cfg.values = values;
    using detail::parse_number;
    cfg.corpus = values["corpus"];
    {
        const auto langs = values["languages"];
        if (langs == "all") {
            cfg.languages.assign(kReportOrder.begin(), kReportOrder.end());
        } else {
            for (const auto& name : split_escaped_list(langs)) {
                const auto t = trim(name);
                if (t.empty()) continue;
                auto lang = try_parse_language(t);
                if (!lang) throw ConfigError("unsupported language '" + t + "' in languages");
                if (std::find(cfg.languages.begin(), cfg.languages.end(), *lang) == cfg.languages.end()) {
                    cfg.languages.push_back(*lang);
                }
            }
        }
        if (cfg.languages.empty()) throw ConfigError("languages must name at least one language");
        std::sort(cfg.languages.begin(), cfg.languages.end(),
                  [](Language a, Language b) { return report_index(a) < report_index(b); });
    }
    cfg.shots = parse_number<std::size_t>("shots", values["shots"]);
    if (cfg.shots > 8) throw ConfigError("shots must lie in 0..8");
    if (values["samples"] != "auto") {
        cfg.samples = parse_number<std::size_t>("samples", values["samples"]);
        if (*cfg.samples == 0) throw ConfigError("samples must be positive");
    }
    cfg.confidence = parse_number<double>("confidence", values["confidence"]);
    cfg.margin = parse_number<double>("margin", values["margin"]);
    if (!(cfg.confidence > 0 && cfg.confidence < 1)) throw ConfigError("confidence must lie in (0,1)");
    if (!(cfg.margin > 0 && cfg.margin < 1)) throw ConfigError("margin must lie in (0,1)");
    cfg.seed = parse_number<std::uint64_t>("seed", values["seed"]);
    cfg.backend = values["backend"];
    if (cfg.backend != "retrieval" && cfg.backend != "remote") {
        throw ConfigError("backend must be 'retrieval' or 'remote', got '" + cfg.backend + "'");
    }
    cfg.remote.endpoint = values["endpoint"];
    cfg.remote.model = values["model"];
    cfg.remote.max_attempts = parse_number<int>("max_attempts", values["max_attempts"]);
    cfg.remote.backoff_base_ms = parse_number<int>("backoff_ms", values["backoff_ms"]);
    cfg.remote.backoff_max_ms = parse_number<int>("backoff_max_ms", values["backoff_max_ms"]);
    cfg.remote.timeout_ms = parse_number<int>("timeout_ms", values["timeout_ms"]);
    cfg.remote.requests_per_second = parse_number<double>("rate_limit", values["rate_limit"]);
    cfg.workers = std::max<std::size_t>(1, parse_number<std::size_t>("workers", values["workers"]));
    cfg.remote.max_in_flight = static_cast<int>(cfg.workers);
    if (cfg.remote.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");

    cfg.params.temperature = parse_number<double>("temperature", values["temperature"]);
    cfg.params.top_p = parse_number<double>("top_p", values["top_p"]);
    cfg.params.frequency_penalty = parse_number<double>("frequency_penalty", values["frequency_penalty"]);
    cfg.params.presence_penalty = parse_number<double>("presence_penalty", values["presence_penalty"]);
    cfg.params.max_tokens = parse_number<int>("max_tokens", values["max_tokens"]);
    cfg.params.stop = split_escaped_list(values["stop"]);
    try {
        cfg.params.validate();
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }

    cfg.out = values["out"];
    cfg.cache = values["cache"];
    cfg.validator = values["validator"];
    cfg.timestamp = values["timestamp"];
    cfg.baselines = values["baselines"];
    return cfg;
}

inline RunConfig resolve_config(const ConfigMap& file_values, const ConfigMap& cli_values) {
    return resolve_config({&file_values, &cli_values});
}

// Text block listing every key with its default, for --help.
inline std::string config_keys_help() {
    std::ostringstream out;
    out << "Config keys (file: key = value; --set key=value overrides; default in brackets):\n";
    for (const auto& k : kConfigKeys) {
        out << "  " << k.name << " [" << k.default_value << "]\n      " << k.help << '\n';
    }
    out << "Environment: " << kApiKeyEnv << " holds the bearer token for the remote backend.\n";
    return out.str();
}

}  // namespace docbench
