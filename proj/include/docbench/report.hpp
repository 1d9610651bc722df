#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "docbench/error.hpp"
#include "docbench/language.hpp"
#include "docbench/metrics.hpp"

namespace docbench {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

struct EvalRecord {
    std::string pair_id;
    Language language = Language::python;
    std::string generated;
    std::string reference;
    MetricRecord metrics;
    std::string backend_name;
    std::size_t shots = 0;
    bool empty_output = false;
    // Set when generation failed; such records carry no metrics and are
    // excluded from every mean.
    std::optional<std::string> error;
};

struct LanguageSummary {
    Language language = Language::python;
    std::size_t n = 0;
    double mean_bleu = 0.0;
    double mean_fk = 0.0;
    double mean_length = 0.0;
    double mean_tfidf = 0.0;
};

// Per-language means over successful records, in results-table order.
inline std::vector<LanguageSummary> aggregate(std::span<const EvalRecord> records) {
    if (records.empty()) throw ArgumentError("aggregate: no records");
    std::array<LanguageSummary, kReportOrder.size()> acc{};
    for (std::size_t i = 0; i < kReportOrder.size(); ++i) acc[i].language = kReportOrder[i];
    for (const auto& r : records) {
        if (r.error) continue;
        auto& s = acc[report_index(r.language)];
        ++s.n;
        s.mean_bleu += r.metrics.bleu;
        s.mean_fk += r.metrics.fk_grade;
        s.mean_length += static_cast<double>(r.metrics.length_words);
        s.mean_tfidf += r.metrics.tfidf;
    }
    std::vector<LanguageSummary> out;
    for (auto& s : acc) {
        if (s.n == 0) continue;
        const auto n = static_cast<double>(s.n);
        s.mean_bleu /= n;
        s.mean_fk /= n;
        s.mean_length /= n;
        s.mean_tfidf /= n;
        out.push_back(s);
    }
    if (out.empty()) throw ArgumentError("aggregate: every record failed");
    return out;
}

// Unweighted mean of the six per-language BLEU means.
inline double overall(std::span<const LanguageSummary> summaries) {
    std::array<std::optional<double>, kReportOrder.size()> bleu{};
    for (const auto& s : summaries) bleu[report_index(s.language)] = s.mean_bleu;
    double sum = 0.0;
    for (std::size_t i = 0; i < bleu.size(); ++i) {
        if (!bleu[i]) {
            throw ArgumentError("overall: no summary for " + std::string(display_name(kReportOrder[i])));
        }
        sum += *bleu[i];
    }
    return sum / static_cast<double>(bleu.size());
}

inline std::string format_fixed2(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    return buf;
}

// Shortest text that reads back as the same double.
inline std::string format_exact(double value) {
    char buf[64];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, value);
        if (std::strtod(buf, nullptr) == value) break;
    }
    return buf;
}

// ---------------------------------------------------------------------------
// Results table

struct TableRow {
    std::string label;
    std::array<std::optional<double>, kReportOrder.size()> bleu{};  // kReportOrder columns
    std::optional<double> overall;  // absent when any language cell is missing
};

inline TableRow measured_row(std::string label, std::span<const LanguageSummary> summaries) {
    TableRow row;
    row.label = std::move(label);
    for (const auto& s : summaries) row.bleu[report_index(s.language)] = s.mean_bleu;
    const bool complete = std::all_of(row.bleu.begin(), row.bleu.end(), [](const auto& c) { return c.has_value(); });
    if (complete) row.overall = overall(summaries);
    return row;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) cell.pop_back();
        std::size_t b = 0;
        while (b < cell.size() && cell[b] == ' ') ++b;
        cells.push_back(cell.substr(b));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline std::optional<double> parse_cell(const std::string& cell) {
    if (cell.empty() || cell == "-" || cell == "N/A") return std::nullopt;
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw ArgumentError("bad numeric cell '" + cell + "'");
    return v;
}

}  // namespace detail

// Reads "model,Ruby,JavaScript,GO,Python,Java,PHP,Overall" rows; '#' lines
// are comments, "-" marks a missing cell and "N/A" a missing overall.
inline std::vector<TableRow> parse_baselines(std::istream& in) {
    std::vector<TableRow> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto cells = detail::split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        if (cells.size() != 8) throw ArgumentError("baseline row needs 8 cells: " + line);
        TableRow row;
        row.label = cells[0];
        for (std::size_t i = 0; i < kReportOrder.size(); ++i) row.bleu[i] = detail::parse_cell(cells[i + 1]);
        row.overall = detail::parse_cell(cells[7]);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<TableRow> load_baselines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read baselines file " + path.string());
    return parse_baselines(in);
}

inline std::string cell_text(const std::optional<double>& v, std::string_view missing) {
    return v ? format_fixed2(*v) : std::string(missing);
}

inline std::string table_header_csv() {
    std::string out = "model";
    for (Language lang : kReportOrder) {
        out += ',';
        out += display_name(lang);
    }
    return out + ",Overall";
}

// Comma-delimited table; baseline rows first.
inline std::string render_table_csv(std::span<const TableRow> baselines, std::span<const TableRow> measured) {
    std::ostringstream out;
    out << table_header_csv() << '\n';
    auto emit = [&](const TableRow& row) {
        out << row.label;
        for (const auto& c : row.bleu) out << ',' << cell_text(c, "-");
        out << ',' << cell_text(row.overall, "N/A") << '\n';
    };
    for (const auto& r : baselines) emit(r);
    for (const auto& r : measured) emit(r);
    return out.str();
}

// Markdown BLEU table (baselines above a rule, measured rows below),
// followed by the readability/length/informativeness means.
inline std::string render_table_markdown(std::span<const TableRow> baselines, std::span<const TableRow> measured,
                                         std::span<const LanguageSummary> summaries = {}) {
    std::vector<std::string> header = {"Model"};
    for (Language lang : kReportOrder) header.emplace_back(display_name(lang));
    header.emplace_back("Overall");
    auto to_cells = [](const TableRow& row) {
        std::vector<std::string> cells = {row.label};
        for (const auto& c : row.bleu) cells.push_back(cell_text(c, "-"));
        cells.push_back(cell_text(row.overall, "N/A"));
        return cells;
    };
    std::vector<std::size_t> width(header.size());
    auto widen = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) width[i] = std::max(width[i], cells[i].size());
    };
    std::vector<std::string> separator(header.size(), "");
    separator[0] = "**measured**";
    const bool separated = !baselines.empty() && !measured.empty();
    widen(header);
    if (separated) widen(separator);
    for (const auto& r : baselines) widen(to_cells(r));
    for (const auto& r : measured) widen(to_cells(r));

    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& cells) {
        out << '|';
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << ' ' << cells[i] << std::string(width[i] - cells[i].size(), ' ') << " |";
        }
        out << '\n';
    };
    auto rule = [&] {
        out << '|';
        for (std::size_t w : width) out << std::string(w + 2, '-') << '|';
        out << '\n';
    };
    out << "## BLEU (smoothed, sentence-level mean)\n\n";
    emit(header);
    rule();
    for (const auto& r : baselines) emit(to_cells(r));
    if (separated) emit(separator);
    for (const auto& r : measured) emit(to_cells(r));

    if (!summaries.empty()) {
        out << "\n## Qualitative means\n\n";
        out << "| Language | n | Flesch-Kincaid | Length (words) | TF-IDF |\n";
        out << "|---|---|---|---|---|\n";
        for (const auto& s : summaries) {
            out << "| " << display_name(s.language) << " | " << s.n << " | " << format_fixed2(s.mean_fk) << " | "
                << format_fixed2(s.mean_length) << " | " << format_fixed2(s.mean_tfidf) << " |\n";
        }
    }
    return out.str();
}

// Full-precision per-language means plus an overall row when all six
// languages are present.
inline std::string render_summary_csv(std::span<const LanguageSummary> summaries) {
    std::ostringstream out;
    out << "language,n,mean_bleu,mean_fk,mean_length,mean_tfidf\n";
    for (const auto& s : summaries) {
        out << to_string(s.language) << ',' << s.n << ',' << format_exact(s.mean_bleu) << ','
            << format_exact(s.mean_fk) << ',' << format_exact(s.mean_length) << ',' << format_exact(s.mean_tfidf)
            << '\n';
    }
    if (summaries.size() == kReportOrder.size()) {
        out << "overall,,"
            << format_exact(overall(summaries)) << ",,,\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Records

inline nlohmann::ordered_json to_json(const EvalRecord& r) {
    nlohmann::ordered_json obj;
    obj["pair_id"] = r.pair_id;
    obj["language"] = to_string(r.language);
    obj["backend"] = r.backend_name;
    obj["shots"] = r.shots;
    obj["generated"] = r.generated;
    obj["reference"] = r.reference;
    if (r.error) {
        obj["error"] = *r.error;
        return obj;
    }
    obj["empty_output"] = r.empty_output;
    obj["bleu"] = r.metrics.bleu;
    obj["fk_grade"] = r.metrics.fk_grade;
    obj["length_words"] = r.metrics.length_words;
    obj["tfidf"] = r.metrics.tfidf;
    return obj;
}

inline EvalRecord eval_record_from_json(const nlohmann::ordered_json& obj) {
    EvalRecord r;
    r.pair_id = obj.at("pair_id").get<std::string>();
    r.language = parse_language(obj.at("language").get<std::string>());
    r.backend_name = obj.value("backend", "");
    r.shots = obj.value("shots", std::size_t{0});
    r.generated = obj.value("generated", "");
    r.reference = obj.value("reference", "");
    if (obj.contains("error")) {
        r.error = obj["error"].get<std::string>();
        return r;
    }
    r.empty_output = obj.value("empty_output", false);
    r.metrics.bleu = obj.at("bleu").get<double>();
    r.metrics.fk_grade = obj.at("fk_grade").get<double>();
    r.metrics.length_words = obj.at("length_words").get<std::size_t>();
    r.metrics.tfidf = obj.at("tfidf").get<double>();
    return r;
}

inline std::string dump_line(const nlohmann::ordered_json& obj) {
    return obj.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write error on " + path.string());
}

inline void write_records(const std::filesystem::path& path, std::span<const EvalRecord> records) {
    std::string text;
    for (const auto& r : records) text += dump_line(to_json(r)) + "\n";
    write_text_file(path, text);
}

inline std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read records file " + path.string());
    std::vector<EvalRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto obj = nlohmann::ordered_json::parse(line, nullptr, false);
        if (obj.is_discarded()) {
            throw ArgumentError(path.string() + ":" + std::to_string(line_no) + ": malformed record");
        }
        out.push_back(eval_record_from_json(obj));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Run manifest

struct RunManifest {
    // Flat key/value configuration snapshot (output locations excluded).
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    std::string backend_name;
    std::string backend_model;
    std::string backend_endpoint;
    nlohmann::json generation_params = nlohmann::json::object();
    std::map<std::string, std::string> corpus_digests;  // relative path -> sha256
    std::map<std::string, std::vector<std::string>> sampled_ids;  // language -> ids in draw order
    std::map<std::string, std::vector<std::string>> exemplar_ids;  // pair id -> exemplar ids
    std::string rng = "mt19937_64+rejection";
    std::string stopwords_version = std::string(kStopwordListVersion);
    std::string timestamp;
    std::string artifact_version = std::string(kArtifactVersion);

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json obj;
        obj["artifact_version"] = artifact_version;
        obj["timestamp"] = timestamp;
        obj["config"] = config;
        obj["seeds"] = {{"seed", seed}, {"rng", rng}};
        obj["backend"] = {{"name", backend_name},
                          {"model", backend_model},
                          {"endpoint", backend_endpoint},
                          {"params", generation_params}};
        obj["stopwords_version"] = stopwords_version;
        obj["corpus_digests"] = corpus_digests;
        obj["sampled_ids"] = sampled_ids;
        obj["exemplar_ids"] = exemplar_ids;
        return obj;
    }
};

inline void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    write_text_file(path, manifest.to_json().dump(2, ' ', false, nlohmann::ordered_json::error_handler_t::replace) + "\n");
}

// Configuration snapshot stored in a manifest file.
inline std::map<std::string, std::string> read_manifest_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read manifest " + path.string());
    auto obj = nlohmann::json::parse(in, nullptr, false);
    if (obj.is_discarded() || !obj.contains("config") || !obj["config"].is_object()) {
        throw ArgumentError("manifest " + path.string() + " has no config object");
    }
    return obj["config"].get<std::map<std::string, std::string>>();
}

}  // namespace docbench
