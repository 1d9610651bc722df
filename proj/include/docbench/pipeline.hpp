#pragma once

// Subcommand implementations. Each returns a process exit code:
// 0 ok, 2 usage or input error, 3 completed with too many failed records.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <span>
#include <ostream>
#include <string>
#include <vector>

#include "docbench/backends.hpp"
#include "docbench/config.hpp"
#include "docbench/corpus.hpp"
#include "docbench/metrics.hpp"
#include "docbench/prompts.hpp"
#include "docbench/report.hpp"

namespace docbench {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitUnreliable = 3;

// More than this share of failed records marks a run unreliable.
inline constexpr double kMaxFailureShare = 0.10;

struct Console {
    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
};

inline std::filesystem::path corpus_file(const std::filesystem::path& root, Language lang, Split split) {
    return root / std::string(to_string(lang)) / (std::string(to_string(split)) + ".jsonl");
}

inline std::size_t resolve_sample_size(const RunConfig& cfg, std::size_t population) {
    if (population == 0) return 0;
    if (cfg.samples) return std::min(*cfg.samples, population);
    return required_sample_size({population, cfg.confidence, cfg.margin, cfg.seed});
}

// Configured value, else SOURCE_DATE_EPOCH, else `fallback`.
inline std::string utc_timestamp(const std::string& configured, std::time_t fallback) {
    if (!configured.empty()) return configured;
    std::time_t t = fallback;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string utc_timestamp(const std::string& configured) {
    return utc_timestamp(configured, std::time(nullptr));
}

// Newest modification time among `paths`.
inline std::time_t newest_mtime(std::span<const std::filesystem::path> paths) {
    std::time_t newest = 0;
    for (const auto& p : paths) {
        const auto sys = std::chrono::file_clock::to_sys(std::filesystem::last_write_time(p));
        newest = std::max(newest, std::chrono::system_clock::to_time_t(
                                      std::chrono::time_point_cast<std::chrono::system_clock::duration>(sys)));
    }
    return newest;
}

inline StructureValidator make_validator(const RunConfig& cfg) {
    return cfg.validator.empty() ? default_structure_validator() : command_structure_validator(cfg.validator);
}

// ---------------------------------------------------------------------------
// preprocess

inline int cmd_preprocess(const RunConfig& cfg, Console io = {}) {
    if (!std::filesystem::is_directory(cfg.corpus)) {
        io.err << "preprocess: corpus root " << cfg.corpus << " not found\n";
        return kExitUsage;
    }
    const auto validator = make_validator(cfg);
    FilterStats stats;
    std::map<Language, std::size_t> malformed;
    std::size_t files = 0;
    for (Language lang : cfg.languages) {
        for (Split split : {Split::train, Split::valid, Split::test}) {
            const auto path = corpus_file(cfg.corpus, lang, split);
            if (!std::filesystem::is_regular_file(path)) continue;
            ++files;
            auto loaded = load_corpus(path, split);
            for (const auto& d : loaded.diagnostics) io.err << "skip: " << d << '\n';
            malformed[lang] += loaded.skipped;
            auto cleaned = clean_corpus(std::move(loaded.pairs), validator, cfg.workers);
            stats.merge(cleaned.stats);
            write_corpus(corpus_file(cfg.out / "cleaned", lang, split), cleaned.accepted);
            io.out << to_string(lang) << '/' << to_string(split) << ": " << cleaned.accepted.size() << " of "
                   << cleaned.verdicts.size() << " accepted\n";
        }
    }
    if (files == 0) {
        io.err << "preprocess: no <language>/<split>.jsonl files under " << cfg.corpus << '\n';
        return kExitUsage;
    }
    std::string csv = stats.to_csv();
    csv += "\nlanguage,malformed_lines\n";
    for (const auto& [lang, n] : malformed) csv += std::string(to_string(lang)) + "," + std::to_string(n) + "\n";
    write_text_file(cfg.out / "preprocess_stats.csv", csv);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sample

inline int cmd_sample(const RunConfig& cfg, Console io = {}) {
    for (Language lang : cfg.languages) {
        const auto path = corpus_file(cfg.corpus, lang, Split::test);
        if (!std::filesystem::is_regular_file(path)) {
            io.err << "sample: missing " << path << '\n';
            return kExitUsage;
        }
        const auto test = load_corpus(path, Split::test).pairs;
        const auto n = resolve_sample_size(cfg, test.size());
        const auto picked = sample(test, n, derive_seed(cfg.seed, "sample/" + std::string(to_string(lang))));
        write_corpus(cfg.out / "samples" / (std::string(to_string(lang)) + ".jsonl"), picked);
        io.out << to_string(lang) << ": sampled " << picked.size() << " of " << test.size() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// run

struct RunOutputs {
    std::vector<EvalRecord> records;
    std::vector<LanguageSummary> summaries;
    RunManifest manifest;
    std::size_t failures = 0;
};

struct LanguageInputs {
    std::vector<CodeDocPair> test;
    std::vector<CodeDocPair> train;
};

inline std::unique_ptr<Backend> make_backend(const RunConfig& cfg, std::span<const CodeDocPair> train,
                                             std::shared_ptr<ResponseCache> cache) {
    if (cfg.backend == "remote") return std::make_unique<RemoteBackend>(cfg.remote, std::move(cache));
    return std::make_unique<RetrievalBackend>(train, std::move(cache));
}

inline std::string label_for(const RunConfig& cfg) {
    return cfg.backend + " (" + std::to_string(cfg.shots) + "-shot)";
}

// Runs sampling, prompting, generation and scoring; writes nothing.
inline RunOutputs execute_run(const RunConfig& cfg) {
    RunOutputs result;
    auto& manifest = result.manifest;
    manifest.config = cfg.snapshot();
    manifest.seed = cfg.seed;
    manifest.backend_name = cfg.backend;
    if (cfg.backend == "remote") {
        manifest.backend_model = cfg.remote.model;
        manifest.backend_endpoint = cfg.remote.endpoint;
    }
    manifest.generation_params = cfg.params.to_json();

    const bool needs_train = cfg.shots > 0 || cfg.backend == "retrieval";
    std::map<Language, LanguageInputs> inputs;
    std::vector<std::filesystem::path> input_paths;
    for (Language lang : cfg.languages) {
        auto& in = inputs[lang];
        const auto test_path = corpus_file(cfg.corpus, lang, Split::test);
        if (!std::filesystem::is_regular_file(test_path)) throw IoError("missing test split " + test_path.string());
        in.test = load_corpus(test_path, Split::test).pairs;
        if (in.test.empty()) throw IoError("empty test split " + test_path.string());
        manifest.corpus_digests[std::string(to_string(lang)) + "/test.jsonl"] = file_sha256(test_path);
        input_paths.push_back(test_path);
        if (needs_train) {
            const auto train_path = corpus_file(cfg.corpus, lang, Split::train);
            if (!std::filesystem::is_regular_file(train_path)) {
                throw IoError("missing train split " + train_path.string());
            }
            in.train = load_corpus(train_path, Split::train).pairs;
            if (in.train.empty()) throw IoError("empty train split " + train_path.string());
            manifest.corpus_digests[std::string(to_string(lang)) + "/train.jsonl"] = file_sha256(train_path);
            input_paths.push_back(train_path);
        }
    }
    manifest.timestamp = utc_timestamp(cfg.timestamp, newest_mtime(input_paths));

    std::shared_ptr<ResponseCache> cache =
        cfg.cache.empty() ? std::make_shared<ResponseCache>() : std::make_shared<ResponseCache>(cfg.cache);
    std::unique_ptr<Backend> shared_backend;
    if (cfg.backend == "remote") shared_backend = make_backend(cfg, {}, cache);

    for (Language lang : cfg.languages) {
        const auto& in = inputs[lang];
        const std::string lang_name(to_string(lang));
        const auto n = resolve_sample_size(cfg, in.test.size());
        auto targets = sample(in.test, n, derive_seed(cfg.seed, "sample/" + lang_name));

        std::vector<Prompt> prompts;
        prompts.reserve(targets.size());
        auto& sampled = manifest.sampled_ids[lang_name];
        for (std::size_t i = 0; i < targets.size(); ++i) {
            auto& target = targets[i];
            target.code = strip_comments(target.code, lang).stripped;
            auto exemplars = select_exemplars(in.train, cfg.shots, derive_seed(cfg.seed, "exemplars/" + lang_name, i));
            for (auto& ex : exemplars) ex.code = strip_comments(ex.code, lang).stripped;
            sampled.push_back(target.id);
            if (!exemplars.empty()) {
                auto& ids = manifest.exemplar_ids[target.id];
                for (const auto& ex : exemplars) ids.push_back(ex.origin_id);
            }
            prompts.push_back(build_prompt(target, exemplars));
        }

        std::unique_ptr<Backend> local_backend;
        Backend* backend = shared_backend.get();
        if (!backend) {
            local_backend = make_backend(cfg, in.train, cache);
            backend = local_backend.get();
        }
        const auto outcomes = generate_all(*backend, prompts, cfg.params, cfg.workers);

        std::vector<std::string> references;
        references.reserve(targets.size());
        for (const auto& t : targets) references.push_back(t.doc);
        const auto idf = build_idf(references);

        for (std::size_t i = 0; i < targets.size(); ++i) {
            EvalRecord rec;
            rec.pair_id = targets[i].id;
            rec.language = lang;
            rec.reference = targets[i].doc;
            rec.backend_name = backend->name();
            rec.shots = cfg.shots;
            if (const auto* gen = std::get_if<GenerationResult>(&outcomes[i])) {
                rec.generated = gen->doc;
                rec.empty_output = gen->empty_output;
                rec.metrics = score_generation(gen->doc, rec.reference, idf);
            } else {
                rec.error = std::get<std::string>(outcomes[i]);
                ++result.failures;
            }
            result.records.push_back(std::move(rec));
        }
    }
    if (result.failures < result.records.size()) result.summaries = aggregate(result.records);
    return result;
}

inline std::vector<TableRow> load_baselines_or_warn(const RunConfig& cfg, std::ostream& err) {
    if (cfg.baselines.empty()) return {};
    try {
        return load_baselines(cfg.baselines);
    } catch (const IoError& e) {
        err << "warning: " << e.what() << "; rendering measured rows only\n";
        return {};
    }
}

inline void write_run_outputs(const RunConfig& cfg, const RunOutputs& run, std::ostream& err) {
    write_records(cfg.out / "records.jsonl", run.records);
    write_manifest(cfg.out / "manifest.json", run.manifest);
    if (run.summaries.empty()) return;
    write_text_file(cfg.out / "summary.csv", render_summary_csv(run.summaries));
    const auto baselines = load_baselines_or_warn(cfg, err);
    const std::vector<TableRow> measured = {measured_row(label_for(cfg), run.summaries)};
    write_text_file(cfg.out / "report.csv", render_table_csv(baselines, measured));
    write_text_file(cfg.out / "report.md", render_table_markdown(baselines, measured, run.summaries));
}

inline int cmd_run(const RunConfig& cfg, Console io = {}) {
    RunOutputs run;
    try {
        run = execute_run(cfg);
    } catch (const ConfigError& e) {
        io.err << "run: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        io.err << "run: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ArgumentError& e) {
        io.err << "run: " << e.what() << '\n';
        return kExitUsage;
    }
    write_run_outputs(cfg, run, io.err);

    for (const auto& s : run.summaries) {
        io.out << display_name(s.language) << ": n=" << s.n << " BLEU=" << format_fixed2(s.mean_bleu) << '\n';
    }
    if (run.summaries.size() == kReportOrder.size()) {
        io.out << "Overall BLEU=" << format_fixed2(overall(run.summaries)) << '\n';
    }
    io.out << "excluded " << run.failures << " of " << run.records.size() << " records after generation errors\n";
    const bool unreliable = run.records.empty() || static_cast<double>(run.failures) >
                                                       kMaxFailureShare * static_cast<double>(run.records.size());
    if (unreliable) {
        io.err << "run: more than " << kMaxFailureShare * 100 << "% of records failed; results are unreliable\n";
        return kExitUnreliable;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// score

struct ScoreSummary {
    std::size_t n = 0;
    double mean_bleu = 0.0;
    double mean_fk = 0.0;
    double mean_length = 0.0;
    double mean_tfidf = 0.0;
    std::vector<MetricRecord> per_line;
};

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

// Scores line-aligned generations against references; IDF comes from the
// references.
inline ScoreSummary score_lines(std::span<const std::string> predictions, std::span<const std::string> references) {
    if (predictions.size() != references.size()) {
        throw ArgumentError("score: " + std::to_string(predictions.size()) + " predictions vs " +
                            std::to_string(references.size()) + " references");
    }
    if (references.empty()) throw ArgumentError("score: no lines to score");
    for (std::size_t i = 0; i < references.size(); ++i) {
        if (tokenize_text(references[i]).empty()) {
            throw ArgumentError("score: reference line " + std::to_string(i + 1) + " is empty");
        }
    }
    const auto idf = build_idf(references);
    ScoreSummary s;
    s.n = references.size();
    for (std::size_t i = 0; i < references.size(); ++i) {
        const auto m = score_generation(predictions[i], references[i], idf);
        s.mean_bleu += m.bleu;
        s.mean_fk += m.fk_grade;
        s.mean_length += static_cast<double>(m.length_words);
        s.mean_tfidf += m.tfidf;
        s.per_line.push_back(m);
    }
    const auto n = static_cast<double>(s.n);
    s.mean_bleu /= n;
    s.mean_fk /= n;
    s.mean_length /= n;
    s.mean_tfidf /= n;
    return s;
}

inline int cmd_score(const std::filesystem::path& predictions, const std::filesystem::path& references,
                     const RunConfig& cfg, Console io = {}) {
    ScoreSummary s;
    try {
        s = score_lines(read_lines(predictions), read_lines(references));
    } catch (const ArgumentError& e) {
        io.err << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        io.err << "score: " << e.what() << '\n';
        return kExitUsage;
    }
    std::ostringstream csv;
    csv << "n,mean_bleu,mean_fk,mean_length,mean_tfidf\n"
        << s.n << ',' << format_exact(s.mean_bleu) << ',' << format_exact(s.mean_fk) << ','
        << format_exact(s.mean_length) << ',' << format_exact(s.mean_tfidf) << '\n';
    write_text_file(cfg.out / "score_summary.csv", csv.str());
    io.out << "records=" << s.n << " BLEU=" << format_fixed2(s.mean_bleu) << " FK=" << format_fixed2(s.mean_fk)
           << " length=" << format_fixed2(s.mean_length) << " TF-IDF=" << format_fixed2(s.mean_tfidf) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report

// Re-renders tables from one or more records files; each file becomes one
// measured row labelled by its backend and shot count.
inline int cmd_report(std::span<const std::filesystem::path> record_files, const RunConfig& cfg, Console io = {}) {
    if (record_files.empty()) {
        io.err << "report: no records files given\n";
        return kExitUsage;
    }
    std::vector<TableRow> measured;
    std::vector<LanguageSummary> last_summaries;
    try {
        for (const auto& path : record_files) {
            const auto records = load_records(path);
            last_summaries = aggregate(records);
            const auto& first = records.front();
            measured.push_back(measured_row(first.backend_name + " (" + std::to_string(first.shots) + "-shot)",
                                            last_summaries));
        }
    } catch (const std::exception& e) {
        io.err << "report: " << e.what() << '\n';
        return kExitUsage;
    }
    const auto baselines = load_baselines_or_warn(cfg, io.err);
    const auto markdown = render_table_markdown(baselines, measured, record_files.size() == 1
                                                                         ? std::span<const LanguageSummary>(last_summaries)
                                                                         : std::span<const LanguageSummary>());
    write_text_file(cfg.out / "report.md", markdown);
    write_text_file(cfg.out / "report.csv", render_table_csv(baselines, measured));
    io.out << markdown;
    return kExitOk;
}

inline int cmd_stopwords(Console io = {}) {
    io.out << "# stop-word list " << kStopwordListVersion << " (" << kStopwords.size() << " words)\n";
    for (auto w : kStopwords) io.out << w << '\n';
    return kExitOk;
}

}  // namespace docbench
