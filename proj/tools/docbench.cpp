// docbench: corpus cleaning, prompting, generation and scoring for code
// documentation experiments.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "docbench/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_file;
    std::string manifest;
    std::optional<std::string> seed;
    std::optional<std::string> languages;
    std::optional<std::string> shots;
    std::optional<std::string> backend;
    std::optional<std::string> samples;
    std::optional<std::string> out;
    std::optional<std::string> cache;
    std::vector<std::string> sets;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f, bool with_manifest = false) {
    cmd->add_option("--config", f.config_file, "run configuration file (key = value lines)");
    if (with_manifest) {
        cmd->add_option("--manifest", f.manifest, "re-run with the configuration recorded in a manifest");
    }
    cmd->add_option("--seed", f.seed, "seed for sampling and exemplar selection [42]");
    cmd->add_option("--languages", f.languages, "comma-separated languages [all six]");
    cmd->add_option("--shots", f.shots, "exemplars per prompt, 0..8 [1]");
    cmd->add_option("--backend", f.backend, "retrieval | remote [retrieval]");
    cmd->add_option("--samples", f.samples, "records per language, or 'auto' [1000]");
    cmd->add_option("--out", f.out, "output directory [out]");
    cmd->add_option("--cache", f.cache, "completion cache directory [.docbench-cache]");
    cmd->add_option("--set", f.sets, "override any config key: --set key=value (repeatable)");
}

docbench::RunConfig resolve(const CommonFlags& f) {
    docbench::ConfigMap manifest_values;
    if (!f.manifest.empty()) manifest_values = docbench::read_manifest_config(f.manifest);
    docbench::ConfigMap file_values;
    if (!f.config_file.empty()) file_values = docbench::read_config_file(f.config_file);

    docbench::ConfigMap cli;
    for (const auto& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw docbench::ConfigError("--set expects key=value, got '" + kv + "'");
        cli[docbench::trim(kv.substr(0, eq))] = docbench::trim(kv.substr(eq + 1));
    }
    auto put = [&](const char* key, const std::optional<std::string>& v) {
        if (v) cli[key] = *v;
    };
    put("seed", f.seed);
    put("languages", f.languages);
    put("shots", f.shots);
    put("backend", f.backend);
    put("samples", f.samples);
    put("out", f.out);
    put("cache", f.cache);
    return docbench::resolve_config({&manifest_values, &file_values, &cli});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"docbench: code documentation generation benchmark"};
    app.require_subcommand(1);
    app.footer(docbench::config_keys_help());

    CommonFlags preprocess_flags, sample_flags, run_flags, score_flags, report_flags;

    auto* preprocess = app.add_subcommand("preprocess", "strip comments and apply cleaning rules to a raw corpus");
    add_common_flags(preprocess, preprocess_flags);

    auto* sample_cmd = app.add_subcommand("sample", "draw seeded per-language samples from the test splits");
    add_common_flags(sample_cmd, sample_flags);

    auto* run = app.add_subcommand("run", "sample, prompt, generate, score and report");
    add_common_flags(run, run_flags, true);

    std::string predictions, references;
    auto* score = app.add_subcommand("score", "score line-aligned generations against references");
    score->add_option("--predictions,predictions", predictions, "one generated doc per line")->required();
    score->add_option("--references,references", references, "one reference doc per line")->required();
    add_common_flags(score, score_flags);

    std::vector<std::string> record_files;
    auto* report = app.add_subcommand("report", "render result tables from records files");
    report->add_option("--records,records", record_files, "records.jsonl from one or more runs")->required();
    add_common_flags(report, report_flags);

    app.add_subcommand("stopwords", "print the embedded stop-word list");

    for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) sub->footer(docbench::config_keys_help());

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return docbench::kExitUsage;
    }

    try {
        if (*preprocess) return docbench::cmd_preprocess(resolve(preprocess_flags));
        if (*sample_cmd) return docbench::cmd_sample(resolve(sample_flags));
        if (*run) return docbench::cmd_run(resolve(run_flags));
        if (*score) return docbench::cmd_score(predictions, references, resolve(score_flags));
        if (*report) {
            std::vector<std::filesystem::path> paths(record_files.begin(), record_files.end());
            return docbench::cmd_report(paths, resolve(report_flags));
        }
        return docbench::cmd_stopwords();
    } catch (const docbench::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
    } catch (const docbench::ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
    } catch (const docbench::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
    }
    return docbench::kExitUsage;
}
