// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "docbench/pipeline.hpp"
#include "lexer_fixtures.hpp"
#include "oracles.hpp"
#include "stub_server.hpp"
#include "synthetic_corpus.hpp"

using namespace docbench;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string data_file(const std::string& rel) { return fixtures::slurp(fs::path(DOCBENCH_TEST_DATA) / rel); }

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("docbench_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Outcome sample_size() {
    const auto n = required_sample_size({14918, 0.95, 0.05, 0});
    return {n == 375, "required_sample_size(14918, 0.95, 0.05) = " + std::to_string(n)};
}

Outcome overall_aggregation() {
    auto summaries = [](std::vector<double> bleu) {
        std::vector<LanguageSummary> out;
        for (std::size_t i = 0; i < bleu.size(); ++i) {
            LanguageSummary s;
            s.language = kReportOrder[i];
            s.n = 1000;
            s.mean_bleu = bleu[i];
            out.push_back(s);
        }
        return out;
    };
    const auto a = format_fixed2(overall(summaries({16.04, 16.58, 20.94, 22.28, 22.81, 25.13})));
    const auto b = format_fixed2(overall(summaries({5.41, 9.83, 15.80, 18.93, 13.59, 13.32})));
    return {a == "20.63" && b == "12.81", "overalls " + a + " and " + b};
}

Outcome bleu_oracle() {
    const auto t0 = Clock::now();
    const auto seqs = oracle::all_sequences({"a", "b", "c"}, 5);
    double worst = 0.0;
    std::size_t pairs = 0;
    bool identity = true;
    for (const auto& ref : seqs) {
        if (ref.empty()) continue;
        identity = identity && sentence_bleu(ref, ref) == 100.0;
        for (const auto& cand : seqs) {
            worst = std::max(worst, std::abs(sentence_bleu(cand, ref) - oracle::bleu(cand, ref)));
            ++pairs;
        }
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << pairs << " pairs, max deviation " << worst << ", identity " << (identity ? "100.0" : "broken") << ", "
      << secs << " s";
    return {worst <= 1e-9 && identity && pairs == 363u * 364u && secs < 60.0, d.str()};
}

Outcome metric_hand_values() {
    const double bleu = sentence_bleu(TokenList{"adds", "two", "numbers"}, TokenList{"subtracts", "two", "numbers"});
    const double fk1 = flesch_kincaid("The cat sat on the mat.");
    const double fk2 = flesch_kincaid("Adds two numbers.");
    const std::vector<std::string> docs = {"adds two numbers", "subtracts two numbers", "returns the path"};
    const double tfidf = tfidf_informativeness("adds two numbers", build_idf(docs));
    const bool ok = std::abs(bleu - 68.66) <= 0.01 && std::abs(fk1 + 1.45) <= 0.01 && std::abs(fk2 - 1.31) <= 0.01 &&
                    std::abs(tfidf - 1.91) <= 0.01;
    std::ostringstream d;
    d << "BLEU " << format_fixed2(bleu) << ", FK " << format_fixed2(fk1) << " / " << format_fixed2(fk2)
      << ", TF-IDF " << format_fixed2(tfidf);
    return {ok, d.str()};
}

Outcome lexer_goldens() {
    std::size_t fixtures_total = 0;
    std::size_t literal_cases = 0;
    std::vector<std::string> problems;
    for (Language lang : kAllLanguages) {
        const auto set = fixtures::load_fixtures(lang);
        if (set.size() < 10) problems.push_back(std::string(to_string(lang)) + " has " + std::to_string(set.size()));
        for (const auto& f : set) {
            ++fixtures_total;
            const auto out = strip_comments(f.input, lang);
            if (out.stripped != f.expected) problems.push_back(f.name + " golden");
            if (strip_comments(out.stripped, lang).stripped != out.stripped) problems.push_back(f.name + " idempotence");
            const bool oracle = fixtures::oracle_balanced(out.stripped, lang);
            if (check_structure(out.stripped, lang) != oracle || oracle != f.balanced) {
                problems.push_back(f.name + " structure");
            }
            // A comment opener that survives stripping sits inside a literal.
            for (const char* opener : {"//", "/*", "#"}) {
                if (f.expected.find(opener) != std::string::npos) {
                    ++literal_cases;
                    break;
                }
            }
        }
    }
    std::string d = std::to_string(fixtures_total) + " fixtures, " + std::to_string(literal_cases) +
                    " with comment-like text in literals";
    for (const auto& p : problems) d += "; " + p;
    return {problems.empty() && literal_cases >= kAllLanguages.size(), d};
}

Outcome filter_fixture() {
    std::map<std::string, std::size_t> planted, rejected_as;
    std::size_t accepted = 0, total = 0, mismatches = 0;
    for (const char* lang : {"java", "python"}) {
        auto loaded =
            load_corpus(fs::path(DOCBENCH_TEST_DATA) / "corpus/filter20" / lang / "test.jsonl", Split::test);
        std::vector<std::string> expected;
        for (const auto& p : loaded.pairs) {
            expected.push_back(p.source.at("planted").get<std::string>());
            ++planted[expected.back()];
        }
        const auto result = clean_corpus(std::move(loaded.pairs), default_structure_validator(), 2);
        for (std::size_t i = 0; i < result.verdicts.size(); ++i) {
            const std::string got(to_string(result.verdicts[i].reason));
            ++rejected_as[got];
            mismatches += got != expected[i];
        }
        accepted += result.accepted.size();
        total += result.verdicts.size();
    }
    std::string d = std::to_string(total) + " records, " + std::to_string(accepted) + " accepted";
    for (const auto& [reason, n] : rejected_as) d += ", " + reason + "=" + std::to_string(n);
    return {total == 20 && mismatches == 0 && rejected_as == planted && accepted == planted["ok"], d};
}

Outcome prompt_goldens() {
    CodeDocPair target;
    target.id = "python-test-0000001";
    target.language = Language::python;
    target.code = "def subtract(x, y):\n    return x-y";
    const std::vector<Exemplar> ex = {{"def add(x, y):\n    return x+y", "Adds two numbers.", "python-train-0000001"}};
    const auto one = build_prompt(target, ex).text;
    const auto zero = build_prompt(target, {}).text;
    const bool one_ok = one == data_file("prompts/one_shot.txt");
    const bool zero_ok = zero == data_file("prompts/zero_shot.txt");
    const bool degenerate = one == "Code:\n" + ex[0].code + "\nDocumentation: " + ex[0].doc + "\n" + zero;
    return {one_ok && zero_ok && degenerate, std::string("one-shot ") + (one_ok ? "byte-identical" : "differs") +
                                                 ", zero-shot " + (zero_ok && degenerate ? "degenerate form" : "differs")};
}

Outcome end_to_end_determinism() {
    const auto dir = scratch("determinism");
    synth::write(dir / "corpus", 50, 20, {Language::python});
    auto run_into = [&](const std::string& name) {
        ConfigMap m = {{"corpus", (dir / "corpus").string()},
                       {"languages", "python"},
                       {"samples", "50"},
                       {"seed", "2024"},
                       {"backend", "retrieval"},
                       {"out", (dir / name).string()},
                       {"cache", (dir / (name + "_cache")).string()}};
        std::ostringstream out, err;
        return cmd_run(resolve_config({&m}), {out, err});
    };
    const auto t0 = Clock::now();
    const int rc_a = run_into("a");
    const int rc_b = run_into("b");
    const double secs = seconds_since(t0);
    std::size_t identical = 0;
    const std::vector<std::string> files = {"records.jsonl", "summary.csv", "manifest.json"};
    for (const auto& f : files) {
        const auto a = fixtures::slurp(dir / "a" / f);
        identical += !a.empty() && a == fixtures::slurp(dir / "b" / f);
    }
    const auto records = load_records(dir / "a/records.jsonl").size();
    fs::remove_all(dir);
    std::ostringstream d;
    d << records << " records, " << identical << "/" << files.size() << " files byte-identical, " << secs << " s";
    return {rc_a == 0 && rc_b == 0 && records == 50 && identical == files.size() && secs < 10.0, d.str()};
}

Outcome stub_protocol() {
    ::setenv("DOCBENCH_API_KEY", "acceptance-key", 1);
    stub::Server server;
    server.enqueue({429, "{\"error\":\"rate limited\"}", "0"});
    server.enqueue(stub::completion("Adds two numbers.\nCode:\ndef other():"));
    RemoteOptions opts;
    opts.endpoint = server.url();
    opts.backoff_base_ms = 5;
    RemoteBackend backend(opts);
    CodeDocPair target;
    target.code = "def add(x, y):\n    return x+y";
    const auto prompt = build_prompt(target, {});
    const auto first = backend.generate(prompt, GenerationParams{});
    const auto second = backend.generate(prompt, GenerationParams{});
    ::unsetenv("DOCBENCH_API_KEY");

    const auto reqs = server.requests();
    const nlohmann::json expected = {{"model", "code-davinci-002"}, {"prompt", prompt.text},
                                     {"temperature", 0.2},           {"top_p", 1.0},
                                     {"frequency_penalty", 0.0},     {"presence_penalty", 0.0},
                                     {"max_tokens", 256},            {"stop", {"\nCode:"}}};
    bool bodies = reqs.size() == 2;
    for (const auto& r : reqs) {
        bodies = bodies && nlohmann::json::parse(r.body) == expected && r.authorization == "Bearer acceptance-key";
    }
    const bool stop = first.doc == "Adds two numbers.";
    const bool cached = second.cached && second.doc == first.doc;
    std::ostringstream d;
    d << reqs.size() << " requests (429 then 200), body " << (bodies ? "exact" : "differs") << ", stop "
      << (stop ? "honoured" : "ignored") << ", repeat " << (cached ? "cached" : "re-requested");
    return {bodies && stop && cached, d.str()};
}

Outcome non_reproducible_statement() {
    const fs::path root = DOCBENCH_SOURCE_DIR;
    const auto reported = fixtures::slurp(root / "data/codex_reported.csv");
    const auto qualitative = fixtures::slurp(root / "data/codex_qualitative.csv");
    const auto readme = fixtures::slurp(root / "README.md");
    const auto baselines = fixtures::slurp(root / "data/baselines_bleu.csv");
    const bool shipped = reported.find("Codex (1-shot),16.04,16.58,20.94,22.28,22.81,25.13,20.63") != std::string::npos &&
                         reported.find("Codex (0-shot),5.41,9.83,15.80,18.93,13.59,13.32,12.81") != std::string::npos &&
                         qualitative.find("flesch_kincaid,5.97,6.77") != std::string::npos &&
                         qualitative.find("length_words,8,12") != std::string::npos &&
                         qualitative.find("tfidf,1.94,2.28") != std::string::npos;
    const bool marked = reported.find("Context only") != std::string::npos &&
                        qualitative.find("Context only") != std::string::npos;
    const bool documented = readme.find("not acceptance targets") != std::string::npos &&
                            readme.find("codex_reported.csv") != std::string::npos;
    const bool kept_apart = baselines.find("Codex") == std::string::npos;
    std::string d = std::string("fixtures ") + (shipped ? "present" : "missing") + ", " +
                    (marked ? "marked context-only" : "unmarked") + ", README " +
                    (documented ? "states non-targets" : "silent") + ", baselines " +
                    (kept_apart ? "exclude Codex" : "include Codex");
    return {shipped && marked && documented && kept_apart, d};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"sample-size math", sample_size},
        {"overall aggregation", overall_aggregation},
        {"BLEU oracle equivalence", bleu_oracle},
        {"metric hand values", metric_hand_values},
        {"lexer goldens", lexer_goldens},
        {"filter fixture", filter_fixture},
        {"prompt goldens", prompt_goldens},
        {"end-to-end determinism", end_to_end_determinism},
        {"stub-server protocol", stub_protocol},
        {"non-reproducible results stated", non_reproducible_statement},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.ok;
        std::cout << (o.ok ? "PASS" : "FAIL") << ' ' << i + 1 << ' ' << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
