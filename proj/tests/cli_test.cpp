#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "docbench/pipeline.hpp"
#include "oracles.hpp"
#include "stub_server.hpp"
#include "synthetic_corpus.hpp"

using namespace docbench;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("docbench_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override {
        ::unsetenv("DOCBENCH_API_KEY");
        fs::remove_all(dir_);
    }

    cli::Result run(std::vector<std::string> args) { return cli::run(args, dir_ / "io"); }

    void write(const fs::path& rel, const std::string& text) const {
        fs::create_directories((dir_ / rel).parent_path());
        std::ofstream(dir_ / rel, std::ios::binary) << text;
    }

    fs::path dir_;
};

std::string s(const fs::path& p) { return p.string(); }

}  // namespace

TEST_F(CliTest, HelpListsEveryConfigKey) {
    for (const std::vector<std::string>& args : {std::vector<std::string>{"--help"}, {"run", "--help"}}) {
        const auto r = run(args);
        EXPECT_EQ(r.code, 0);
        for (const auto& k : kConfigKeys) {
            EXPECT_NE(r.out.find("  " + std::string(k.name) + " ["), std::string::npos) << k.name;
        }
        EXPECT_NE(r.out.find("DOCBENCH_API_KEY"), std::string::npos);
    }
}

TEST_F(CliTest, UnknownOptionAndKeyAreUsageErrors) {
    EXPECT_EQ(run({"run", "--no-such-flag"}).code, 2);
    EXPECT_EQ(run({"run", "--set", "colour=blue"}).code, 2);
    EXPECT_EQ(run({"run", "--shots", "9"}).code, 2);
    EXPECT_EQ(run({}).code, 2);
}

TEST_F(CliTest, PreprocessFiltersPlantedViolations) {
    const auto out = dir_ / "out";
    const auto r = run({"preprocess", "--set", "corpus=" DOCBENCH_TEST_DATA "/corpus/filter20", "--languages",
                        "java,python", "--out", s(out)});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto java = load_corpus(out / "cleaned/java/test.jsonl", Split::test).pairs;
    const auto python = load_corpus(out / "cleaned/python/test.jsonl", Split::test).pairs;
    EXPECT_EQ(java.size() + python.size(), 14u);
    for (const auto* set : {&java, &python}) {
        for (const auto& p : *set) EXPECT_EQ(p.source.value("planted", ""), "ok") << p.id;
    }
    const auto stats = cli::slurp(out / "preprocess_stats.csv");
    for (const char* reason : {"unparsable_code", "doc_too_short", "doc_too_long", "special_token", "non_english"}) {
        EXPECT_NE(stats.find(reason), std::string::npos) << reason;
    }
}

TEST_F(CliTest, PreprocessOnEmptyRootIsUsageError) {
    fs::create_directories(dir_ / "empty");
    EXPECT_EQ(run({"preprocess", "--set", "corpus=" + s(dir_ / "empty"), "--out", s(dir_ / "o")}).code, 2);
    EXPECT_EQ(run({"preprocess", "--set", "corpus=" + s(dir_ / "absent"), "--out", s(dir_ / "o")}).code, 2);
}

TEST_F(CliTest, RunIsByteIdenticalAcrossInvocations) {
    synth::write(dir_ / "corpus", 50, 20);
    std::vector<std::string> common = {"run", "--set", "corpus=" + s(dir_ / "corpus"), "--samples", "50",
                                       "--seed", "11"};
    auto first = common;
    first.insert(first.end(), {"--out", s(dir_ / "a"), "--cache", s(dir_ / "cache_a")});
    auto second = common;
    second.insert(second.end(), {"--out", s(dir_ / "b"), "--cache", s(dir_ / "cache_b")});
    const auto ra = run(first);
    ASSERT_EQ(ra.code, 0) << ra.err;
    const auto rb = run(second);
    ASSERT_EQ(rb.code, 0) << rb.err;
    for (const char* f : {"records.jsonl", "summary.csv", "report.csv", "report.md", "manifest.json"}) {
        const auto a = cli::slurp(dir_ / "a" / f);
        EXPECT_FALSE(a.empty()) << f;
        EXPECT_EQ(a, cli::slurp(dir_ / "b" / f)) << f;
    }
    EXPECT_EQ(load_records(dir_ / "a/records.jsonl").size(), 300u);
}

TEST_F(CliTest, ManifestReplayReproducesRun) {
    synth::write(dir_ / "corpus", 20, 10, {Language::go});
    const auto r1 = run({"run", "--set", "corpus=" + s(dir_ / "corpus"), "--languages", "go", "--samples", "8",
                         "--seed", "5", "--out", s(dir_ / "a"), "--cache", ""});
    ASSERT_EQ(r1.code, 0) << r1.err;
    const auto r2 = run({"run", "--manifest", s(dir_ / "a/manifest.json"), "--out", s(dir_ / "b"), "--cache", ""});
    ASSERT_EQ(r2.code, 0) << r2.err;
    EXPECT_EQ(cli::slurp(dir_ / "a/records.jsonl"), cli::slurp(dir_ / "b/records.jsonl"));
    EXPECT_EQ(cli::slurp(dir_ / "a/manifest.json"), cli::slurp(dir_ / "b/manifest.json"));
}

TEST_F(CliTest, ShotCountChangesOnlyShotsAndExemplars) {
    synth::write(dir_ / "corpus", 20, 10, {Language::python});
    auto go = [&](const std::string& shots, const std::string& out) {
        return run({"run", "--set", "corpus=" + s(dir_ / "corpus"), "--languages", "python", "--samples", "6",
                    "--shots", shots, "--out", s(dir_ / out), "--cache", ""});
    };
    ASSERT_EQ(go("0", "zero").code, 0);
    ASSERT_EQ(go("1", "one").code, 0);
    auto zero = nlohmann::json::parse(cli::slurp(dir_ / "zero/manifest.json"));
    auto one = nlohmann::json::parse(cli::slurp(dir_ / "one/manifest.json"));
    EXPECT_EQ(zero["config"]["shots"], "0");
    EXPECT_EQ(one["config"]["shots"], "1");
    EXPECT_TRUE(zero["exemplar_ids"].empty());
    EXPECT_EQ(one["exemplar_ids"].size(), 6u);
    for (auto* m : {&zero, &one}) {
        (*m)["config"].erase("shots");
        m->erase("exemplar_ids");
    }
    EXPECT_EQ(zero, one);
}

TEST_F(CliTest, MissingCorpusIsUsageError) {
    const auto r = run({"run", "--set", "corpus=" + s(dir_ / "nowhere"), "--out", s(dir_ / "o")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("missing test split"), std::string::npos);
}

TEST_F(CliTest, RemoteWithoutKeyIsConfigError) {
    ::unsetenv("DOCBENCH_API_KEY");
    synth::write(dir_ / "corpus", 5, 5, {Language::php});
    const auto r = run({"run", "--set", "corpus=" + s(dir_ / "corpus"), "--languages", "php", "--backend", "remote",
                        "--set", "endpoint=http://127.0.0.1:9/v1/completions", "--out", s(dir_ / "o")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("DOCBENCH_API_KEY"), std::string::npos);
}

TEST_F(CliTest, RemoteStubEndToEndMatchesOracle) {
    ::setenv("DOCBENCH_API_KEY", "cli-key", 1);
    stub::Server server([](const nlohmann::json& body) {
        const auto prompt = body["prompt"].get<std::string>();
        const auto at = prompt.rfind("fn_test_");
        const auto name = prompt.substr(at, prompt.find('(', at) - at);
        return stub::completion(" Returns the " + name + " value.\nCode:\ndef other():");
    });
    synth::write(dir_ / "corpus", 10, 10, {Language::python, Language::java});
    const auto r = run({"run", "--set", "corpus=" + s(dir_ / "corpus"), "--languages", "python,java", "--samples", "4",
                        "--backend", "remote", "--set", "endpoint=" + server.url(), "--set", "backoff_ms=1",
                        "--out", s(dir_ / "o"), "--cache", s(dir_ / "cache")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto reqs = server.requests();
    EXPECT_EQ(reqs.size(), 8u);
    for (const auto& q : reqs) EXPECT_EQ(q.authorization, "Bearer cli-key");

    const auto records = load_records(dir_ / "o/records.jsonl");
    ASSERT_EQ(records.size(), 8u);
    for (const auto& rec : records) {
        EXPECT_EQ(rec.generated.rfind("Returns the fn_test_", 0), 0u) << rec.generated;
        EXPECT_EQ(rec.generated.find("Code:"), std::string::npos);
        EXPECT_NEAR(rec.metrics.bleu, oracle::bleu(tokenize_text(rec.generated), tokenize_text(rec.reference)),
                    1e-9);
    }
    const auto manifest = nlohmann::json::parse(cli::slurp(dir_ / "o/manifest.json"));
    EXPECT_EQ(manifest["backend"]["endpoint"], server.url());
    EXPECT_EQ(cli::slurp(dir_ / "o/manifest.json").find("cli-key"), std::string::npos);

    const auto again = run({"run", "--set", "corpus=" + s(dir_ / "corpus"), "--languages", "python,java",
                            "--samples", "4", "--backend", "remote", "--set", "endpoint=" + server.url(), "--out",
                            s(dir_ / "o2"), "--cache", s(dir_ / "cache")});
    ASSERT_EQ(again.code, 0) << again.err;
    EXPECT_EQ(server.requests().size(), 8u);
    EXPECT_EQ(cli::slurp(dir_ / "o/records.jsonl"), cli::slurp(dir_ / "o2/records.jsonl"));
}

TEST_F(CliTest, MostlyFailingRemoteRunIsUnreliable) {
    ::setenv("DOCBENCH_API_KEY", "cli-key", 1);
    stub::Server server([](const nlohmann::json&) { return stub::Reply{500, "{}", ""}; });
    synth::write(dir_ / "corpus", 4, 4, {Language::ruby});
    const auto r = run({"run", "--set", "corpus=" + s(dir_ / "corpus"), "--languages", "ruby", "--samples", "4",
                        "--backend", "remote", "--set", "endpoint=" + server.url(), "--set", "max_attempts=2",
                        "--set", "backoff_ms=1", "--out", s(dir_ / "o"), "--cache", ""});
    EXPECT_EQ(r.code, 3);
    const auto records = load_records(dir_ / "o/records.jsonl");
    ASSERT_EQ(records.size(), 4u);
    for (const auto& rec : records) EXPECT_TRUE(rec.error.has_value());
}

TEST_F(CliTest, ScoreFiveLineFixture) {
    write("pred.txt", "Adds two numbers.\nReturns the path.\n\nOpens the file.\nCloses it.\n");
    write("ref.txt", "Subtracts two numbers.\nReturns the path.\nReads a line.\nOpens a file for reading.\nCloses the "
                     "handle.\n");
    const auto r = run({"score", s(dir_ / "pred.txt"), s(dir_ / "ref.txt"), "--out", s(dir_ / "o")});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::vector<std::string> preds = {"Adds two numbers.", "Returns the path.", "", "Opens the file.",
                                            "Closes it."};
    const std::vector<std::string> refs = {"Subtracts two numbers.", "Returns the path.", "Reads a line.",
                                           "Opens a file for reading.", "Closes the handle."};
    double sum = 0;
    for (std::size_t i = 0; i < 5; ++i) sum += oracle::bleu(tokenize_text(preds[i]), tokenize_text(refs[i]));
    const auto csv = cli::slurp(dir_ / "o/score_summary.csv");
    const auto row = csv.substr(csv.find('\n') + 1);
    EXPECT_EQ(row.substr(0, 2), "5,");
    EXPECT_NEAR(std::stod(row.substr(2)), sum / 5, 1e-9);
    EXPECT_NE(r.out.find("records=5"), std::string::npos);
}

TEST_F(CliTest, ScoreRejectsMismatchAndEmpty) {
    write("p.txt", "One.\nTwo.\n");
    write("r.txt", "One.\n");
    write("empty.txt", "");
    EXPECT_EQ(run({"score", s(dir_ / "p.txt"), s(dir_ / "r.txt"), "--out", s(dir_ / "o")}).code, 2);
    EXPECT_EQ(run({"score", s(dir_ / "empty.txt"), s(dir_ / "empty.txt"), "--out", s(dir_ / "o")}).code, 2);
    EXPECT_EQ(run({"score", s(dir_ / "p.txt"), s(dir_ / "missing.txt"), "--out", s(dir_ / "o")}).code, 2);
}

TEST_F(CliTest, ReportRendersBaselinesAndMeasuredRows) {
    synth::write(dir_ / "corpus", 8, 8);
    ASSERT_EQ(run({"run", "--set", "corpus=" + s(dir_ / "corpus"), "--samples", "4", "--out", s(dir_ / "r1"),
                   "--cache", ""})
                  .code,
              0);
    const auto r = run({"report", s(dir_ / "r1/records.jsonl"), "--out", s(dir_ / "rep")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("| CodeBERT"), std::string::npos);
    EXPECT_NE(r.out.find("retrieval (1-shot)"), std::string::npos);
    const auto csv = cli::slurp(dir_ / "rep/report.csv");
    EXPECT_NE(csv.find("REDCODER,-,-,-,21.01,22.94,-,N/A"), std::string::npos);
    EXPECT_EQ(csv, cli::slurp(dir_ / "r1/report.csv"));
    EXPECT_EQ(run({"report", s(dir_ / "nope.jsonl"), "--out", s(dir_ / "rep")}).code, 2);
}

TEST_F(CliTest, StopwordsListsVersionedList) {
    const auto r = run({"stopwords"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("en-127-v1"), std::string::npos);
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 128);
}
