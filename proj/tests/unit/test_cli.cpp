#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "cli.hpp"
#include "paths.hpp"
#include "persistlens/fileio.hpp"

namespace fs = std::filesystem;
using persistlens::read_text_file;
using persistlens::write_file_atomic;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args) {
    args.insert(args.begin(), "persistlens");
    std::ostringstream out, err;
    const int code = persistlens::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// Synthetic inputs written once per name.
fs::path synth_inputs(const std::string& name, int n = 12, int seed = 2) {
    const auto dir = test_support::scratch_dir(name);
    const auto r = cli({"synth", "--out", dir.string(), "--n", std::to_string(n), "--seed", std::to_string(seed),
                        "--catalog", test_support::catalog_path().string()});
    if (r.code != 0) throw std::runtime_error("synth failed: " + r.err);
    return dir;
}

std::vector<std::string> run_args(const fs::path& in, const fs::path& out) {
    return {"run",         "--backend",         "rules",
            "--notes",     (in / "notes").string(), "--psychometrics", (in / "psychometrics.csv").string(),
            "--out",       out.string(),       "--catalog",       test_support::catalog_path().string()};
}

std::string tree_bytes(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string out;
    for (const auto& f : files) out += fs::relative(f, dir).string() + "\n" + read_text_file(f);
    return out;
}

void replace_psychometrics(const fs::path& in, const std::function<std::string(std::size_t, const std::string&)>& edit) {
    const auto text = read_text_file(in / "psychometrics.csv");
    std::istringstream lines(text);
    std::string line, out;
    for (std::size_t row = 0; std::getline(lines, line); ++row) out += (row ? edit(row, line) : line) + "\n";
    write_file_atomic(in / "psychometrics.csv", out);
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        for (const char* v : {"LLM_MODEL", "LLM_API_KEY", "LLM_BASE_URL"}) ::unsetenv(v);
    }
};

}  // namespace

TEST_F(CliTest, HelpAndUsage) {
    EXPECT_EQ(cli({"--help"}).code, 0);
    const auto sub = cli({"run", "--help"});
    EXPECT_EQ(sub.code, 0);
    EXPECT_NE(sub.out.find("--max-inflight"), std::string::npos);
    EXPECT_EQ(cli({}).code, 1);
    EXPECT_EQ(cli({"frobnicate"}).code, 1);
    EXPECT_EQ(cli({"run", "--max-inflight", "0"}).code, 1);
}

TEST_F(CliTest, SmokeRun) {
    const auto in = synth_inputs("cli_smoke_in");
    const auto out = test_support::scratch_dir("cli_smoke_out");
    const auto r = cli(run_args(in, out));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("participants:             12"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("GRiPS correlation:"), std::string::npos);
    for (const char* f : {"corpus.json", "annotations.jsonl", "failures.jsonl", "metrics.csv", "distribution.json",
                          "analysis.json", "report/table1.csv", "report/table2.csv", "report/fig1.svg",
                          "report/fig4.svg"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }
}

TEST_F(CliTest, MissingPsychometricsIsUsageError) {
    const auto in = synth_inputs("cli_missing_in");
    fs::remove(in / "psychometrics.csv");
    const auto r = cli(run_args(in, test_support::scratch_dir("cli_missing_out")));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find((in / "psychometrics.csv").string()), std::string::npos) << r.err;
}

TEST_F(CliTest, ApiBackendNeedsKey) {
    const auto in = synth_inputs("cli_key_in");
    auto args = run_args(in, test_support::scratch_dir("cli_key_out"));
    args[2] = "api";
    const auto r = cli(args);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("LLM_API_KEY"), std::string::npos);
}

TEST_F(CliTest, IdenticalTraitExitsDegenerate) {
    const auto in = synth_inputs("cli_const_in");
    replace_psychometrics(in, [](std::size_t, const std::string& line) {
        // participant_id,division,grips,... -> grips fixed at 3
        const auto a = line.find(',', line.find(',') + 1);
        const auto b = line.find(',', a + 1);
        return line.substr(0, a + 1) + "3" + line.substr(b);
    });
    const auto r = cli(run_args(in, test_support::scratch_dir("cli_const_out")));
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("column 'grips'"), std::string::npos) << r.err;
}

TEST_F(CliTest, TooFewParticipantsExitsDegenerate) {
    const auto in = synth_inputs("cli_small_in", 3);
    const auto r = cli(run_args(in, test_support::scratch_dir("cli_small_out")));
    EXPECT_EQ(r.code, 3) << r.err;
}

TEST_F(CliTest, DuplicateRowNamesParticipant) {
    const auto in = synth_inputs("cli_dup_in");
    const auto text = read_text_file(in / "psychometrics.csv");
    const auto second_line_end = text.find('\n', text.find('\n') + 1);
    write_file_atomic(in / "psychometrics.csv", text + text.substr(text.find('\n') + 1, second_line_end - text.find('\n')));
    const auto r = cli(run_args(in, test_support::scratch_dir("cli_dup_out")));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("P001"), std::string::npos) << r.err;
}

TEST_F(CliTest, StagesComposeToRun) {
    const auto in = synth_inputs("cli_stage_in");
    const auto whole = test_support::scratch_dir("cli_stage_whole");
    ASSERT_EQ(cli(run_args(in, whole)).code, 0);

    const auto staged = test_support::scratch_dir("cli_stage_parts");
    const std::string cat = test_support::catalog_path().string();
    ASSERT_EQ(cli({"ingest", "--notes", (in / "notes").string(), "--psychometrics", (in / "psychometrics.csv").string(),
                   "--out", staged.string()})
                  .code,
              0);
    ASSERT_EQ(cli({"annotate", "--backend", "rules", "--out", staged.string(), "--catalog", cat}).code, 0);
    ASSERT_EQ(cli({"metrics", "--out", staged.string()}).code, 0);
    ASSERT_EQ(cli({"analyze", "--out", staged.string(), "--catalog", cat}).code, 0);
    ASSERT_EQ(cli({"report", "--out", staged.string()}).code, 0);
    EXPECT_EQ(tree_bytes(staged), tree_bytes(whole));
}

TEST_F(CliTest, RerunIsIdempotent) {
    const auto in = synth_inputs("cli_idem_in");
    const auto out = test_support::scratch_dir("cli_idem_out");
    ASSERT_EQ(cli(run_args(in, out)).code, 0);
    const auto first = tree_bytes(out);
    ASSERT_EQ(cli(run_args(in, out)).code, 0);
    EXPECT_EQ(tree_bytes(out), first);
}

TEST_F(CliTest, StrictReplayOnEmptyCache) {
    const auto in = synth_inputs("cli_strict_in");
    const auto cache = test_support::scratch_dir("cli_strict_cache");
    auto args = run_args(in, test_support::scratch_dir("cli_strict_out"));
    args[2] = "replay";
    args.insert(args.end(), {"--cache", cache.string(), "--strict"});
    const auto strict = cli(args);
    EXPECT_EQ(strict.code, 2);
    EXPECT_NE(strict.err.find("cache_miss"), std::string::npos);

    args.pop_back();
    // without --strict every participant fails and nothing is left to measure
    EXPECT_EQ(cli(args).code, 1);
}

TEST_F(CliTest, RulesCacheReplays) {
    const auto in = synth_inputs("cli_cache_in");
    const auto cache = test_support::scratch_dir("cli_cache_dir");
    const auto live = test_support::scratch_dir("cli_cache_live");
    auto args = run_args(in, live);
    args.insert(args.end(), {"--cache", cache.string()});
    ASSERT_EQ(cli(args).code, 0);

    const auto replayed = test_support::scratch_dir("cli_cache_replay");
    auto replay = run_args(in, replayed);
    replay[2] = "replay";
    replay.insert(replay.end(), {"--cache", cache.string(), "--model", "rules-v1", "--strict", "--max-inflight", "3"});
    const auto r = cli(replay);
    ASSERT_EQ(r.code, 0) << r.err;
    // only the provenance tag differs between a live run and its replay
    auto replayed_text = read_text_file(replayed / "annotations.jsonl");
    for (auto pos = replayed_text.find("\"replay:"); pos != std::string::npos; pos = replayed_text.find("\"replay:", pos)) {
        replayed_text.replace(pos, 8, "\"rules:");
    }
    EXPECT_EQ(replayed_text, read_text_file(live / "annotations.jsonl"));
    EXPECT_EQ(tree_bytes(replayed / "report"), tree_bytes(live / "report"));
}

TEST_F(CliTest, ConfigFilePrecedence) {
    const auto in = synth_inputs("cli_cfg_in");
    const auto dir = test_support::scratch_dir("cli_cfg");
    write_file_atomic(dir / "config.json", R"({"backend": "rules", "out": "from-config", "bins": 3,
        "notes": ")" + (in / "notes").string() + R"(", "psychometrics": ")" + (in / "psychometrics.csv").string() + R"("})");
    const auto r = cli({"run", "--config", (dir / "config.json").string(), "--catalog", test_support::catalog_path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    // relative path resolved against the config file's directory
    EXPECT_TRUE(fs::exists(dir / "from-config" / "metrics.csv"));
    EXPECT_NE(read_text_file(dir / "from-config" / "distribution.json").find("bin_3"), std::string::npos);

    // a flag beats the file
    const auto flagged = test_support::scratch_dir("cli_cfg_flag");
    ASSERT_EQ(cli({"run", "--config", (dir / "config.json").string(), "--catalog",
                   test_support::catalog_path().string(), "--out", flagged.string(), "--bins", "2"})
                  .code,
              0);
    const auto dist = read_text_file(flagged / "distribution.json");
    EXPECT_NE(dist.find("bin_2"), std::string::npos);
    EXPECT_EQ(dist.find("bin_3"), std::string::npos);

    // environment beats the file; a model from the environment does not bind the rules backend
    ::setenv("LLM_MODEL", "some-api-model", 1);
    EXPECT_EQ(cli({"run", "--config", (dir / "config.json").string(), "--catalog",
                   test_support::catalog_path().string(), "--out", flagged.string()})
                  .code,
              0);
    ::unsetenv("LLM_MODEL");
    EXPECT_EQ(cli({"run", "--config", (dir / "config.json").string(), "--model", "gpt-4o"}).code, 1);

    write_file_atomic(dir / "bad.json", R"({"backend": "rules", "colour": "blue"})");
    const auto bad = cli({"run", "--config", (dir / "bad.json").string()});
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.err.find("colour"), std::string::npos);
}

TEST_F(CliTest, AnalyzeFixtureMatchesGolden) {
    const auto results = test_support::data_dir() / "results";
    const auto out = test_support::scratch_dir("cli_analyze");
    const auto r = cli({"analyze", "--metrics", (results / "metrics.csv").string(), "--psychometrics",
                        (results / "psychometrics.csv").string(), "--out", out.string(), "--catalog",
                        test_support::catalog_path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_text_file(out / "report" / "table1.csv"), read_text_file(results / "golden" / "table1.csv"));
    EXPECT_EQ(read_text_file(out / "report" / "table2.csv"), read_text_file(results / "golden" / "table2.csv"));
}

TEST_F(CliTest, SynthRejectsUnknownTechnique) {
    const auto r = cli({"synth", "--out", test_support::scratch_dir("cli_synth_bad").string(), "--technique",
                        "Valid Accounts: Cloud Accounts", "--catalog", test_support::catalog_path().string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("Cloud Accounts"), std::string::npos);
}
