#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "adfe/pipeline.hpp"
#include "adfe/synth.hpp"
#include "helpers.hpp"

using namespace adfe;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run(const fs::path& dir, const std::string& args) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string(ADFE_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out);
    r.err = read_file(err);
    return r;
}

std::size_t count_lines(const fs::path& p) {
    std::istringstream in(read_file(p));
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) n += !l.empty();
    return n;
}

}  // namespace

TEST(Cli, EmptyCorpusIsValidationError) {
    auto dir = test::scratch_dir("cli_empty");
    write_file(dir / "c.jsonl", "");
    auto r = run(dir, "--corpus " + (dir / "c.jsonl").string() + " --reports-dir " + dir.string() + " ingest");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("empty corpus"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("\"errors\""), std::string::npos);
}

TEST(Cli, MalformedLineReportsLine) {
    auto dir = test::scratch_dir("cli_bad");
    write_file(dir / "c.jsonl", "{oops\n");
    auto r = run(dir, "--corpus " + (dir / "c.jsonl").string() + " --reports-dir " + dir.string() + " ingest");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("\"line\":1"), std::string::npos) << r.err;
}

TEST(Cli, DuplicateIdWarns) {
    auto dir = test::scratch_dir("cli_dup");
    GenSpec spec;
    spec.videos = 3;
    auto g = generate_corpus(spec, 1);
    g.corpus.videos.push_back(g.corpus.videos.front());
    write_corpus(dir / "c.jsonl", g.corpus);
    auto r = run(dir, "--corpus " + (dir / "c.jsonl").string() + " --reports-dir " + dir.string() + " ingest");
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("warning: duplicate video_id"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("videos"), std::string::npos);
}

TEST(Cli, SyngenPresetIsDeterministic) {
    auto dir = test::scratch_dir("cli_syngen");
    auto a = run(dir, "--seed 4 syngen --preset food15 --out " + (dir / "a.jsonl").string());
    auto b = run(dir, "--seed 4 syngen --preset food15 --out " + (dir / "b.jsonl").string());
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(count_lines(dir / "a.jsonl"), 1059u);
    EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
    EXPECT_TRUE(fs::exists(dir / "a.jsonl.truth.json"));
}

TEST(Cli, MissingModelIsRuntimeError) {
    auto dir = test::scratch_dir("cli_nomodel");
    GenSpec spec;
    spec.videos = 3;
    write_corpus(dir / "c.jsonl", generate_corpus(spec, 1).corpus);
    auto r = run(dir, "--corpus " + (dir / "c.jsonl").string() + " --reports-dir " + (dir / "r").string() +
                          " score");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("model not found"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
    auto dir = test::scratch_dir("cli_usage");
    EXPECT_EQ(run(dir, "").code, 2);
    EXPECT_EQ(run(dir, "frobnicate").code, 2);
    EXPECT_EQ(run(dir, "train --hidden-states x").code, 2);
    EXPECT_EQ(run(dir, "syngen --out " + (dir / "x").string()).code, 2);
    EXPECT_EQ(run(dir, "--help").code, 0);
}

TEST(Cli, OverridesReachConfigEcho) {
    auto dir = test::scratch_dir("cli_echo");
    GenSpec spec;
    spec.videos = 12;
    write_corpus(dir / "c.jsonl", generate_corpus(spec, 2).corpus);
    auto r = run(dir, "--corpus " + (dir / "c.jsonl").string() + " --reports-dir " + dir.string() +
                          " train --hidden-states 2 --epochs 2 --batch-size 4");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto echo = read_file(dir / "config_echo.json");
    EXPECT_NE(echo.find("\"hidden_states\": 2"), std::string::npos) << echo;
}

TEST(Cli, CommaSeparatedModesAndNestedOutput) {
    auto dir = test::scratch_dir("cli_modes");
    const auto corpus = (dir / "data" / "c.jsonl").string();
    ASSERT_EQ(run(dir, "--seed 3 syngen --preset food15 --out " + corpus).code, 0);
    const std::string common = "--corpus " + corpus + " --reports-dir " + (dir / "r").string() + " ";
    ASSERT_EQ(run(dir, common + "train --epochs 1").code, 0);
    auto r = run(dir, common + "score --modes visual,audio --viewings 1");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = read_file(dir / "r" / "scene_metrics.csv");
    EXPECT_NE(csv.find(",audio,1,"), std::string::npos);
    EXPECT_EQ(csv.find(",joint,"), std::string::npos);
}
