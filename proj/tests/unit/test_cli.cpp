#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>

#include "../support/fixtures.hpp"

using traitgrade::testing::read_file;
using traitgrade::testing::TempDir;
using traitgrade::testing::write_file;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Result run(const std::string& args) {
  const std::string cmd = std::string("'") + TRAITGRADE_CLI_PATH + "' " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  while (const auto n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

const char* kTsv =
    "essay_id\tessay_set\tessay\tdomain1_score\n"
    "1\t3\tThe text is good.\t2\n"
    "2\t3\tIt was hot.\t7\n";
const char* kTraits =
    "essay_id,Content,Prompt Adherence,Language,Narrativity\n"
    "1,2,2,1,2\n"
    "2,1,1,1,0\n";

}  // namespace

TEST(Cli, ValidateNamesOutOfRangeEssay) {
  TempDir dir;
  write_file(dir / "a.tsv", kTsv);
  write_file(dir / "t.csv", kTraits);
  const auto r = run("validate --asap " + quoted(dir / "a.tsv") + " --traits " + quoted(dir / "t.csv"));
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("essay 2"), std::string::npos) << r.out;
}

TEST(Cli, ValidateMissingTraitFileNamesPath) {
  TempDir dir;
  write_file(dir / "a.tsv", kTsv);
  const auto r = run("validate --asap " + quoted(dir / "a.tsv") + " --traits " + quoted(dir / "missing.csv"));
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("missing.csv"), std::string::npos) << r.out;
}

TEST(Cli, ValidateAcceptsSyntheticData) {
  TempDir dir;
  const auto s = run("synth --out " + quoted(dir.path()) + " --prompt 1,3 --essays 12");
  ASSERT_EQ(s.code, 0) << s.out;
  const auto r = run("validate --asap " + quoted(dir / "training_set_rel3.tsv") + " --traits " +
                     quoted(dir / "traits"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("24 essays, 2 prompts, OK"), std::string::npos) << r.out;
}

TEST(Cli, ParamsPrintsTotal) {
  const auto r = run("params --mode mtl --recurrent bilstm --prompt 8");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("1857013"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("1.86M"), std::string::npos) << r.out;
}

TEST(Cli, QwkOfIdenticalColumnsIsOne) {
  TempDir dir;
  write_file(dir / "a.csv", "pred,gold\n0,0\n1,1\n3,3\n2,2\n");
  const auto r = run("qwk --range 0 3 " + quoted(dir / "a.csv"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("1.000000"), std::string::npos) << r.out;
}

TEST(Cli, QwkRejectsOutOfRangeScores) {
  TempDir dir;
  write_file(dir / "a.csv", "0,0\n5,1\n");
  EXPECT_EQ(run("qwk --range 0 3 " + quoted(dir / "a.csv")).code, 1);
}

TEST(Cli, UnknownFlagFails) {
  const auto r = run("params --frobnicate");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find("frobnicate"), std::string::npos) << r.out;
}

TEST(Cli, HelpListsEveryFlag) {
  const auto top = run("--help");
  EXPECT_EQ(top.code, 0);
  for (const char* sub : {"validate", "train", "eval", "ablate", "params", "qwk", "synth"})
    EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
  const auto train = run("train --help");
  for (const char* flag : {"--config", "--prompt", "--fold", "--mode", "--recurrent", "--jobs", "--seed",
                           "--runs-dir", "--folds-file", "--glove"})
    EXPECT_NE(train.out.find(flag), std::string::npos) << flag;
  const auto ablate = run("ablate --help");
  EXPECT_NE(ablate.out.find("--trait"), std::string::npos);
}

TEST(Cli, UnknownConfigKeyIsNamed) {
  TempDir dir;
  write_file(dir / "c.ini", "[training]\nfoo = 1\n");
  const auto r = run("train --config " + quoted(dir / "c.ini"));
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("training.foo"), std::string::npos) << r.out;
}

namespace {

void write_small_config(const TempDir& dir, const std::string& extra_data = "") {
  write_file(dir / "c.ini", "[data]\nasap = training_set_rel3.tsv\ntraits = traits\n" + extra_data +
                                "[model]\nembed_dim = 8\nfilters = 8\nhidden = 8\n"
                                "[training]\nepochs = 2\nbatch_size = 10\n"
                                "[evaluation]\nprompts = 3\nfolds = 0\nmodes = stl\nrecurrent = lstm\n"
                                "runs_dir = runs\n");
}

}  // namespace

TEST(Cli, TrainThenEvalAndResume) {
  TempDir dir;
  ASSERT_EQ(run("synth --out " + quoted(dir.path()) + " --prompt 3 --essays 30").code, 0);
  write_small_config(dir);
  const auto first = run("train --config " + quoted(dir / "c.ini"));
  ASSERT_EQ(first.code, 0) << first.out;
  const auto cell = dir / "runs" / "3" / "stl-lstm" / "0";
  for (const char* f : {"checkpoint.bin", "history.csv", "timing.csv", "manifest.json", "test_scores.csv", "DONE"})
    EXPECT_TRUE(std::filesystem::exists(cell / f)) << f;
  const auto history = read_file(cell / "history.csv");
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 3);

  const auto again = run("train --config " + quoted(dir / "c.ini"));
  EXPECT_EQ(again.code, 0);
  EXPECT_NE(again.out.find("skip"), std::string::npos) << again.out;

  const auto eval = run("eval --runs-dir " + quoted(dir / "runs") + " --out " + quoted(dir / "report"));
  EXPECT_EQ(eval.code, 0) << eval.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "report" / "report.md"));
  EXPECT_NE(eval.out.find("lacks fold"), std::string::npos) << eval.out;
}

TEST(Cli, NonNumericVectorsAreRejected) {
  TempDir dir;
  ASSERT_EQ(run("synth --out " + quoted(dir.path()) + " --prompt 3 --essays 30").code, 0);
  write_file(dir / "glove.txt", "the 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8\ncat 0.1 nan 0.3 0.4 0.5 0.6 0.7 0.8\n");
  write_small_config(dir, "glove = glove.txt\n");
  const auto r = run("train --config " + quoted(dir / "c.ini"));
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("glove.txt:2"), std::string::npos) << r.out;
}
