// Copyright 2026 The ILC Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end tests that drive the command-line binaries.

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "ilc/image_io.hpp"
#include "ilc/synth.hpp"
#include "test_support.hpp"

namespace ilc {
namespace {

struct Proc {
  int code = -1;
  std::string out;
};

Proc run(const std::string& args, const char* exe = ILC_CLI) {
  const std::string cmd = std::string(exe) + " " + args + " 2>&1";
  Proc r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int count_lines(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::string line;
  int n = 0;
  while (std::getline(f, line)) ++n;
  return n;
}

// Shared fixture: a tiny corpus and a briefly trained IEM checkpoint.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new std::filesystem::path(testing::temp_dir("cli"));
    const auto& r = *root_;
    ASSERT_EQ(run("-o " + (r / "corpus").string() + " --count 4 --size 64 --heldout 3 --heldout-size 40",
                  ILC_MAKE_CORPUS).code, 0);
    const std::string common = "--data " + (r / "corpus/train").string() +
                               " --steps 2 --batch 1 --crop 32 --seed 3 --set checkpoint_every=0";
    ASSERT_EQ(run("train " + common + " --ablate noKDM --output " + (r / "m").string()).code, 0);
    ASSERT_EQ(run("train " + common + " --ablate no1x1,noKDM --output " + (r / "m_abl").string()).code, 0);
  }
  static void TearDownTestSuite() { delete root_; }
  static std::filesystem::path* root_;
  const std::filesystem::path& root() const { return *root_; }
  std::string ckpt() const { return (root() / "m/iem.ckpt").string(); }
};
std::filesystem::path* Cli::root_ = nullptr;

TEST_F(Cli, CheckPassesAndFaultInjectionIsolatesCoupling) {
  const Proc ok = run("check");
  EXPECT_EQ(ok.code, 0) << ok.out;
  const Proc bad = run("check", ILC_FAULTY);
  EXPECT_EQ(bad.code, 1) << bad.out;
  std::istringstream lines(bad.out);
  std::string line;
  int fails = 0;
  while (std::getline(lines, line)) {
    if (line.find("FAIL") != std::string::npos) {
      ++fails;
      EXPECT_EQ(line.rfind("coupling", 0), 0u) << line;
    }
  }
  EXPECT_EQ(fails, 1);
}

TEST_F(Cli, UsageAndIoErrorsExitTwo) {
  EXPECT_EQ(run("train --data /definitely/missing --output " + (root() / "x").string()).code, 2);
  EXPECT_EQ(run("bogus-command").code, 2);
  EXPECT_EQ(run("train --data " + (root() / "corpus/train").string() + " --ablate noFoo --output " +
                (root() / "y").string()).code, 2);
  EXPECT_EQ(run("compress /missing.png --checkpoint " + ckpt() + " -o /tmp/x.ilc").code, 2);
  EXPECT_EQ(run("check --suite nope").code, 2);
}

TEST_F(Cli, OddSizedRoundTripIsDeterministic) {
  const auto dir = root() / "odd";
  std::filesystem::create_directories(dir);
  write_png(dir / "in.png", synthetic_image(255, 255, 77));
  for (const char* tag : {"a", "b"}) {
    const Proc c = run("compress " + (dir / "in.png").string() + " --checkpoint " + ckpt() + " -o " +
                      (dir / (std::string(tag) + ".ilc")).string());
    ASSERT_EQ(c.code, 0) << c.out;
    EXPECT_NE(c.out.find(" dB @ "), std::string::npos) << c.out;
    const Proc d = run("decompress " + (dir / (std::string(tag) + ".ilc")).string() +
                      " --checkpoint " + ckpt() + " -o " + (dir / (std::string(tag) + ".png")).string());
    ASSERT_EQ(d.code, 0) << d.out;
  }
  EXPECT_EQ(slurp(dir / "a.ilc"), slurp(dir / "b.ilc"));
  EXPECT_EQ(slurp(dir / "a.png"), slurp(dir / "b.png"));
  EXPECT_EQ(read_png(dir / "a.png").shape(), Shape(1, 255, 255, 3));
  // sigma 0 is the default mode; sigma 1 changes the output.
  ASSERT_EQ(run("decompress " + (dir / "a.ilc").string() + " --checkpoint " + ckpt() +
                " --sample-z 0 -o " + (dir / "z0.png").string()).code, 0);
  ASSERT_EQ(run("decompress " + (dir / "a.ilc").string() + " --checkpoint " + ckpt() +
                " --sample-z 1 --seed 5 -o " + (dir / "z1.png").string()).code, 0);
  EXPECT_EQ(slurp(dir / "z0.png"), slurp(dir / "a.png"));
  EXPECT_NE(slurp(dir / "z1.png"), slurp(dir / "a.png"));
  // A stream decoded with the wrong model is refused.
  EXPECT_EQ(run("decompress " + (dir / "a.ilc").string() + " --checkpoint " +
                (root() / "m_abl/iem.ckpt").string() + " -o " + (dir / "w.png").string()).code, 2);
}

TEST_F(Cli, NqStreamsCarryRawFloats) {
  const auto dir = root() / "nq";
  std::filesystem::create_directories(dir);
  write_png(dir / "in.png", synthetic_image(64, 64, 5));
  ASSERT_EQ(run("compress " + (dir / "in.png").string() + " --checkpoint " + ckpt() + " -o " +
                (dir / "q.ilc").string()).code, 0);
  ASSERT_EQ(run("compress " + (dir / "in.png").string() + " --checkpoint " + ckpt() + " --nq -o " +
                (dir / "nq.ilc").string()).code, 0);
  // 8x8x64 latent stored as float32, plus the container header.
  EXPECT_GT(std::filesystem::file_size(dir / "nq.ilc"), 4u * 8 * 8 * 64);
  EXPECT_LT(std::filesystem::file_size(dir / "nq.ilc"), 4u * 8 * 8 * 64 + 128);
  EXPECT_EQ(run("decompress " + (dir / "nq.ilc").string() + " --checkpoint " + ckpt() + " -o " +
                (dir / "nq.png").string()).code, 0);
}

TEST_F(Cli, EvalReportsRowsProvenanceAndPlotData) {
  const std::string prefix = (root() / "report/r").string();
  const Proc e = run("eval --checkpoint " + ckpt() + " --checkpoint " +
                    (root() / "m_abl/iem.ckpt").string() + " --data " +
                    (root() / "corpus/heldout").string() + " --nq -o " + prefix);
  ASSERT_EQ(e.code, 0) << e.out;
  // Header + 2 checkpoints x 2 modes x (3 images + 1 mean).
  EXPECT_EQ(count_lines(prefix + ".csv"), 1 + 2 * 2 * 4);
  const std::string csv = slurp(prefix + ".csv");
  EXPECT_NE(csv.find("\"no1x1,noKDM\""), std::string::npos);
  EXPECT_NE(csv.find(",mean,"), std::string::npos);
  const std::string jl = slurp(prefix + ".jsonl");
  EXPECT_NE(jl.find("\"provenance\""), std::string::npos);
  EXPECT_NE(jl.find("no1x1 = true"), std::string::npos);
  EXPECT_EQ(count_lines(prefix + "_plot.csv"), 1 + 2 * 2);
  const Proc p = run("plot-data " + prefix + ".csv");
  EXPECT_EQ(p.code, 0);
  EXPECT_NE(p.out.find("noKDM"), std::string::npos);
}

TEST_F(Cli, ConfigFileAndFlagsCompose) {
  const auto dir = root() / "cfg";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "run.cfg");
    f << "steps = 1\nbatch = 1\ncrop = 32\nnoKDM = true\nlambda1 = 0.25\ncheckpoint_every = 0\n";
  }
  const Proc r = run("train --config " + (dir / "run.cfg").string() + " --lambda3 0.5 --data " +
                    (root() / "corpus/train").string() + " --output " + (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string ck = slurp(dir / "out/iem.ckpt");
  EXPECT_NE(ck.find("lambda1 = 0.25"), std::string::npos);
  EXPECT_NE(ck.find("lambda3 = 0.5"), std::string::npos);
  EXPECT_NE(ck.find("code_version = "), std::string::npos);
  const std::string log = slurp(dir / "out/iem_log.csv");
  EXPECT_EQ(log.rfind("step,total,distortion,rate_bpp", 0), 0u);
}

}  // namespace
}  // namespace ilc
