#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("nvsim-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = std::string("\"") + NVSIM_EXE + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string data(const std::string& rel) { return std::string(NVSIM_SOURCE_DIR) + "/data/" + rel; }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, Table1Rows) {
  const Result r = run("table1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("196608             393               589            3932"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("       1           0.002             0.003            0.02"), std::string::npos) << r.out;
}

TEST_F(Cli, Table1Crossover) {
  const Result r = run("table1 -n 10 -n 10000 --crossover 1.4TB/s --csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("10,0.02,0.03,0.2\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("10000,20,30,200\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("crossover 70 nodes"), std::string::npos) << r.out;
}

TEST_F(Cli, MalformedClusterIsExitOne) {
  const fs::path c = write("bad.json", R"({"format_version": 1, "external_fs_bw": "100 GB/s",
    "external_fs_capacity": "1 PB", "nodes": [{"count": 1, "dram_dimm_bytes": "16 GB",
    "dram_dimms_per_socket": 6, "dram_bw": "100 GB/s", "flops": "2 TFlop/s",
    "link_bw": "fast", "dram_latency": "100 ns"}]})");
  const Result r = run("simulate -c " + c.string() + " -w " + data("workloads/pipeline.json") + " -o " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nodes[0].link_bw"), std::string::npos) << r.err;
}

TEST_F(Cli, MalformedWorkloadIsExitTwo) {
  const fs::path w = write("bad.json", R"({"format_version": 1, "jobs": [{"job_id": "j"}]})");
  const Result r = run("simulate -c " + data("clusters/small.json") + " -w " + w.string() + " -o " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("jobs[0]"), std::string::npos) << r.err;
}

TEST_F(Cli, OrderingViolationIsExitThree) {
  const Result r = run("scenario burst-buffer --seed 4 --force-early-launch");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE((r.out + r.err).find("OrderingViolation"), std::string::npos) << r.out << r.err;
}

TEST_F(Cli, ScenarioPasses) {
  const Result r = run("scenario burst-buffer --seeds 0..9");
  ASSERT_EQ(r.code, 0) << r.err;
  for (int s = 0; s < 10; ++s) EXPECT_NE(r.out.find("seed " + std::to_string(s) + ": PASS"), std::string::npos);
}

TEST_F(Cli, SimulateIsByteIdentical) {
  const std::string base = "simulate -c " + data("clusters/mixed.json") + " -w " + data("workloads/pipeline.json") + " --plot-data -o ";
  ASSERT_EQ(run(base + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(run(base + (dir_ / "b").string()).code, 0);
  for (const char* f : {"trace.log", "jobs.csv", "nodes.csv", "summary.csv", "plot_data.csv"}) {
    const std::string a = slurp(dir_ / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(Cli, SynthWritesAValidWorkload) {
  const fs::path w = dir_ / "w.json";
  const Result r = run("synth -c " + data("clusters/small.json") + " --jobs 30 --seed 5 -o " + w.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const Result s = run("simulate -c " + data("clusters/small.json") + " -w " + w.string() + " -o " + (dir_ / "o").string());
  EXPECT_EQ(s.code, 0) << s.err;
}

TEST_F(Cli, UnknownPolicyIsRejected) {
  const Result r = run("simulate -c " + data("clusters/small.json") + " --policy random");
  EXPECT_NE(r.code, 0);
}
