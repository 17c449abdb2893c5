#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli_app.hpp"
#include "signfac/io.hpp"
#include "signfac/rng.hpp"

using namespace signfac;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("signfac_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

struct CliResult {
  int code;
  nlohmann::json report;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, nlohmann::json::parse(out.str())};
}

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST(ReadMatrix, Csv) {
  const Matrix m = parse_csv("1,2\n3,4");
  EXPECT_EQ(m, (Matrix(2, 2) << 1, 2, 3, 4).finished());
  EXPECT_EQ(parse_csv(" 1.5 , -2e3\r\n+3,4\n\n"), (Matrix(2, 2) << 1.5, -2000, 3, 4).finished());
}

TEST(ReadMatrix, RaggedCsvNamesTheRow) {
  try {
    parse_csv("1,2\n3\n", "x.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("x.csv:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_csv("1,a\n"), ParseError);
  EXPECT_THROW(parse_csv(""), ParseError);
}

TEST(ReadMatrix, MatrixMarket) {
  const Matrix m = parse_matrix_market("%%MatrixMarket matrix array real general\n% c\n2 2\n1\n3\n2\n4\n");
  EXPECT_EQ(m, (Matrix(2, 2) << 1, 2, 3, 4).finished());
  EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n"), ParseError);
  EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n"), ParseError);
}

TEST(WriteMatrix, RoundTrip) {
  TempDir dir;
  Rng rng(1);
  const Matrix m = rng.normal_matrix(5, 7) * 1e3;
  for (MatrixFormat f : {MatrixFormat::csv, MatrixFormat::matrixmarket}) {
    const std::string path = dir / (std::string("m.") + to_string(f));
    write_matrix(m, path, f);
    EXPECT_EQ(read_matrix(path, f), m);
    write_matrix(Matrix::Identity(3, 3), path, f);
    EXPECT_EQ(read_matrix(path, f), Matrix::Identity(3, 3));
  }
}

TEST(WriteMatrix, UnwritablePath) {
  EXPECT_THROW(write_matrix(Matrix::Ones(2, 2), "/nonexistent_dir/x/y.csv"), Error);
  EXPECT_THROW(read_matrix("/nonexistent_dir/missing.csv"), ParseError);
}

TEST(Cli, CheckSchur) {
  TempDir dir;
  write_text(dir / "S.csv", "1,1\n1,-1\n-1,1\n-1,-1\n");
  const CliResult r = run_cli({"check-schur", "--input", dir / "S.csv", "--kind", "sign"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.report["result"]["schur_independent"], true);
  EXPECT_EQ(r.report["status"], "ok");

  write_text(dir / "D.csv", "1,1\n-1,-1\n1,1\n");
  EXPECT_EQ(run_cli({"check-schur", "--input", dir / "D.csv"}).report["result"]["schur_independent"], false);
}

TEST(Cli, GenScdMatchPipeline) {
  TempDir dir;
  const CliResult g = run_cli({"gen", "glm", "--n", "20", "--m", "15", "--r", "3", "--seed", "1", "--out", dir / "B.csv",
                           "--out-truth", dir / "S.csv"});
  ASSERT_EQ(g.code, 0) << g.report.dump();
  const CliResult s =
      run_cli({"scd", "--input", dir / "B.csv", "--out-s", dir / "S_hat.csv", "--out-w", dir / "W.csv", "--seed", "7"});
  ASSERT_EQ(s.code, 0) << s.report.dump();
  EXPECT_LE(s.report["metrics"]["residual"].get<double>(), 1e-6);
  EXPECT_TRUE(fs::exists(dir / "W.csv"));
  const CliResult m = run_cli({"match", "--a", dir / "S.csv", "--b", dir / "S_hat.csv", "--kind", "signed"});
  ASSERT_EQ(m.code, 0);
  EXPECT_EQ(m.report["result"]["match"], true);
}

TEST(Cli, Determinism) {
  TempDir dir;
  for (const char* name : {"a.csv", "b.csv"})
    ASSERT_EQ(run_cli({"gen", "sparse-noise", "--n", "6", "--m", "5", "--r", "2", "--omega", "4", "--seed", "3", "--out",
                   dir / name})
                  .code,
              0);
  EXPECT_EQ(read_matrix(dir / "a.csv"), read_matrix(dir / "b.csv"));
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(run_cli({"scd", "--bogus"}).code, 2);
  EXPECT_EQ(run_cli({"scd"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
  write_text(dir / "bad.csv", "1,2\n3\n");
  const CliResult parse = run_cli({"scd", "--input", dir / "bad.csv"});
  EXPECT_EQ(parse.code, 3);
  EXPECT_EQ(parse.report["status"], "error");
  EXPECT_FALSE(parse.report["message"].get<std::string>().empty());
  EXPECT_EQ(run_cli({"scd", "--input", dir / "missing.csv"}).code, 3);
  write_text(dir / "zero.csv", "0,0\n0,0\n");
  EXPECT_EQ(run_cli({"scd", "--input", dir / "zero.csv"}).code, 4);
  write_text(dir / "generic.csv", "1,2\n3,5\n7,-1\n");
  EXPECT_EQ(run_cli({"scd", "--input", dir / "generic.csv"}).code, 6);
  write_text(dir / "B.csv", "1,2,3\n-1,0,2\n4,1,1\n2,2,2\n");
  EXPECT_EQ(run_cli({"denoise-pcp", "--input", dir / "B.csv", "--max-iter", "1"}).code, 5);
}

TEST(Cli, ReportFileAndEcho) {
  TempDir dir;
  write_text(dir / "S.csv", "1\n-1\n");
  const std::string report = dir / "r.json";
  std::ostringstream out;
  std::ostringstream err;
  ASSERT_EQ(cli::run({"--report", report, "--tol", "1e-7", "stats", "permeance", "--input", dir / "S.csv"}, out, err),
            0);
  EXPECT_TRUE(out.str().empty());
  std::ifstream in(report);
  const nlohmann::json j = nlohmann::json::parse(in);
  EXPECT_EQ(j["report_version"], "1.0");
  EXPECT_EQ(j["command"], "stats permeance");
  EXPECT_DOUBLE_EQ(j["inputs"]["parameters"]["tol"].get<double>(), 1e-7);
  EXPECT_DOUBLE_EQ(j["metrics"]["permeance"].get<double>(), 1.0);
}

TEST(Cli, VerifyVerdicts) {
  const CliResult r = run_cli({"verify", "tail-bound", "--r", "2", "--m", "20", "--t", "3", "--trials", "2000"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.report["result"]["pass"], true);
  const CliResult one = run_cli({"verify", "tail-bound", "--r", "2", "--m", "20", "--trials", "1"});
  ASSERT_EQ(one.code, 0);
  EXPECT_TRUE(one.report["result"]["pass"].is_null());
}
