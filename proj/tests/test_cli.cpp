#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "fpp/fpp.hpp"
#include "support.hpp"

using namespace fpp;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;  // stdout and stderr interleaved
};

Run fpp_cli(const std::string& args) {
  const std::string cmd = std::string(FPP_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string fixture(const std::string& name) { return (fs::path(FPP_FIXTURES_DIR) / name).string(); }

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json json_in(const std::string& text) {
  const auto start = text.find('{');
  return nlohmann::json::parse(text.substr(start));
}

}  // namespace

TEST(Cli, DecodeShippedFixture) {
  test::TempDir dir;
  const auto r = fpp_cli("decode --stack " + fixture("plane") + " --out " + (dir / "phase.f32").string() + " --reliability " +
                         (dir / "rel.png").string());
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "phase.f32"));
  EXPECT_EQ(read_f32(dir / "phase.f32").width(), 128);
  EXPECT_TRUE(fs::exists(dir / "rel.png"));
}

TEST(Cli, PipelineOnSpecularPlatter) {
  const auto r = fpp_cli("pipeline run --stack " + fixture("specular_platter") + " --backend harmonic");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto j = json_in(r.out);
  EXPECT_EQ(j["state"], "PlatterFacing");
  EXPECT_EQ(j["completion"], "invoked");
  EXPECT_EQ(j["completion_backend"], "harmonic");
}

TEST(Cli, PipelineOnPcbSkipsCompletion) {
  test::TempDir dir;
  const auto r = fpp_cli("pipeline run --stack " + fixture("pcb") + " --out " + (dir / "cloud.ply").string() + " --diagnostics " +
                         (dir / "diag.json").string());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto j = nlohmann::json::parse(read_text_file(dir / "diag.json"));
  EXPECT_EQ(j["state"], "PcbFacing");
  EXPECT_EQ(j["completion"], "not_invoked");
  EXPECT_EQ(bytes(dir / "cloud.ply").rfind("ply\n", 0), 0u);
}

TEST(Cli, PipelineFallbackFromFailingEndpoint) {
  const auto r = fpp_cli("pipeline run --stack " + fixture("specular_platter") +
                         " --backend external-with-fallback --endpoint '" + FPP_STUB_PATH + " fail'");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto j = json_in(r.out);
  EXPECT_EQ(j["completion_backend"], "harmonic-fallback");
  EXPECT_FALSE(j["warnings"].empty());
  const auto bad = fpp_cli("pipeline run --stack " + fixture("specular_platter") + " --backend external --endpoint '" +
                           FPP_STUB_PATH + " nan'");
  EXPECT_EQ(bad.status, 1);
  EXPECT_NE(bad.out.find("error: protocol:"), std::string::npos) << bad.out;
}

TEST(Cli, EvalDetectSelfComparison) {
  test::TempDir dir;
  const auto labels = fixture("pcb") + "/labels.txt";
  const auto r = fpp_cli("eval detect --pred " + labels + " --gt " + labels + " --width 128 --height 128 --json " +
                         (dir / "det.json").string());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto j = nlohmann::json::parse(read_text_file(dir / "det.json"));
  EXPECT_EQ(j["map50"], 1.0);
  EXPECT_EQ(j["map50_95"], 1.0);
  EXPECT_NE(r.out.find("Overall mAP"), std::string::npos);
}

TEST(Cli, ReconstructAndEvalDepth) {
  test::TempDir dir;
  const auto depth = (dir / "z.f32").string();
  ASSERT_EQ(fpp_cli("reconstruct --stack " + fixture("plane") + " --out " + depth).status, 0);
  const auto r = fpp_cli("eval depth --pred " + depth + " --truth " + fixture("plane") + "/depth_gt.f32 --json " +
                         (dir / "m.json").string());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto j = nlohmann::json::parse(read_text_file(dir / "m.json"));
  EXPECT_LT(j["rmse_mm"].get<double>(), 0.1);
  EXPECT_GE(j["rmse_mm"].get<double>(), j["mae_mm"].get<double>());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(fpp_cli("decode --stack x --out y --bogus").status, 2);
  EXPECT_EQ(fpp_cli("frobnicate").status, 2);
  EXPECT_EQ(fpp_cli("").status, 2);
  const auto missing = fpp_cli("decode --stack /nonexistent/stack --out /tmp/never.f32");
  EXPECT_EQ(missing.status, 1);
  EXPECT_NE(missing.out.find("error: io:"), std::string::npos) << missing.out;
  EXPECT_EQ(fpp_cli("--help").status, 0);
}

TEST(Cli, BenchUsageErrors) {
  const auto unknown = fpp_cli("bench fft");
  EXPECT_EQ(unknown.status, 2);
  for (const auto& name : bench_stage_names()) EXPECT_NE(unknown.out.find(name), std::string::npos);
  EXPECT_EQ(fpp_cli("bench wrapped-phase --iters 0 --stack " + fixture("plane")).status, 2);
  const auto list = fpp_cli("bench list");
  EXPECT_EQ(list.status, 0);
  EXPECT_NE(list.out.find("harmonic"), std::string::npos);
}

TEST(Cli, BenchReportAndConfigPrecedence) {
  test::TempDir dir;
  write_text_file(dir / "bench.toml", "[bench]\niters = 4\nwarmup = 1\n");
  const auto base = "--config " + (dir / "bench.toml").string() + " bench wrapped-phase --stack " + fixture("plane");
  ASSERT_EQ(fpp_cli(base + " --json " + (dir / "a.json").string()).status, 0);
  EXPECT_EQ(nlohmann::json::parse(read_text_file(dir / "a.json"))["measured_iterations"], 4);
  ASSERT_EQ(fpp_cli(base + " --iters 2 --json " + (dir / "b.json").string()).status, 0);
  const auto j = nlohmann::json::parse(read_text_file(dir / "b.json"));
  EXPECT_EQ(j["measured_iterations"], 2);
  EXPECT_EQ(j["warmup_iterations"], 1);
  EXPECT_NEAR(j["throughput_fps"].get<double>() * j["mean_ms"].get<double>(), 1000.0, 1e-6);
  const auto verbose = fpp_cli("-v " + base + " --iters 1");
  EXPECT_NE(verbose.out.find("bench.iters=1"), std::string::npos) << verbose.out;
}

TEST(Cli, SimulateIsSeedReproducible) {
  test::TempDir dir;
  const std::string common = " simulate --scene sphere --width 48 --height 48 --focal 94 --out ";
  ASSERT_EQ(fpp_cli("--seed 5" + common + (dir / "a").string()).status, 0);
  ASSERT_EQ(fpp_cli("--seed 5" + common + (dir / "b").string()).status, 0);
  ASSERT_EQ(fpp_cli("--seed 6" + common + (dir / "c").string()).status, 0);
  for (const char* f : {"phase_00.png", "gray_03.png", "white.png", "depth_gt.f32", "calib.json"})
    EXPECT_EQ(bytes(dir / "a" / f), bytes(dir / "b" / f)) << f;
  EXPECT_NE(bytes(dir / "a" / "phase_00.png"), bytes(dir / "c" / "phase_00.png"));
}

TEST(Cli, PatternsExport) {
  test::TempDir dir;
  const auto r = fpp_cli("patterns export --out " + (dir / "p").string() + " --width 56 --height 8 --period 8 --shifts 4 --bits 3");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "p" / "phase_03.png"));
  EXPECT_TRUE(fs::exists(dir / "p" / "gray_02.png"));
  EXPECT_EQ(fpp_cli("patterns export --out " + (dir / "q").string() + " --width 64 --period 8 --bits 2").status, 1);
}

TEST(Cli, DatagenSmallSweep) {
  test::TempDir dir;
  const auto out = (dir / "ds").string();
  const std::string args = " datagen --scene hdd:3 --width 64 --height 64 --focal 125 --theta-max 2 --delta 1 --out ";
  ASSERT_EQ(fpp_cli("--seed 2" + args + out).status, 0);
  const auto m = nlohmann::json::parse(read_text_file(dir / "ds" / "manifest.json"));
  EXPECT_EQ(m["entries"].size(), 3u);
  EXPECT_EQ(fpp_cli("--seed 2" + args + out).status, 1);  // refuses a non-empty directory
  EXPECT_EQ(fpp_cli("--seed 2" + args + out + " --force").status, 0);
}
