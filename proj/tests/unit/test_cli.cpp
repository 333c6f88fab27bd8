#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <sys/wait.h>

#include "inkless/cli/config.hpp"
#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"
#include "test_support.hpp"

using namespace inkless;
using namespace inkless::cli;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI binary with stdout captured and stderr discarded.
Run run_cli(const std::string& args) {
  const std::string cmd = std::string(INKLESS_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace

TEST(Config, RoundTrip) {
  PipelineConfig c;
  c.seed = 12;
  c.restore.stride = 64;
  c.training.epochs = 3;
  c.model.residual_blocks = 9;
  c.propagate();
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.training.seed, 12u);
  EXPECT_EQ(back.sampler.seed, 12u);
}

TEST(Config, PartialAndUnknownKeys) {
  const auto c = config_from_json({{"restore", {{"stride", 50}}}});
  EXPECT_EQ(c.restore.stride, 50);
  EXPECT_EQ(c.restore.tile, 128);
  EXPECT_THROW(config_from_json({{"restorr", json::object()}}), ConfigError);
  EXPECT_THROW(config_from_json({{"restore", {{"strid", 5}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"restore", {{"stride", "x"}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"restore", {{"stride", 500}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"training", {{"seed", 5}}}}), ConfigError);
}

TEST(Config, DefaultsMatchShippedFile) {
  EXPECT_EQ(dump_config(PipelineConfig{}), read_text(INKLESS_DEFAULTS_JSON));
}

TEST(Cli, Version) {
  const auto r = run_cli("--version");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find('.'), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli("--no-such-flag").code, 2);
  EXPECT_EQ(run_cli("frobnicate").code, 2);
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("restore --stride 5").code, 2);
}

TEST(Cli, ConfigDumpMatchesDefaults) {
  const auto r = run_cli("--config-dump");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, read_text(INKLESS_DEFAULTS_JSON));
}

TEST(Cli, ConfigFileApplied) {
  test::TempDir dir;
  write_text_atomic(dir / "c.json", R"({"seed": 77, "restore": {"stride": 64}})");
  const auto r = run_cli("--config " + (dir / "c.json").string() + " --config-dump");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["seed"], 77);
  EXPECT_EQ(j["restore"]["stride"], 64);
  write_text_atomic(dir / "bad.json", R"({"bogus": 1})");
  EXPECT_EQ(run_cli("--config " + (dir / "bad.json").string() + " --config-dump").code, 1);
}

TEST(Cli, SynthAndSegmentSmoke) {
  test::TempDir dir;
  ASSERT_EQ(run_cli("synth-corpus --out " + (dir / "corpus").string() + " --n 3 --patch-size 32").code, 0);
  EXPECT_EQ(list_files(dir / "corpus" / "inked").size(), 3u);
  const auto slide = (dir / "corpus" / "inked" / "00000.png").string();
  ASSERT_EQ(run_cli("segment-ink --slide " + slide + " --out " + (dir / "m.mask.png").string() +
                    " --downsample 1")
                .code,
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "m.mask.png"));
  EXPECT_EQ(run_cli("segment-ink --slide " + (dir / "missing.png").string() + " --out " +
                    (dir / "x.png").string())
                .code,
            2);
  write_text_atomic(dir / "bad.png", "not an image");
  EXPECT_EQ(run_cli("segment-ink --slide " + (dir / "bad.png").string() + " --out " + (dir / "x.png").string())
                .code,
            1);
}
