#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + E3VA_CLI + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("e3va_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Cli, SimulateThenReplaySucceeds) {
  const auto dir = scratch("ok");
  const auto sc = fs::path(E3VA_SCENARIOS_DIR) / "short_decay.jsonl";
  ASSERT_EQ(run("simulate " + sc.string() + " -o " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "transcript.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "events.jsonl"));
  EXPECT_EQ(run("replay " + (dir / "transcript.jsonl").string() + " -o " +
                (dir / "track.json").string() + " --hold-ms 100 --decay-ms 50"),
            0);
  EXPECT_GT(fs::file_size(dir / "track.json"), 0u);
}

TEST(Cli, InputErrorsExitOne) {
  const auto dir = scratch("bad");
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("dance"), 1);
  EXPECT_EQ(run("simulate"), 1);
  EXPECT_EQ(run("simulate /nonexistent.jsonl -o " + dir.string()), 1);
  std::ofstream(dir / "bad.jsonl") << "{\"kind\":\"utterance\"}\n";
  EXPECT_EQ(run("simulate " + (dir / "bad.jsonl").string() + " -o " + dir.string()), 1);
  std::ofstream(dir / "t.jsonl") << "not json\n";
  EXPECT_EQ(run("replay " + (dir / "t.jsonl").string() + " -o " + (dir / "x.json").string()), 1);
  EXPECT_EQ(run("replay " + (dir / "t.jsonl").string() + " -o x.json --decay-ms 0"), 1);
  EXPECT_EQ(run("serve --bind nohost"), 1);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run("--help"), 0); }

}  // namespace
