#include "prft/core.hpp"
#include "prft/io.hpp"
#include "prft/scenario.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>

using namespace prft;
namespace fs = std::filesystem;

namespace {

const std::string kData = PRFT_TEST_DATA;
const std::string kCli = PRFT_CLI_PATH;

// Exit status and stdout of a shell command.
std::pair<int, std::string> shell(const std::string& cmd) {
  std::string out;
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(::popen((cmd + " 2>/dev/null").c_str(), "r"), ::pclose);
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe.get())) out += buf.data();
  const int status = ::pclose(pipe.release());
  return {WEXITSTATUS(status), out};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("prft_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Io, NumbersRoundTripInShortestForm) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(3.0), "3");
  Table t;
  t.columns = {"a", "b", "c"};
  t.add_row({0.1, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity()});
  t.add_row({1.0 / 3.0, -2.5e-300, -std::numeric_limits<double>::infinity()});
  const auto back = parse_csv(to_csv(t));
  ASSERT_EQ(back.columns, t.columns);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0][0], 0.1);
  EXPECT_TRUE(std::isnan(back.rows[0][1]));
  EXPECT_EQ(back.rows[0][2], std::numeric_limits<double>::infinity());
  EXPECT_EQ(back.rows[1][0], 1.0 / 3.0);
  EXPECT_EQ(back.rows[1][1], -2.5e-300);
  EXPECT_EQ(back.column("c"), 2);
  EXPECT_EQ(back.column("z"), -1);
}

TEST(Scenario, UnknownKeysAreRejected) {
  auto s = scenario::load(kData + "/jc_small.json");
  EXPECT_TRUE(scenario::validate(s).empty());
  s["colour"] = "blue";
  s["counting"]["spacing"] = 2;
  const auto report = scenario::validate(s);
  ASSERT_GE(report.size(), 2u);
  EXPECT_THROW(scenario::run(s), ValidationError);
}

TEST(Scenario, SmallCountingGridIsRejected) {
  auto s = scenario::load(kData + "/jc_small.json");
  s["counting"]["n_chi"] = 8;
  s["counting"]["window"] = 6;
  EXPECT_FALSE(scenario::validate(s).empty());
}

TEST(Scenario, VariantsAreRunSeparately) {
  const auto r = scenario::run(scenario::load(kData + "/jc_small.json"));
  EXPECT_TRUE(r.ok()) << (r.failures().empty() ? "" : r.failures().front());
  EXPECT_EQ(r.summary.at("variants").size(), 2u);
  const int v = r.cumulants.column("variant");
  ASSERT_GE(v, 0);
  bool seen[2] = {false, false};
  for (const auto& row : r.cumulants.rows) seen[static_cast<int>(row[static_cast<std::size_t>(v)])] = true;
  EXPECT_TRUE(seen[0] && seen[1]);
}

TEST(Scenario, OutputsAreByteIdenticalAcrossRuns) {
  const auto s = scenario::load(kData + "/jc_small.json");
  const auto a = scratch("det_a"), b = scratch("det_b");
  scenario::RunOptions one, four;
  one.threads = 1;
  four.threads = 4;
  scenario::write_outputs(scenario::run(s, one), a.string());
  scenario::write_outputs(scenario::run(s, four), b.string());
  for (const char* f : {"cumulants.csv", "quasiprob.csv", "pn.csv"}) {
    EXPECT_EQ(read_text((a / f).string()), read_text((b / f).string())) << f;
  }
  EXPECT_TRUE(fs::exists(a / "summary.json"));
  EXPECT_TRUE(fs::exists(a / "manifest.json"));
}

TEST(Scenario, BundledScenariosValidate) {
  const auto names = scenario::bundled_names();
  EXPECT_EQ(names.size(), 12u);
  for (const auto& n : names) EXPECT_TRUE(scenario::validate(scenario::load(n)).empty()) << n;
}

TEST(Cli, ListsBundledScenarios) {
  const auto [code, out] = shell(kCli + " list-scenarios");
  EXPECT_EQ(code, 0);
  for (const auto& n : scenario::bundled_names()) EXPECT_NE(out.find(n), std::string::npos) << n;
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(shell(kCli + " validate fig2b_high").first, 0);
  const auto bad = scratch("bad.json");
  write_text(bad.string(), R"({"name": "bad", "model": "rabi", "wrong": 1})");
  EXPECT_EQ(shell(kCli + " validate " + bad.string()).first, 2);
  EXPECT_EQ(shell(kCli + " run " + bad.string() + " --out " + scratch("bad_out").string()).first, 2);
  const auto out = scratch("cli_ok");
  EXPECT_EQ(shell(kCli + " run " + kData + "/jc_small.json --out " + out.string()).first, 0);
  EXPECT_TRUE(fs::exists(out / "pn.csv"));
  // enforced tolerance that cannot hold: the low-field variance gap
  EXPECT_EQ(shell(kCli + " run fig2b_low --out " + scratch("cli_fail").string()).first, 3);
}
