#include <gtest/gtest.h>

#include <zlib.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "cdnlog/errors.hpp"
#include "cdnlog/io.hpp"
#include "cdnlog/pipeline.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cdnlog;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class Workdir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cdnlog_pipe_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name, std::ios::binary) << text;
    return dir_ / name;
  }
  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }
  std::string sample_log() const {
    std::string s;
    for (auto l : fixtures::kSampleLines) (s += l) += "\n";
    return s;
  }
  // Runs the CLI, returning its exit status.
  int cli(const std::string& args) {
    const char* exe = std::getenv("CDNLOG_CLI");
    if (exe == nullptr) return -1;
    std::string cmd = std::string(exe) + " " + args + " >" + (dir_ / "stdout.txt").string() + " 2>" +
                      (dir_ / "stderr.txt").string();
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Workdir, BatchReaderMatchesLineReader) {
  std::string big(5 << 20, 'x');
  std::vector<std::string> texts = {"", "a\n", "a", "a\r\nb\r\n\nc", "\n\n", "a\n" + big + "\nb\n" + big};
  for (std::size_t i = 0; i < texts.size(); ++i) {
    fs::path p = write("r" + std::to_string(i), texts[i]);
    std::vector<std::string> expected, got;
    {
      LineReader r(p);
      std::string_view line;
      while (r.next(line)) expected.emplace_back(line);
    }
    LineReader r(p);
    std::vector<std::string_view> batch;
    while (r.next_batch(batch)) got.insert(got.end(), batch.begin(), batch.end());
    EXPECT_EQ(got, expected) << "case " << i;
    EXPECT_EQ(r.line_number(), expected.size());
  }
}

TEST_F(Workdir, CleanSampleLines) {
  auto in = write("in.log", sample_log());
  auto summary = json::parse(cmd_clean({in}, dir_ / "out"));
  EXPECT_EQ(summary["accepted"], 2);
  EXPECT_EQ(summary["rejected"], 2);
  std::string out = read(dir_ / "out" / "clean.log");
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 2);
  EXPECT_EQ(out.substr(0, out.find('\n')), fixtures::kCanonicalLine);
  EXPECT_EQ(json::parse(read(dir_ / "out" / "clean_stats.json")), summary);
  EXPECT_FALSE(fs::exists(dir_ / "out" / "clean.log.partial"));
}

TEST_F(Workdir, CleanGzipMatchesPlain) {
  oracle::Rng rng(31);
  std::string text;
  for (int i = 0; i < 3000; ++i) {
    (text += format_record(oracle::random_record(rng))) += "\n";
    if (i % 100 == 0) text += "garbage line\n";
  }
  auto plain = write("a.log", text);
  gzFile gz = gzopen((dir_ / "a.log.gz").c_str(), "wb");
  gzwrite(gz, text.data(), static_cast<unsigned>(text.size()));
  gzclose(gz);
  cmd_clean({plain}, dir_ / "p");
  cmd_clean({dir_ / "a.log.gz"}, dir_ / "g", {4});
  EXPECT_EQ(read(dir_ / "p" / "clean.log"), read(dir_ / "g" / "clean.log"));
  auto stats = json::parse(read(dir_ / "g" / "clean_stats.json"));
  EXPECT_EQ(stats["rejected"], 30);
  EXPECT_EQ(stats["accepted"], 3000);
}

TEST_F(Workdir, ClassifyThenReport) {
  std::string log =
      "0.1, 1.1.1.1, MISS, [03/Dec/2018:20:00:00 +0700], /vod/a.dash, 100\n"
      "0.2, 1.1.1.2, HIT, [03/Dec/2018:20:10:00 +0700], /vod/a.dash, 100\n"
      "0.3, 1.1.1.3, HIT1, [03/Dec/2018:20:20:00 +0700], /live/tv/ch1.ts, 50\n"
      "0.4, 1.1.1.4, HIT, [03/Dec/2018:21:00:00 +0700], /img/logo.png, 10\n";
  auto in = write("in.log", log);
  auto cls = json::parse(cmd_classify({in}, {}, dir_ / "c"));
  EXPECT_EQ(cls["records"], 4);
  EXPECT_EQ(cls["miss_set_size"], 1);
  std::string labeled = read(dir_ / "c" / "labeled.csv");
  EXPECT_EQ(labeled.substr(0, labeled.find('\n')), kLabeledHeader);

  RunConfig cfg;
  cfg.report.groups = {GroupKey::All, GroupKey::Service, GroupKey::Hour};
  auto from_log = build_report({in}, cfg);
  auto from_csv = build_report({dir_ / "c" / "labeled.csv"}, cfg);
  EXPECT_EQ(from_log, from_csv);
  EXPECT_EQ(from_log.records, 4u);
  const auto& all = from_log.hit_rates.at(GroupKey::All).at("all");
  EXPECT_DOUBLE_EQ(*all.edge_rate, 0.5);
  EXPECT_DOUBLE_EQ(*all.regional_rate, 0.5);
  EXPECT_EQ(from_log.time_series.size(), 2u);

  cmd_report({in}, cfg, {true}, dir_ / "r");
  for (const char* f : {"report.json", "hit_rates.csv", "latency.csv", "time_series.csv", "mime.csv", "sizes.csv",
                        "class_counts.csv", "plot/requests_by_hour.csv", "plot/mime_fractions.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "r" / f)) << f;
  }
  json parsed;
  EXPECT_NO_THROW(parsed = json::parse(read(dir_ / "r" / "report.json")));
}

TEST_F(Workdir, ReportRejectsMixedInputs) {
  auto log = write("in.log", std::string(fixtures::kCanonicalLine) + "\n");
  cmd_classify({log}, {}, dir_ / "c");
  EXPECT_THROW(build_report({log, dir_ / "c" / "labeled.csv"}, RunConfig{}), InputError);
  auto ev = write("ev.csv", std::string(kEventCsvHeader) + "\n0,1.2.3.4,/a,1,vod,0\n");
  EXPECT_THROW(build_report({ev}, RunConfig{}), InputError);
}

TEST_F(Workdir, EmptyReport) {
  auto in = write("empty.log", "");
  auto r = build_report({in}, RunConfig{});
  EXPECT_EQ(r.records, 0u);
  EXPECT_FALSE(r.hit_rates.at(GroupKey::All).count("all") && r.hit_rates.at(GroupKey::All).at("all").edge_rate);
  EXPECT_NO_THROW(cmd_report({in}, RunConfig{}, {true}, dir_ / "r"));
}

TEST_F(Workdir, EnrichWithTableAndCache) {
  std::string log =
      "0.1, 118.68.1.1, MISS, [03/Dec/2018:20:00:00 +0700], /a.ts, 1\n"
      "0.1, 118.68.1.1, HIT, [03/Dec/2018:20:00:01 +0700], /a.ts, 1\n"
      "0.1, 9.9.9.9, HIT, [03/Dec/2018:20:00:02 +0700], /a.ts, 1\n";
  auto in = write("in.log", log);
  cmd_classify({in}, {}, dir_ / "c");
  GeoConfig geo;
  geo.table = write("geo.csv", "cidr,isp,province,country\n118.68.0.0/15,FPT,HCMC,Vietnam\n");
  geo.synonyms = write("syn.csv", "HCMC,Ho Chi Minh\n");
  auto s1 = json::parse(cmd_enrich({dir_ / "c" / "labeled.csv"}, geo, dir_ / "cache.csv", dir_ / "e"));
  EXPECT_EQ(s1["resolver_calls"], 2);
  std::string enriched = read(dir_ / "e" / "enriched.csv");
  EXPECT_NE(enriched.find("FPT,Ho Chi Minh,Vietnam"), std::string::npos);
  auto s2 = json::parse(cmd_enrich({dir_ / "c" / "labeled.csv"}, geo, dir_ / "cache.csv", dir_ / "e2"));
  EXPECT_EQ(s2["resolver_calls"], 0);
  EXPECT_EQ(read(dir_ / "e" / "enriched.csv"), read(dir_ / "e2" / "enriched.csv"));

  RunConfig cfg;
  cfg.report.groups = {GroupKey::Isp, GroupKey::Province};
  auto r = build_report({dir_ / "e" / "enriched.csv"}, cfg);
  EXPECT_EQ(r.hit_rates.at(GroupKey::Province).at("Ho Chi Minh").counts.cdn_requests(), 2u);
  EXPECT_EQ(r.hit_rates.at(GroupKey::Isp).at("unknown").counts.cdn_requests(), 1u);
}

TEST_F(Workdir, GenerateSimulateClassifyRecoversLabels) {
  auto wl = WorkloadConfig::defaults();
  wl.requests_per_day = 20000;
  cmd_generate(wl, dir_ / "g");
  RunConfig cfg;
  auto sim = json::parse(cmd_simulate({dir_ / "g" / "events.csv"}, cfg, {}, dir_ / "s"));
  EXPECT_GT(sim["events"].get<int>(), 0);
  cmd_classify({dir_ / "s" / "simulated.log"}, cfg.patterns, dir_ / "c");
  auto ledger = json::parse(read(dir_ / "g" / "ledger.json"));
  auto counts = read(dir_ / "c" / "class_counts.csv");
  EXPECT_NE(counts.find("live,yes," + std::to_string(ledger["class_counts"]["live/yes"].get<std::uint64_t>())),
            std::string::npos)
      << counts;
  // Replaying the simulated log reproduces its statuses.
  auto again = json::parse(cmd_simulate({dir_ / "s" / "simulated.log"}, cfg, {}, dir_ / "s2"));
  EXPECT_EQ(again["agreement"], 1.0);
}

TEST_F(Workdir, SimulateOutOfOrder) {
  auto ev = write("ev.csv", std::string(kEventCsvHeader) + "\n5,1.2.3.4,/a,1,vod,0\n1,1.2.3.4,/b,1,vod,0\n");
  EXPECT_THROW(cmd_simulate({ev}, RunConfig{}, {}, dir_ / "s"), InputError);
  SimulateFlags sorted;
  sorted.sort = true;
  EXPECT_NO_THROW(cmd_simulate({ev}, RunConfig{}, sorted, dir_ / "s"));
}

TEST_F(Workdir, LabeledRowRoundTrip) {
  oracle::Rng rng(32);
  for (int i = 0; i < 2000; ++i) {
    ClassifiedRecord r;
    r.record = oracle::random_record(rng);
    r.service = static_cast<ServiceClass>(rng() % 3);
    r.packaging = static_cast<PackagingClass>(rng() % 2);
    std::string line;
    std::optional<GeoInfo> geo = GeoInfo{"FPT", "Ha, Noi", "say \"x\""};
    append_labeled_row(line, r, i % 2 ? &geo : nullptr);
    ASSERT_EQ(line.back(), '\n');
    line.pop_back();
    auto back = parse_labeled_row(line, i % 2 == 1);
    ASSERT_TRUE(back) << line;
    EXPECT_EQ(back->classified, r);
    if (i % 2) EXPECT_EQ(back->geo, geo);
  }
}

TEST_F(Workdir, CliExitCodes) {
  if (std::getenv("CDNLOG_CLI") == nullptr) GTEST_SKIP() << "CDNLOG_CLI not set";
  auto in = write("in.log", sample_log());
  EXPECT_EQ(cli("clean " + in.string() + " --out " + (dir_ / "o").string()), 0);
  EXPECT_EQ(json::parse(read(dir_ / "stdout.txt"))["rejected"], 2);
  EXPECT_EQ(cli("clean " + (dir_ / "missing.log").string() + " --out " + (dir_ / "o").string()), 1);
  auto bad_cfg = write("bad.json", R"({"topology": {"n_edges": 0}})");
  EXPECT_EQ(cli("simulate " + in.string() + " --config " + bad_cfg.string() + " --out " + (dir_ / "o").string()), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("clean --threads 0 " + in.string()), 2);
  auto empty = write("empty.log", "");
  EXPECT_EQ(cli("report " + empty.string() + " --out " + (dir_ / "r").string()), 0);
  EXPECT_EQ(cli("generate --seed 5 --out " + (dir_ / "g1").string()), 0);
  EXPECT_EQ(cli("generate --seed 5 --out " + (dir_ / "g2").string()), 0);
  EXPECT_EQ(read(dir_ / "g1" / "events.csv"), read(dir_ / "g2" / "events.csv"));
}
