#include <gtest/gtest.h>

#include <set>

#include "cdnlog/classify.hpp"
#include "cdnlog/errors.hpp"
#include "cdnlog/generate.hpp"
#include "support/oracles.hpp"

using namespace cdnlog;

namespace {

LogRecord rec(std::string path, HitStatus s) {
  LogRecord r;
  r.client_ip = *IpAddress::parse("10.0.0.1");
  r.content_path = std::move(path);
  r.status = s;
  return r;
}

}  // namespace

TEST(ClassifyService, Examples) {
  PatternConfig cfg;
  EXPECT_EQ(classify_service("/38f16b08fdbe3d6e2ddd672c7a1543774259/tv/_definst_/dongthap1tv-mid-5803464.ts", cfg),
            ServiceClass::LiveStreaming);
  EXPECT_EQ(classify_service("/movies/ep01/seg-00042.dash", cfg), ServiceClass::VideoOnDemand);
  EXPECT_EQ(classify_service("/img_songs/cover.png", cfg), ServiceClass::Website);
  EXPECT_EQ(classify_service("/live/prod_kplus_pm_hd-audio_vie=56000-video=2499968.m3u8", cfg),
            ServiceClass::LiveStreaming);
}

TEST(ClassifyService, CaseInsensitiveSubstringAndExtension) {
  PatternConfig cfg;
  EXPECT_EQ(classify_service("/LIVE/x.jpg", cfg), ServiceClass::LiveStreaming);
  EXPECT_EQ(classify_service("/channels/VTV3/a.png", cfg), ServiceClass::LiveStreaming);
  EXPECT_EQ(classify_service("/m/a.TS", cfg), ServiceClass::VideoOnDemand);
  EXPECT_EQ(classify_service("/m/a.ts/readme", cfg), ServiceClass::Website);
  EXPECT_EQ(classify_service("/m.dash/readme", cfg), ServiceClass::Website);
  EXPECT_EQ(classify_service("/m/a.ts?x", cfg), ServiceClass::Website);
  cfg.live_patterns.push_back("kplus");
  EXPECT_EQ(classify_service("/vod/kplus.mpd", cfg), ServiceClass::LiveStreaming);
}

TEST(ClassifyService, ExtensionOf) {
  EXPECT_EQ(extension_of("/a/b/C.M3U8"), ".m3u8");
  EXPECT_EQ(extension_of("/a.b/c"), "");
  EXPECT_EQ(extension_of("file.tar.gz"), ".gz");
}

TEST(PatternConfig, Validation) {
  PatternConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.live_patterns.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.streaming_extensions = {"ts"};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.live_patterns = {""};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ContentIdentity, SessionTokenStripIsOptIn) {
  PatternConfig cfg;
  std::string p = "/38f16b08fdbe3d6e2ddd672c7a1543774259/tv/a.ts";
  EXPECT_EQ(content_identity(p, cfg), p);
  cfg.strip_session_token = true;
  EXPECT_EQ(content_identity(p, cfg), "/tv/a.ts");
  EXPECT_EQ(content_identity("/38f16b08fd/a.ts", cfg), "/38f16b08fd/a.ts");
  EXPECT_EQ(content_identity("/38f16b08fdbe3d6e2ddd672c7a154377425z/a.ts", cfg),
            "/38f16b08fdbe3d6e2ddd672c7a154377425z/a.ts");
}

TEST(MissSet, Examples) {
  std::vector<LogRecord> a = {rec("a", HitStatus::Miss), rec("a", HitStatus::Hit)};
  auto s = build_miss_set(a);
  EXPECT_TRUE(s.contains("a"));
  EXPECT_EQ(s.size(), 1u);
  std::vector<LogRecord> b = {rec("b", HitStatus::Hit), rec("b", HitStatus::Hit1), rec("c", HitStatus::Local)};
  EXPECT_EQ(build_miss_set(b).size(), 0u);
}

TEST(MissSet, EqualsGroupByOracle) {
  oracle::Rng rng(21);
  std::vector<LogRecord> records;
  for (int i = 0; i < 10000; ++i) {
    records.push_back(rec("/c" + std::to_string(rng() % 3000), kAllHitStatuses[rng() % 4]));
  }
  std::map<std::string, bool> group;
  for (const auto& r : records) group[r.content_path] = group[r.content_path] || r.status == HitStatus::Miss;
  for (std::size_t threshold : {std::numeric_limits<std::size_t>::max(), std::size_t{10}}) {
    PatternConfig cfg;
    cfg.hash_threshold = threshold;
    auto s = build_miss_set(records, cfg);
    std::size_t expected = 0;
    for (const auto& [path, missed] : group) {
      EXPECT_EQ(s.contains(path), missed) << path;
      expected += missed;
    }
    EXPECT_EQ(s.size(), expected);
    EXPECT_EQ(s.hashed(), threshold == 10);
  }
}

TEST(MissSet, MergeIsUnion) {
  ContentMissSet a, b(2), c;
  a.insert("x");
  b.insert("y");
  b.insert("z");
  b.insert("w");
  ASSERT_TRUE(b.hashed());
  c.insert("x");
  c.insert("q");
  ContentMissSet ab = a;
  ab.merge(b);
  ContentMissSet ac = a;
  ac.merge(c);
  for (auto id : {"x", "y", "z", "w"}) EXPECT_TRUE(ab.contains(id));
  EXPECT_FALSE(ab.contains("q"));
  EXPECT_EQ(ac.size(), 2u);
  EXPECT_FALSE(ac.hashed());
}

TEST(ClassifyPackaging, NoMissMeansPackaged) {
  std::vector<LogRecord> r = {rec("a", HitStatus::Miss), rec("a", HitStatus::Hit), rec("b", HitStatus::Hit),
                              rec("b", HitStatus::Hit1)};
  auto s = build_miss_set(r);
  EXPECT_EQ(classify_packaging("a", s), PackagingClass::NonPackaged);
  EXPECT_EQ(classify_packaging("b", s), PackagingClass::Packaged);
}

TEST(ClassifyPackaging, AddingMissOnlyFlipsThatContent) {
  oracle::Rng rng(4);
  std::vector<LogRecord> records;
  for (int i = 0; i < 3000; ++i) records.push_back(rec("/c" + std::to_string(rng() % 500), kAllHitStatuses[rng() % 4]));
  auto before = classify_stream(records);
  records.push_back(rec("/c7", HitStatus::Miss));
  auto after = classify_stream(records);
  for (std::size_t i = 0; i + 1 < records.size(); ++i) {
    if (records[i].content_path == "/c7") continue;
    EXPECT_EQ(before.records[i].packaging, after.records[i].packaging);
  }
}

TEST(ClassifyStream, OrderIndependentAndPartitioned) {
  oracle::Rng rng(8);
  std::vector<LogRecord> records;
  for (int i = 0; i < 4000; ++i) records.push_back(oracle::random_record(rng));
  auto a = classify_stream(records);
  EXPECT_EQ(a.counts.total(), records.size());
  std::vector<LogRecord> shuffled = records;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto b = classify_stream(shuffled);
  EXPECT_EQ(a.counts, b.counts);
  std::map<std::string, std::pair<ServiceClass, PackagingClass>> labels;
  for (const auto& r : a.records) labels[r.record.content_path] = {r.service, r.packaging};
  for (const auto& r : b.records) {
    auto [svc, pkg] = labels.at(r.record.content_path);
    EXPECT_EQ(r.service, svc);
    EXPECT_EQ(r.packaging, pkg);
  }
}

TEST(ClassifyStream, EmptyAndCsv) {
  auto r = classify_stream(std::vector<LogRecord>{});
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.counts.total(), 0u);
  EXPECT_EQ(r.counts.to_csv(), "service,packaging,count\n");
  ClassCounts c;
  c.add(ServiceClass::LiveStreaming, PackagingClass::NonPackaged, 152697608);
  c.add(ServiceClass::LiveStreaming, PackagingClass::Packaged, 129278868);
  c.add(ServiceClass::VideoOnDemand, PackagingClass::NonPackaged, 2069393);
  c.add(ServiceClass::Website, PackagingClass::NonPackaged, 14301252);
  EXPECT_EQ(c.total(), 298347121u);
  EXPECT_EQ(c.to_csv(),
            "service,packaging,count\nlive,no,152697608\nlive,yes,129278868\nvod,no,2069393\nwebsite,no,14301252\n");
}

TEST(ClassifyStream, GeneratedPathsMatchLedger) {
  WorkloadConfig cfg = WorkloadConfig::defaults();
  cfg.requests_per_day = 20000;
  auto trace = gen_trace(cfg);
  PatternConfig patterns;
  for (const auto& [path, info] : trace.ledger.contents) {
    EXPECT_EQ(classify_service(path, patterns), service_of(info.cls)) << path;
  }
}
