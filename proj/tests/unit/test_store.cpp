#include <doctest.h>

#include <functional>
#include <set>

#include "cqsim/errors.hpp"
#include "cqsim/store.hpp"
#include "support.hpp"

using namespace cqsim;
using testing::TempDir;

namespace {

TemplateRecord record(std::uint64_t id, int day, int hour, int minute, int second) {
  TemplateRecord r;
  r.id = id;
  r.origin = kDefaultCenter;
  r.address = "Flinders Street Station";
  r.day = day;
  r.hour = hour;
  r.minute = minute;
  r.second = second;
  r.vin = "13UNVER82367G4";
  r.query_id = "available-slots";
  r.consumer_id = id;
  r.profile_no = 13;
  return r;
}

std::vector<TemplateRecord> fixture_templates(std::uint64_t seed = 5) {
  const auto b = make_fixtures({seed, 3, 6, 10, kDefaultCenter, 2000.0});
  GenerationConfig c;
  c.seed = seed;
  c.volume.alpha = 1.0;
  return generate(b, c).templates;
}

}  // namespace

TEST_CASE("persist and reopen") {
  TempDir dir;
  auto templates = fixture_templates();
  PersistOptions opt;
  opt.seed = 5;
  opt.created_at = 1234;
  opt.config_digest = "abc";
  const auto store = persist(templates, dir.path(), opt);
  const auto back = TemplateStore::open(dir.path());
  REQUIRE(back.size() == templates.size());
  CHECK(back.manifest().record_count == templates.size());
  CHECK(back.manifest().created_at == 1234);
  CHECK(back.manifest().config_digest == "abc");
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back.records()[i] == store.records()[i]);
  std::set<std::uint64_t> ids;
  for (const auto& r : back.records()) ids.insert(r.id);
  CHECK(ids.size() == templates.size());
  for (std::size_t i = 1; i < back.size(); ++i) {
    const auto& a = back.records()[i - 1];
    const auto& b = back.records()[i];
    CHECK(std::make_pair(a.week_second(), a.id) < std::make_pair(b.week_second(), b.id));
  }
  REQUIRE(back.find(templates.front().id));
  CHECK(*back.find(templates.front().id) == templates.front());
  CHECK(back.find(999'999'999) == nullptr);
}

TEST_CASE("empty store") {
  TempDir dir;
  persist({}, dir.path(), {});
  const auto s = TemplateStore::open(dir.path());
  CHECK(s.size() == 0);
  CHECK(s.fetch_window(0, 0, 600).empty());
}

TEST_CASE("store rejects inconsistent input") {
  TempDir dir;
  CHECK_THROWS_AS(persist({record(1, 0, 0, 0, 0), record(1, 3, 0, 0, 0)}, dir.path(), {}), Error);
  auto bad = record(2, 0, 0, 0, 0);
  bad.vin.clear();
  CHECK_THROWS_AS(persist({bad}, dir.path(), {}), Error);
  CHECK_THROWS_AS(TemplateStore::open(dir / "missing"), Error);
  persist({record(1, 0, 0, 0, 0)}, dir.path(), {});
  testing::spit(dir / "templates.ndjson", "{\"_id\": 1}\n");
  CHECK_THROWS_AS(TemplateStore::open(dir.path()), Error);
}

TEST_CASE("fetch window around 10:08:20") {
  const std::vector<TemplateRecord> recs{record(1, 0, 9, 59, 59), record(2, 0, 10, 0, 0), record(3, 0, 10, 8, 20),
                                         record(4, 0, 10, 9, 59), record(5, 0, 10, 10, 0), record(6, 1, 10, 8, 20)};
  StoreManifest m;
  m.record_count = recs.size();
  const TemplateStore store(m, recs);
  const auto w = store.fetch_window(0, 10 * 3600, 600);
  REQUIRE(w.size() == 3);
  CHECK(w[0].id == 2);
  CHECK(w[1].id == 3);
  CHECK(w[2].id == 4);
  CHECK(store.fetch_window(0, 0, kSecondsPerDay).size() == 5);
  CHECK(store.fetch_window(0, 86'000, 10'000).size() == 0);  // clipped at midnight
  CHECK(store.fetch_window(1, 0, kSecondsPerDay).size() == 1);
  CHECK_THROWS_AS(store.fetch_window(7, 0, 600), Error);
  CHECK_THROWS_AS(store.fetch_window(0, 0, 0), Error);
}

TEST_CASE("windows partition the week for any window dividing the day") {
  TempDir dir;
  const auto store = persist(fixture_templates(6), dir.path(), {});
  for (int window : {600, 60, 3600, 7200, 86'400}) {
    std::set<std::uint64_t> seen;
    std::size_t total = 0;
    for (int day = 0; day < 7; ++day) {
      for (int start = 0; start < kSecondsPerDay; start += window) {
        const auto batch = store.fetch_window(day, start, window);
        for (std::size_t i = 0; i < batch.size(); ++i) {
          const auto& r = batch[i];
          CHECK(r.day == day);
          CHECK(r.second_of_day() >= start);
          CHECK(r.second_of_day() < start + window);
          if (i) CHECK(batch[i - 1].week_second() <= r.week_second());
          seen.insert(r.id);
        }
        total += batch.size();
      }
    }
    CHECK(total == store.size());
    CHECK(seen.size() == store.size());
  }
}

TEST_CASE("digests") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto b = make_fixtures({1, 2, 3, 4, kDefaultCenter, 2000.0});
  const GenerationConfig base;
  const auto base_digest = config_digest(base, b);
  CHECK(config_digest(base, b) == base_digest);

  std::vector<std::function<void(GenerationConfig&)>> mutations{
      [](auto& c) { c.volume.alpha = 11; },
      [](auto& c) { c.volume.p_query = 0.9; },
      [](auto& c) { c.volume.alpha_at[{"P001", 3}] = 2; },
      [](auto& c) { c.volume.p_query_at[{"P001", 3}] = 0.5; },
      [](auto& c) { c.origin_center.lat += 0.001; },
      [](auto& c) { c.origin_radius_m = 1500; },
      [](auto& c) { c.cond_probs.rating = 0.4; },
      [](auto& c) { c.cond_probs.price = 0.7; },
      [](auto& c) { c.cond_probs.duration = 0.1; },
      [](auto& c) { c.vehicle_mod_fraction = 0.4; },
      [](auto& c) { c.per_param_mod_prob = 0.4; },
      [](auto& c) { c.max_mod.height_m = 0.2; },
      [](auto& c) { c.price_categories = {0.2, 0.6, 0.1, 0.1}; },
      [](auto& c) { c.onstreet_price.mean = 21; },
      [](auto& c) { c.rush_windows = std::vector<HourWindow>{{6, 9}}; },
      [](auto& c) { c.distance_factor_probs = {0.5, 0.25, 0.25}; },
      [](auto& c) { c.spans.verbatim_row5 = true; },
      [](auto& c) { c.spans.use_paper_table = false; },
      [](auto& c) { c.k_min = 3; },
      [](auto& c) { c.query_id = "other"; },
      [](auto& c) { c.seed = 2; },
  };
  std::set<std::string> digests{base_digest};
  for (const auto& mutate : mutations) {
    GenerationConfig c;
    mutate(c);
    digests.insert(config_digest(c, b));
  }
  CHECK(digests.size() == mutations.size() + 1);

  GenerationConfig threaded;
  threaded.threads = 8;
  CHECK(config_digest(threaded, b) == base_digest);

  auto b2 = b;
  b2.vehicles[0].height += 0.001;
  CHECK(dataset_digest(b2) != dataset_digest(b));
  CHECK(config_digest(base, b2) != base_digest);
}

TEST_CASE("csv export") {
  TempDir dir;
  auto r1 = record(1, 0, 10, 8, 20);
  r1.address = "Chinatown, \"Little Bourke\" St";
  r1.rating = 4.5;
  r1.distance = 137.25;
  auto r2 = record(2, 6, 23, 59, 59);
  r2.price = 16.0;
  r2.expected_time = 120.0;
  const auto store = persist({r1, r2}, dir / "store", {});
  const auto csv_path = dir / "out.csv";
  CHECK(export_csv(store, csv_path) == store.manifest().record_count);

  const auto text = testing::slurp(csv_path);
  const std::string header(kCsvHeader);
  CHECK(text.compare(0, header.size() + 1, header + "\n") == 0);
  // null price cell is empty: ...,distance,expected_time,price,rating,...
  CHECK(text.find(",137.25,,,4.5,13UNVER82367G4,available-slots") != std::string::npos);

  const auto back = import_csv(csv_path);
  REQUIRE(back.size() == 2);
  CHECK(same_published_fields(back[0], store.records()[0]));
  CHECK(same_published_fields(back[1], store.records()[1]));
  CHECK(back[0].address == r1.address);
  CHECK(!back[0].price);
  CHECK(*back[1].price == 16.0);

  auto changed = back[1];
  changed.rating = 1.0;
  CHECK(!same_published_fields(changed, store.records()[1]));

  testing::spit(dir / "bad.csv", "_id,location.lng,location.lat\n");
  CHECK_THROWS_AS(import_csv(dir / "bad.csv"), Error);
}

TEST_CASE("csv round trip of a generated store") {
  TempDir dir;
  const auto store = persist(fixture_templates(8), dir / "store", {});
  REQUIRE(export_csv(store, dir / "all.csv") == store.size());
  const auto back = import_csv(dir / "all.csv");
  REQUIRE(back.size() == store.size());
  for (std::size_t i = 0; i < back.size(); ++i) REQUIRE(same_published_fields(back[i], store.records()[i]));
}
