#include <doctest.h>

#include "cqsim/errors.hpp"
#include "cqsim/ingest.hpp"
#include "support.hpp"

using namespace cqsim;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

const char* kFlindersStreet = R"([{
  "place_id": "FST", "name": "Flinders Street Station",
  "lat": -37.8183, "lng": 144.9671, "min_time": 15, "max_time": 45,
  "populartimes": {
    "Monday": [9,1,0,0,0,8,19,31,39,40,37,36,41,50,60,68,72,71,65,55,43,30,19,11],
    "Tuesday": [4,0,0,0,0,8,24,40,49,45,36,32,37,49,63,74,81,82,76,65,51,37,24,13],
    "Wednesday": [6,1,0,0,3,11,22,34,44,48,47,41,36,41,57,80,97,97,79,54,40,42,41,24],
    "Thursday": [5,0,0,0,3,12,23,35,45,49,47,42,39,46,63,85,100,98,81,59,47,47,44,27],
    "Friday": [9,0,0,0,5,10,19,28,37,41,41,39,38,44,57,73,85,85,75,63,56,55,54,48],
    "Saturday": [35,21,9,4,4,5,8,15,23,32,42,51,58,63,67,74,82,86,80,70,65,66,68,63],
    "Sunday": [50,33,18,8,1,5,9,14,20,26,33,42,52,62,70,73,70,62,53,48,46,44,36,22]
  }
}])";

const char* kCarparks =
    "carpark_id,name,lat,lng,capacity,price_per_hour,rating,max_height,opening_mon,opening_tue,"
    "opening_wed,opening_thu,opening_fri,opening_sat,opening_sun\n"
    "C1,\"Flinders Lane, Level 2\",-37.8170,144.9660,300,12.5,4.1,2.1,"
    "06:00-24:00,06:00-24:00,06:00-24:00,06:00-24:00,06:00-24:00,08:00-12:00;13:00-18:00,closed\n";

const char* kVehicles = "vin,height,length,width\n13UNVER82367G4,1.520,4.650,1.810\n";

struct Files {
  TempDir dir;
  fs::path places = dir / "places.json";
  fs::path carparks = dir / "carparks.csv";
  fs::path vehicles = dir / "vehicles.csv";
  Files() {
    testing::spit(places, kFlindersStreet);
    testing::spit(carparks, kCarparks);
    testing::spit(vehicles, kVehicles);
  }
};

}  // namespace

TEST_CASE("Flinders Street popularity record loads with Monday first") {
  Files f;
  const auto b = load_datasets(f.places, f.carparks, f.vehicles);
  REQUIRE(b.places.size() == 1);
  const auto& fst = b.places[0];
  CHECK(fst.name == "Flinders Street Station");
  CHECK(fst.rp[0][0] == 9);
  CHECK(fst.rp[0][17] == 71);
  CHECK(fst.rp[3][16] == 100);
  CHECK(fst.rp[6][0] == 50);
  REQUIRE(b.carparks.size() == 1);
  CHECK(b.carparks[0].name == "Flinders Lane, Level 2");
  CHECK(b.carparks[0].is_open(0, 23 * 3600 + 59 * 60));
  CHECK(b.carparks[0].is_open(5, 12 * 3600 + 30 * 60) == false);
  CHECK(b.carparks[0].is_open(5, 13 * 3600));
  CHECK(b.carparks[0].is_open(6, 12 * 3600) == false);
  CHECK(b.vehicles[0].vin == "13UNVER82367G4");
  CHECK(!b.traffic);
}

TEST_CASE("constant popularity matrix round-trips") {
  TempDir dir;
  DatasetBundle b;
  b.places.push_back(testing::flat_place("P1", "Half Full", 50));
  b.carparks.push_back(testing::always_open("C1", kDefaultCenter));
  b.vehicles.push_back(testing::vehicle("VIN0000000000001"));
  write_places(dir / "p.json", b.places);
  write_carparks(dir / "c.csv", b.carparks);
  write_vehicles(dir / "v.csv", b.vehicles);
  const auto back = load_datasets(dir / "p.json", dir / "c.csv", dir / "v.csv");
  REQUIRE(back.places.size() == 1);
  for (const auto& day : back.places[0].rp)
    for (int v : day) CHECK(v == 50);
  CHECK(back == b);
}

TEST_CASE("load errors name the problem") {
  Files f;
  SUBCASE("empty vehicles file") {
    testing::spit(f.vehicles, "");
    CHECK_THROWS_WITH_AS(load_datasets(f.places, f.carparks, f.vehicles), doctest::Contains("vehicles"), Error);
    try {
      load_datasets(f.places, f.carparks, f.vehicles);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SchemaViolation);
    }
  }
  SUBCASE("header only vehicles file") {
    testing::spit(f.vehicles, "vin,height,length,width\n");
    CHECK_THROWS_AS(load_datasets(f.places, f.carparks, f.vehicles), Error);
  }
  SUBCASE("missing file") {
    try {
      load_datasets(f.dir / "nope.json", f.carparks, f.vehicles);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MissingFile);
    }
  }
  SUBCASE("rp outside 0..100") {
    std::string text = kFlindersStreet;
    text.replace(text.find("[9,1,"), 5, "[120,1,");
    testing::spit(f.places, text);
    try {
      load_datasets(f.places, f.carparks, f.vehicles);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvariantViolation);
      CHECK(std::string(e.what()).find("FST") != std::string::npos);
    }
  }
  SUBCASE("short day array") {
    std::string text = kFlindersStreet;
    text.replace(text.find("50,33,18,"), 9, "");
    testing::spit(f.places, text);
    CHECK_THROWS_AS(load_datasets(f.places, f.carparks, f.vehicles), Error);
  }
  SUBCASE("bad opening cell") {
    std::string text = kCarparks;
    text.replace(text.find("closed"), 6, "25:00-26:00");
    testing::spit(f.carparks, text);
    CHECK_THROWS_WITH_AS(load_datasets(f.places, f.carparks, f.vehicles), doctest::Contains("C1"), Error);
  }
}

TEST_CASE("opening cells") {
  CHECK(parse_opening("closed").empty());
  const auto w = parse_opening("06:00-12:00;13:30-24:00");
  REQUIRE(w.size() == 2);
  CHECK(w[0].open_sec == 6 * 3600);
  CHECK(w[1].close_sec == kSecondsPerDay);
  CHECK(format_opening(w) == "06:00-12:00;13:30-24:00");
  CHECK(format_opening({}) == "closed");
  CHECK_THROWS_AS(parse_opening("12:00-06:00"), Error);
  CHECK_THROWS_AS(parse_opening("noon"), Error);
}

TEST_CASE("bootstrap fixtures") {
  const FixtureSpec spec{1, 3, 5, 10, kDefaultCenter, 2000.0};
  TempDir a, b;
  const auto bundle = bootstrap_fixtures(spec, a.path());
  bootstrap_fixtures(spec, b.path());

  SUBCASE("byte-identical across runs") {
    const auto pa = FixturePaths::in(a.path()), pb = FixturePaths::in(b.path());
    CHECK(testing::slurp(pa.places) == testing::slurp(pb.places));
    CHECK(testing::slurp(pa.carparks) == testing::slurp(pb.carparks));
    CHECK(testing::slurp(pa.vehicles) == testing::slurp(pb.vehicles));
    CHECK(testing::slurp(pa.meta) == testing::slurp(pb.meta));
  }
  SUBCASE("seed changes the popularity") {
    auto other = spec;
    other.seed = 2;
    const auto b2 = make_fixtures(other);
    CHECK(b2.places[0].rp != bundle.places[0].rp);
  }
  SUBCASE("reload is structurally identical") {
    const auto p = FixturePaths::in(a.path());
    CHECK(load_datasets(p.places, p.carparks, p.vehicles) == bundle);
  }
  SUBCASE("cells and locations within bounds") {
    for (const auto& place : bundle.places) {
      int peak = 0;
      for (const auto& day : place.rp)
        for (int v : day) {
          CHECK(v >= 0);
          CHECK(v <= 100);
          peak = std::max(peak, v);
        }
      CHECK(peak == 100);
      CHECK(haversine_m(spec.center, place.location) <= spec.radius_m);
      CHECK(place.min_time >= 30.0);
      CHECK(place.max_time <= 240.0);
      CHECK(place.min_time <= place.max_time);
    }
    for (const auto& c : bundle.carparks) CHECK(haversine_m(spec.center, c.location) <= spec.radius_m);
    CHECK(bundle.places.size() == 3);
    CHECK(bundle.carparks.size() == 5);
    CHECK(bundle.vehicles.size() == 10);
  }
}

TEST_CASE("fixture names survive CSV and JSON quoting") {
  const FixtureSpec spec{4, 30, 40, 5, kDefaultCenter, 2000.0};
  TempDir dir;
  const auto bundle = bootstrap_fixtures(spec, dir.path());
  const auto p = FixturePaths::in(dir.path());
  const auto back = load_datasets(p.places, p.carparks, p.vehicles);
  CHECK(back == bundle);
  bool comma = false, quote = false;
  for (const auto& place : back.places) {
    comma |= place.name.find(',') != std::string::npos;
    quote |= place.name.find('"') != std::string::npos;
  }
  CHECK(comma);
  CHECK(quote);
}

TEST_CASE("traffic matrix round-trips") {
  TempDir dir;
  WeekMatrix m{};
  for (int d = 0; d < 7; ++d)
    for (int h = 0; h < 24; ++h) m[d][h] = d * 10 + h;
  write_week_matrix(dir / "traffic.csv", m);
  CHECK(read_week_matrix(dir / "traffic.csv") == m);
}
