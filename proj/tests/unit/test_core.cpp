#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "cqsim/csv.hpp"
#include "cqsim/errors.hpp"
#include "cqsim/geo.hpp"
#include "cqsim/rng.hpp"
#include "support.hpp"

using namespace cqsim;

TEST_CASE("derived streams are reproducible and distinct") {
  auto a = Rng::derive(7, "schedule", 1, 2);
  auto b = Rng::derive(7, "schedule", 1, 2);
  auto c = Rng::derive(7, "schedule", 1, 3);
  auto d = Rng::derive(7, "conditions", 1, 2);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
  }
}

TEST_CASE("below stays in range and covers it evenly") {
  Rng rng(3);
  std::vector<std::uint64_t> counts(7, 0);
  for (int i = 0; i < 70'000; ++i) {
    const auto v = rng.below(7);
    REQUIRE(v < 7);
    ++counts[v];
  }
  CHECK(testing::chi_square_uniform(counts) < testing::chi_square_critical_99(6));
}

TEST_CASE("normal and truncated normal moments") {
  Rng rng(11);
  double sum = 0, sq = 0;
  const int n = 200'000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(5.0, 2.0);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(5.0).epsilon(0.01));
  CHECK(std::sqrt(sq / n - mean * mean) == doctest::Approx(2.0).epsilon(0.01));

  for (int i = 0; i < 10'000; ++i) {
    const double x = rng.truncated_normal(0.15, 0.075, 0.0, 0.30);
    REQUIRE(x >= 0.0);
    REQUIRE(x <= 0.30);
  }
  // no mass inside the interval: clamped, never out of range
  const double far = rng.truncated_normal(100.0, 0.001, 0.0, 1.0);
  CHECK(far >= 0.0);
  CHECK(far <= 1.0);
}

TEST_CASE("weighted pick follows the weights") {
  Rng rng(5);
  const std::vector<double> w{0.1, 0.0, 0.6, 0.3};
  std::vector<int> counts(4, 0);
  const int n = 100'000;
  for (int i = 0; i < n; ++i) ++counts[rng.weighted(w)];
  CHECK(counts[1] == 0);
  CHECK(counts[0] / double(n) == doctest::Approx(0.1).epsilon(0.05));
  CHECK(counts[2] / double(n) == doctest::Approx(0.6).epsilon(0.02));
  CHECK(counts[3] / double(n) == doctest::Approx(0.3).epsilon(0.03));
}

TEST_CASE("haversine known distances") {
  CHECK(haversine_m(kDefaultCenter, kDefaultCenter) == 0.0);
  // one degree of latitude on a 6,371 km sphere
  const double one_degree = kEarthRadiusM * std::numbers::pi / 180.0;
  CHECK(haversine_m({0, 0}, {1, 0}) == doctest::Approx(one_degree).epsilon(1e-9));
  CHECK(haversine_m({0, 0}, {0, 1}) == doctest::Approx(one_degree).epsilon(1e-9));
  const GeoPoint a{-37.8183, 144.9671}, b{-37.8136, 144.9631};
  CHECK(haversine_m(a, b) == doctest::Approx(haversine_m(b, a)));
}

TEST_CASE("destination point lands at the requested distance") {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double d = rng.uniform(0.0, 5000.0);
    const double bearing = rng.uniform(0.0, 2 * std::numbers::pi);
    const auto p = destination_point(kDefaultCenter, d, bearing);
    CHECK(haversine_m(kDefaultCenter, p) == doctest::Approx(d).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("origin sampling") {
  Rng rng(1);
  SUBCASE("radius 0 returns the center") { CHECK(sample_origin(kDefaultCenter, 0.0, rng) == kDefaultCenter); }
  SUBCASE("negative radius rejected") {
    CHECK_THROWS_AS(sample_origin(kDefaultCenter, -1.0, rng), Error);
  }
  SUBCASE("uniform over the disk") {
    const int n = 20'000;
    int inside_half = 0;
    std::vector<std::uint64_t> sectors(8, 0);
    for (int i = 0; i < n; ++i) {
      const auto p = sample_origin(kDefaultCenter, 2000.0, rng);
      const double d = haversine_m(kDefaultCenter, p);
      REQUIRE(d <= 2000.0);
      if (d <= 1000.0) ++inside_half;
      const double east = (p.lng - kDefaultCenter.lng) * std::cos(kDefaultCenter.lat * std::numbers::pi / 180.0);
      const double angle = std::atan2(east, p.lat - kDefaultCenter.lat) + std::numbers::pi;
      ++sectors[std::min<std::size_t>(7, static_cast<std::size_t>(angle / (2 * std::numbers::pi) * 8))];
    }
    CHECK(inside_half / double(n) == doctest::Approx(0.25).epsilon(0.08));
    CHECK(testing::chi_square_uniform(sectors) < testing::chi_square_critical_99(7));
  }
}

TEST_CASE("csv escaping is lossless") {
  const std::vector<std::string> row{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  std::ostringstream out;
  csv::write_row(out, row);
  csv::write_row(out, {"a", "b"});
  std::istringstream in(out.str());
  csv::Reader reader(in);
  auto first = reader.next_row();
  REQUIRE(first);
  CHECK(*first == row);
  auto second = reader.next_row();
  REQUIRE(second);
  CHECK(reader.line() == 3);
  CHECK(!reader.next_row());
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,b") == "\"a,b\"");
  CHECK(csv::escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("format_double round-trips") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-1e6, 1e6);
    CHECK(std::stod(csv::format_double(x)) == x);
  }
  CHECK(csv::format_double(16.0) == "16");
  CHECK(csv::format_double(0.1) == "0.1");
}
