#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cqsim/generator.hpp"
#include "cqsim/ingest.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cqsim") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline cqsim::PopularityProfile flat_place(const std::string& id, const std::string& name, int value,
                                           cqsim::GeoPoint where = cqsim::kDefaultCenter) {
  cqsim::PopularityProfile p;
  p.place_id = id;
  p.name = name;
  p.location = where;
  p.min_time = 60.0;
  p.max_time = 180.0;
  for (auto& day : p.rp) day.fill(value);
  return p;
}

inline cqsim::CarPark always_open(const std::string& id, cqsim::GeoPoint where, int capacity = 100) {
  cqsim::CarPark c;
  c.carpark_id = id;
  c.name = "Car park " + id;
  c.location = where;
  for (auto& d : c.opening) d = {{0, cqsim::kSecondsPerDay}};
  c.capacity = capacity;
  c.price_per_hour = 8.0;
  c.rating = 4.0;
  c.max_height = 2.2;
  return c;
}

inline cqsim::VehicleSpec vehicle(const std::string& vin) { return {vin, 1.5, 4.5, 1.8}; }

/// One place, one car park, one vehicle; rp supplied by the caller.
inline cqsim::DatasetBundle single_place_bundle(const cqsim::WeekMatrix& rp) {
  cqsim::DatasetBundle b;
  auto p = flat_place("P1", "Only Place", 0);
  p.rp = rp;
  b.places.push_back(p);
  b.carparks.push_back(always_open("C1", cqsim::kDefaultCenter));
  b.vehicles.push_back(vehicle("13UNVER82367G4XYZ"));
  return b;
}

// Independent Eq. (2): integer arithmetic when every factor has a short
// decimal form, lround otherwise.
/// Exact decimal arithmetic on inputs read to six places, then half-up.
inline std::uint64_t oracle_query_count(double rp, double alpha, double p_query) {
  constexpr __int128 kScale = 1'000'000;
  const __int128 r = std::llround(rp * 1e6);
  const __int128 a = std::llround(alpha * 1e6);
  const __int128 q = std::llround(p_query * 1e6);
  const __int128 scale3 = kScale * kScale * kScale;
  return static_cast<std::uint64_t>((r * a * q + scale3 / 2) / scale3);
}

inline std::uint64_t oracle_total(const cqsim::DatasetBundle& b, double alpha, double p_query) {
  std::uint64_t total = 0;
  for (const auto& place : b.places)
    for (int d = 0; d < 7; ++d)
      for (int h = 0; h < 24; ++h) total += oracle_query_count(place.rp[d][h], alpha, p_query);
  return total;
}

/// Chi-square statistic of observed counts against a uniform expectation.
inline double chi_square_uniform(const std::vector<std::uint64_t>& counts) {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  const double expected = static_cast<double>(n) / static_cast<double>(counts.size());
  double chi = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi += d * d / expected;
  }
  return chi;
}

/// Upper 1% critical value of chi-square with k degrees of freedom
/// (Wilson-Hilferty approximation).
inline double chi_square_critical_99(double k) {
  const double z = 2.326347874;
  const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * t * t * t;
}

}  // namespace testing
