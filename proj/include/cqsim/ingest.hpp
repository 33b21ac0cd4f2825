#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cqsim/geo.hpp"

namespace cqsim {

inline constexpr int kDaysPerWeek = 7;
inline constexpr int kHoursPerDay = 24;
inline constexpr int kSecondsPerDay = 86'400;
inline constexpr int kSecondsPerWeek = 7 * kSecondsPerDay;

/// Day 0 is Monday.
inline constexpr std::array<std::string_view, 7> kDayNames = {
    "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"};

/// (day, hour) matrix of relative values in [0, 100].
using WeekMatrix = std::array<std::array<int, kHoursPerDay>, kDaysPerWeek>;

/// Prince's Bridge, Melbourne.
inline constexpr GeoPoint kDefaultCenter{-37.8183, 144.9671};

struct PopularityProfile {
  std::string place_id;
  std::string name;
  GeoPoint location;
  double min_time = 0.0;  // minutes
  double max_time = 0.0;  // minutes
  WeekMatrix rp{};

  friend bool operator==(const PopularityProfile&, const PopularityProfile&) = default;
};

struct OpeningWindow {
  int open_sec = 0;
  int close_sec = 0;  // exclusive; 86400 means midnight at the end of the day

  friend bool operator==(const OpeningWindow&, const OpeningWindow&) = default;
};

struct CarPark {
  std::string carpark_id;
  std::string name;
  GeoPoint location;
  std::array<std::vector<OpeningWindow>, kDaysPerWeek> opening;
  int capacity = 0;
  double price_per_hour = 0.0;
  double rating = 0.0;
  double max_height = 0.0;

  bool is_open(int day, int second_of_day) const noexcept;

  friend bool operator==(const CarPark&, const CarPark&) = default;
};

struct VehicleSpec {
  std::string vin;
  double height = 0.0;  // meters
  double length = 0.0;
  double width = 0.0;

  friend bool operator==(const VehicleSpec&, const VehicleSpec&) = default;
};

struct DatasetBundle {
  std::vector<PopularityProfile> places;
  std::vector<CarPark> carparks;
  std::vector<VehicleSpec> vehicles;
  GeoPoint center = kDefaultCenter;
  std::optional<WeekMatrix> traffic;

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

struct IngestConfig {
  GeoPoint center = kDefaultCenter;
  std::optional<std::filesystem::path> traffic_path;
};

/// Loads and validates the three mandatory datasets plus the optional
/// traffic matrix. Throws Error{MissingFile, SchemaViolation, InvariantViolation}.
DatasetBundle load_datasets(const std::filesystem::path& places_path,
                            const std::filesystem::path& carparks_path,
                            const std::filesystem::path& vehicles_path,
                            const IngestConfig& config = {});

void validate(const DatasetBundle& bundle);

void write_places(const std::filesystem::path& path, const std::vector<PopularityProfile>& places);
void write_carparks(const std::filesystem::path& path, const std::vector<CarPark>& carparks);
void write_vehicles(const std::filesystem::path& path, const std::vector<VehicleSpec>& vehicles);
void write_week_matrix(const std::filesystem::path& path, const WeekMatrix& matrix);
WeekMatrix read_week_matrix(const std::filesystem::path& path);

/// Parses one carparks-file opening cell: `closed` or `HH:MM-HH:MM[;HH:MM-HH:MM]`.
std::vector<OpeningWindow> parse_opening(std::string_view cell);
std::string format_opening(const std::vector<OpeningWindow>& windows);

struct FixtureSpec {
  std::uint64_t seed = 1;
  int n_places = 10;
  int n_carparks = 20;
  int n_vehicles = 50;
  GeoPoint center = kDefaultCenter;
  double radius_m = 2000.0;
};

/// File names written by bootstrap_fixtures inside the output directory.
struct FixturePaths {
  std::filesystem::path places;
  std::filesystem::path carparks;
  std::filesystem::path vehicles;
  std::filesystem::path meta;

  static FixturePaths in(const std::filesystem::path& dir);
};

/// Builds a synthetic bundle from the seed alone (no I/O).
DatasetBundle make_fixtures(const FixtureSpec& spec);

/// make_fixtures + writes the files into `out_dir`. Throws Error{IOError}.
DatasetBundle bootstrap_fixtures(const FixtureSpec& spec, const std::filesystem::path& out_dir);

}  // namespace cqsim
