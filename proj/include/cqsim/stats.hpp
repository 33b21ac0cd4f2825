#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cqsim/ingest.hpp"

namespace cqsim {

// Crowd-to-query volume parameters. Scalar defaults apply unless a
// (place_id, hour-of-day) override exists.
struct QueryVolumeConfig {
  double alpha = 10.0;
  double p_query = 1.0;
  std::map<std::pair<std::string, int>, double> alpha_at;
  std::map<std::pair<std::string, int>, double> p_query_at;

  double alpha_for(const std::string& place_id, int hour) const;
  double p_query_for(const std::string& place_id, int hour) const;

  /// Throws Error{DomainError} naming the offending field.
  void validate() const;
};

/// Queries issued for one (place, hour): round_half_up(rp * alpha * p_query).
std::uint64_t query_count(double rp, double alpha, double p_query);

/// Sum of query_count over every (place, day, hour) of the weekly profile.
std::uint64_t total_query_count(const DatasetBundle& bundle, const QueryVolumeConfig& config);

using DayHourCounts = std::array<std::array<std::uint64_t, kHoursPerDay>, kDaysPerWeek>;

struct CrowdDistributions {
  std::map<std::string, std::uint64_t> by_place;
  std::array<std::uint64_t, kDaysPerWeek> by_day{};
  std::map<std::string, std::array<std::uint64_t, kDaysPerWeek>> by_place_day;
  std::map<std::string, DayHourCounts> by_place_day_hour;

  std::uint64_t total() const;
};

CrowdDistributions crowd_distributions(const DatasetBundle& bundle, const QueryVolumeConfig& config);

inline constexpr int kHalfHourBins = 48;

struct AvailabilityProfile {
  /// Number of car parks open at the start of each 30-minute bin.
  std::array<std::array<int, kHalfHourBins>, kDaysPerWeek> open_counts{};
};

AvailabilityProfile availability_profile(std::span<const CarPark> carparks);

inline constexpr int kMinutesPerDay = 1440;

/// Available slots per minute of one day.
using SlotSeries = std::vector<int>;

/// Bounded random walk of available slots while the car park is open, zero
/// while closed. The stream depends only on (seed, carpark_id, day).
SlotSeries simulate_slots(const CarPark& carpark, int day, std::uint64_t seed);

/// Haversine distance from `destination` to the k-th nearest car park that is
/// open at the instant and has at least one free slot; nullopt ("unbounded")
/// when fewer than k qualify. `slots[i]` is the series of `carparks[i]` for `day`.
std::optional<double> radius_for_k(const GeoPoint& destination, int day, int second_of_day, int k,
                                   std::span<const CarPark> carparks,
                                   std::span<const SlotSeries> slots);

struct DistanceSpan {
  int start_sec = 0;  // inclusive
  int end_sec = 0;    // exclusive; end < start means the span wraps past midnight
  double p_dominant = 0.0;
  double mu_dominant_m = 0.0;
  double p_nondominant = 0.0;
  double mu_nondominant_m = 0.0;
  /// Expectation printed alongside the constant table, if any.
  std::optional<double> recorded_expectation_m;

  bool contains(int second_of_day) const noexcept;
  double expectation_m() const noexcept {
    return p_dominant * mu_dominant_m + p_nondominant * mu_nondominant_m;
  }
};

struct DistanceSpanTable {
  std::vector<DistanceSpan> spans;

  /// Index of the span covering the instant; the spans partition the day.
  std::size_t index_at(int second_of_day) const;
  const DistanceSpan& at(int second_of_day) const { return spans[index_at(second_of_day)]; }

  void validate() const;
};

struct SpanConfig {
  bool use_paper_table = true;
  /// Keep the printed 0.005 non-dominant share in the 01:00-05:00 row
  /// instead of the 0.05 that reproduces the printed 73 m expectation.
  bool verbatim_row5 = false;
  /// Derived mode only: share of queries carrying a distance condition when
  /// every sampled instant has k car parks available.
  double distance_presence = 0.25;
};

/// The published five-span table (05-10, 10-14, 14-19, 19-01, 01-05).
DistanceSpanTable paper_distance_spans(bool verbatim_row5 = false);

/// Constant table when config.use_paper_table, otherwise a reconstruction from
/// simulated availability: radii to the k_min-th available car park around
/// every destination, sampled each half hour of the week, are split into two
/// groups by 1-D 2-means; the larger group is dominant.
DistanceSpanTable derive_distance_spans(const DatasetBundle& bundle, std::uint64_t slot_seed,
                                        int k_min, const SpanConfig& config);

struct HourWindow {
  int start_hour = 0;  // inclusive
  int end_hour = 0;    // exclusive
  friend bool operator==(const HourWindow&, const HourWindow&) = default;
};

/// 07:00-09:00 and 16:00-18:00.
std::vector<HourWindow> default_rush_windows();

/// Contiguous runs of hours whose Monday-Friday mean traffic is at least 80%
/// of the weekday peak; the defaults when no matrix is supplied.
std::vector<HourWindow> rush_windows(const std::optional<WeekMatrix>& traffic);

bool in_rush(std::span<const HourWindow> windows, int hour) noexcept;

nlohmann::json to_json(const CrowdDistributions& crowd);
nlohmann::json to_json(const AvailabilityProfile& availability);
nlohmann::json to_json(const DistanceSpanTable& table);

}  // namespace cqsim
