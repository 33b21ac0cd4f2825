#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cqsim/geo.hpp"
#include "cqsim/ingest.hpp"
#include "cqsim/rng.hpp"
#include "cqsim/stats.hpp"

namespace cqsim {

enum class Family { Daily, Weekday, Weekend, Random };

const char* to_string(Family family) noexcept;

/// Days a family's consumers query on (Monday = 0).
std::span<const int> family_days(Family family) noexcept;

/// Commuter profile (one row of the recurrence table).
struct CommuterProfileSpec {
  int profile_no = 0;
  Family family = Family::Random;
  std::optional<bool> same_location;  // nullopt = not applicable
  std::optional<bool> same_time;
  double probability = 0.0;
};

/// The thirteen profiles with the probabilities exactly as published. That
/// column sums to 0.9796, not 1.
const std::array<CommuterProfileSpec, 13>& published_profiles() noexcept;

/// Published profiles renormalized to sum to 1; used as allocation targets.
std::array<CommuterProfileSpec, 13> normalized_profiles();

struct Consumer {
  std::uint64_t consumer_id = 0;
  int profile_no = 0;
  std::optional<std::string> home_destination;  // place_id, iff same_location
  std::optional<int> home_hour;                 // iff same_time
  std::string vin;
  std::optional<double> static_distance_pref;  // meters
  std::string base_vin;
  bool modified = false;
  VehicleSpec vehicle;  // effective spec after modification
};

enum class DistanceGroup : std::uint8_t { Dominant = 0, NonDominant = 1 };
enum class PriceCategory : std::uint8_t { ExpectedTime = 0, RandomNormal = 1, Locality = 2, TimeOfDay = 3 };

const char* to_string(DistanceGroup group) noexcept;
const char* to_string(PriceCategory category) noexcept;

/// One context query template: the published template columns plus the
/// consumer/profile metadata the generator knows.
struct QueryTemplate {
  std::uint64_t id = 0;
  GeoPoint origin;
  std::string address;
  int day = 0;
  int hour = 0;
  int minute = 0;
  int second = 0;
  std::optional<double> distance;       // meters
  std::optional<double> expected_time;  // minutes
  std::optional<double> price;          // AUD
  std::optional<double> rating;
  std::string vin;
  std::string query_id;
  std::uint64_t consumer_id = 0;
  int profile_no = 0;
  std::optional<DistanceGroup> distance_group;
  std::optional<PriceCategory> price_category;

  int second_of_day() const noexcept { return hour * 3600 + minute * 60 + second; }
  int week_second() const noexcept { return day * kSecondsPerDay + second_of_day(); }

  friend bool operator==(const QueryTemplate&, const QueryTemplate&) = default;
};

struct ConditionProbs {
  double rating = 0.5003;
  double price = 0.8004;
  double duration = 0.2003;
};

struct PriceCategories {
  double expected_time = 0.16;
  double random_normal = 0.64;
  double locality = 0.10;
  double time_of_day = 0.10;
};

struct VehicleModLimits {
  double height_m = 0.30;
  double length_m = 0.50;
  double width_m = 0.25;
};

struct NormalParams {
  double mean = 20.0;
  double sd = 6.0;
};

struct GenerationConfig {
  QueryVolumeConfig volume;
  GeoPoint origin_center = kDefaultCenter;
  double origin_radius_m = 2000.0;
  ConditionProbs cond_probs;
  double vehicle_mod_fraction = 0.5;
  double per_param_mod_prob = 0.5;
  VehicleModLimits max_mod;
  PriceCategories price_categories;
  NormalParams onstreet_price;
  /// Derived from the bundle's traffic matrix when unset.
  std::optional<std::vector<HourWindow>> rush_windows;
  /// static preference, crowdedness-conditioned, pure random
  std::array<double, 3> distance_factor_probs{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  SpanConfig spans;
  int k_min = 2;
  std::string query_id = "available-slots";
  std::uint64_t seed = 1;
  /// Worker threads for the per-(place, day) stages. Never changes output.
  unsigned threads = 1;

  /// Throws Error{DomainError} naming the offending field.
  void validate() const;
};

/// Canonical JSON of every output-affecting field (threads excluded).
nlohmann::json to_json(const GenerationConfig& config);

/// (minute, second) pairs uniform over the hour's 3600 seconds, sorted.
std::vector<std::pair<int, int>> assign_execution_time(std::uint64_t count, int hour, Rng& rng);

/// Position of one unassigned template in the (place, day, hour) grid.
struct TemplateSlot {
  std::uint32_t place = 0;
  std::uint8_t day = 0;
  std::uint8_t hour = 0;
};

struct AllocatedConsumer {
  int profile_no = 0;
  std::optional<std::uint32_t> home_place;
  std::optional<int> home_hour;
};

struct Allocation {
  std::vector<AllocatedConsumer> consumers;
  /// Template index -> index into `consumers`.
  std::vector<std::uint32_t> owner;
};

/// Matches template slots with commuter profiles. Constrained profiles claim
/// compatible slots greedily (most constrained first, rush hours first for the
/// recurrent same-time Daily/Weekday profiles); every unclaimed slot falls to
/// the Random profile. Daily consumers own one template per day of the week,
/// Weekday ones per weekday, Weekend ones per weekend day, Random ones exactly one.
Allocation allocate_commuters(std::span<const TemplateSlot> slots, std::size_t n_places,
                              std::span<const CommuterProfileSpec> profiles,
                              std::span<const HourWindow> rush, Rng& rng);

struct VehicleAssignment {
  std::string vin;
  std::string base_vin;
  bool modified = false;
  VehicleSpec spec;
};

VehicleAssignment assign_vehicle(const Consumer& consumer, std::span<const VehicleSpec> vehicles,
                                 const GenerationConfig& config, Rng& rng);

/// Lookup tables shared by every condition draw of one generation run.
struct ConditionContext {
  DistanceSpanTable spans;
  /// Template-weighted mean of the raw crowdedness multiplier, per span.
  std::vector<double> crowd_norm;
  std::vector<double> locality_rate;   // AUD per hour, per place
  std::vector<double> locality_price;  // AUD, per place
  std::vector<double> span_price;      // AUD, per span
};

ConditionContext make_condition_context(const DatasetBundle& bundle, const CrowdDistributions& crowd,
                                        DistanceSpanTable spans, const GenerationConfig& config);

/// Raw crowdedness multiplier: RP 0 -> 1.0, RP 100 -> 0.5.
double crowd_multiplier(double rp) noexcept;

/// Reference mean of static distance preferences; a consumer's static value
/// for a group with mean mu is pref * mu / kStaticPrefReferenceM.
inline constexpr double kStaticPrefReferenceM = 150.0;
inline constexpr double kMinDistanceM = 10.0;
inline constexpr double kMaxDistanceM = 3000.0;

/// Fills distance, expected_time, price and rating.
void attach_conditions(QueryTemplate& tmpl, const Consumer& consumer, const ConditionContext& ctx,
                       std::size_t place_index, const PopularityProfile& place,
                       const GenerationConfig& config, Rng& rng);

struct GenerationResult {
  std::vector<QueryTemplate> templates;  // id order
  std::vector<Consumer> consumers;       // consumer_id order
  DistanceSpanTable spans;

  nlohmann::json stats() const;
};

GenerationResult generate(const DatasetBundle& bundle, const GenerationConfig& config);

}  // namespace cqsim
