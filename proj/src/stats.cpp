#include "cqsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "cqsim/errors.hpp"
#include "cqsim/rng.hpp"

namespace cqsim {

using nlohmann::json;

namespace {

std::string span_label(int start_sec, int end_sec) {
  std::ostringstream os;
  os << std::setfill('0') << std::setw(2) << start_sec / 3600 << ':' << std::setw(2)
     << (start_sec % 3600) / 60 << '-' << std::setw(2) << (end_sec / 3600) % 24 << ':'
     << std::setw(2) << (end_sec % 3600) / 60;
  return os.str();
}

}  // namespace

double QueryVolumeConfig::alpha_for(const std::string& place_id, int hour) const {
  if (auto it = alpha_at.find({place_id, hour}); it != alpha_at.end()) return it->second;
  return alpha;
}

double QueryVolumeConfig::p_query_for(const std::string& place_id, int hour) const {
  if (auto it = p_query_at.find({place_id, hour}); it != p_query_at.end()) return it->second;
  return p_query;
}

void QueryVolumeConfig::validate() const {
  auto check_alpha = [](double a, const std::string& where) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw Error(ErrorKind::DomainError, where + " must be > 0");
    }
  };
  auto check_p = [](double p, const std::string& where) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorKind::DomainError, where + " must be within [0, 1]");
    }
  };
  check_alpha(alpha, "alpha");
  check_p(p_query, "p_query");
  for (const auto& [key, a] : alpha_at) {
    if (key.second < 0 || key.second >= kHoursPerDay) {
      throw Error(ErrorKind::DomainError, "alpha override hour must be within [0, 23]");
    }
    check_alpha(a, "alpha[" + key.first + ":" + std::to_string(key.second) + "]");
  }
  for (const auto& [key, p] : p_query_at) {
    if (key.second < 0 || key.second >= kHoursPerDay) {
      throw Error(ErrorKind::DomainError, "p_query override hour must be within [0, 23]");
    }
    check_p(p, "p_query[" + key.first + ":" + std::to_string(key.second) + "]");
  }
}

std::uint64_t query_count(double rp, double alpha, double p_query) {
  if (!(rp >= 0.0 && rp <= 100.0)) throw Error(ErrorKind::DomainError, "rp must be within [0, 100]");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorKind::DomainError, "alpha must be > 0");
  if (!(p_query >= 0.0 && p_query <= 1.0)) {
    throw Error(ErrorKind::DomainError, "p_query must be within [0, 1]");
  }
  const double x = rp * alpha * p_query;
  // half-up, with a relative guard so 0.1-style decimal inputs that land a few
  // ulps under .5 still round up
  return static_cast<std::uint64_t>(std::floor(x + 0.5 + 1e-9 * std::max(1.0, x)));
}

std::uint64_t total_query_count(const DatasetBundle& bundle, const QueryVolumeConfig& config) {
  config.validate();
  std::uint64_t total = 0;
  for (const auto& place : bundle.places) {
    for (int d = 0; d < kDaysPerWeek; ++d) {
      for (int h = 0; h < kHoursPerDay; ++h) {
        total += query_count(place.rp[d][h], config.alpha_for(place.place_id, h),
                             config.p_query_for(place.place_id, h));
      }
    }
  }
  return total;
}

std::uint64_t CrowdDistributions::total() const {
  std::uint64_t t = 0;
  for (auto v : by_day) t += v;
  return t;
}

CrowdDistributions crowd_distributions(const DatasetBundle& bundle, const QueryVolumeConfig& config) {
  config.validate();
  CrowdDistributions out;
  for (const auto& place : bundle.places) {
    DayHourCounts cells{};
    std::array<std::uint64_t, kDaysPerWeek> per_day{};
    std::uint64_t place_total = 0;
    for (int d = 0; d < kDaysPerWeek; ++d) {
      for (int h = 0; h < kHoursPerDay; ++h) {
        const auto n = query_count(place.rp[d][h], config.alpha_for(place.place_id, h),
                                   config.p_query_for(place.place_id, h));
        cells[d][h] = n;
        per_day[d] += n;
        out.by_day[d] += n;
        place_total += n;
      }
    }
    out.by_place[place.place_id] += place_total;
    out.by_place_day[place.place_id] = per_day;
    out.by_place_day_hour[place.place_id] = cells;
  }
  return out;
}

AvailabilityProfile availability_profile(std::span<const CarPark> carparks) {
  AvailabilityProfile out;
  for (int d = 0; d < kDaysPerWeek; ++d) {
    for (int b = 0; b < kHalfHourBins; ++b) {
      int open = 0;
      for (const auto& c : carparks) open += c.is_open(d, b * 1800) ? 1 : 0;
      out.open_counts[d][b] = open;
    }
  }
  return out;
}

SlotSeries simulate_slots(const CarPark& carpark, int day, std::uint64_t seed) {
  SlotSeries series(kMinutesPerDay, 0);
  if (carpark.capacity <= 0) return series;
  Rng rng = Rng::derive(seed, "slots", hash_string(carpark.carpark_id), static_cast<std::uint64_t>(day));
  const double step_sd = std::max(1.0, carpark.capacity * 0.02);
  bool was_open = false;
  double level = 0.0;
  for (int m = 0; m < kMinutesPerDay; ++m) {
    if (!carpark.is_open(day, m * 60)) {
      was_open = false;
      continue;
    }
    if (!was_open) {
      level = std::round(carpark.capacity * rng.uniform(0.2, 0.9));
      was_open = true;
    } else {
      level += std::round(rng.normal(0.0, step_sd));
    }
    level = std::clamp(level, 0.0, static_cast<double>(carpark.capacity));
    series[m] = static_cast<int>(level);
  }
  return series;
}

std::optional<double> radius_for_k(const GeoPoint& destination, int day, int second_of_day, int k,
                                   std::span<const CarPark> carparks,
                                   std::span<const SlotSeries> slots) {
  if (k < 1) throw Error(ErrorKind::DomainError, "k must be >= 1");
  const int minute = std::clamp(second_of_day / 60, 0, kMinutesPerDay - 1);
  std::vector<double> distances;
  for (std::size_t i = 0; i < carparks.size(); ++i) {
    if (!carparks[i].is_open(day, second_of_day)) continue;
    if (i < slots.size() && slots[i].size() == kMinutesPerDay && slots[i][minute] < 1) continue;
    distances.push_back(haversine_m(destination, carparks[i].location));
  }
  if (static_cast<int>(distances.size()) < k) return std::nullopt;
  std::nth_element(distances.begin(), distances.begin() + (k - 1), distances.end());
  return distances[k - 1];
}

bool DistanceSpan::contains(int second_of_day) const noexcept {
  if (start_sec <= end_sec) return second_of_day >= start_sec && second_of_day < end_sec;
  return second_of_day >= start_sec || second_of_day < end_sec;
}

std::size_t DistanceSpanTable::index_at(int second_of_day) const {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].contains(second_of_day)) return i;
  }
  throw Error(ErrorKind::InvariantViolation,
              "distance spans do not cover second " + std::to_string(second_of_day));
}

void DistanceSpanTable::validate() const {
  if (spans.empty()) throw Error(ErrorKind::InvariantViolation, "empty distance span table");
  // every minute of the day in exactly one span
  for (int s = 0; s < kSecondsPerDay; s += 60) {
    int hits = 0;
    for (const auto& span : spans) hits += span.contains(s) ? 1 : 0;
    if (hits != 1) {
      throw Error(ErrorKind::InvariantViolation,
                  "distance spans must partition the day (second " + std::to_string(s) + ")");
    }
  }
  for (const auto& span : spans) {
    if (span.p_dominant < 0.0 || span.p_nondominant < 0.0 ||
        span.p_dominant + span.p_nondominant > 1.0 + 1e-12) {
      throw Error(ErrorKind::InvariantViolation, "span probabilities must be >= 0 and sum to <= 1");
    }
    if (span.mu_dominant_m < 0.0 || span.mu_nondominant_m < 0.0) {
      throw Error(ErrorKind::InvariantViolation, "span means must be >= 0");
    }
  }
}

DistanceSpanTable paper_distance_spans(bool verbatim_row5) {
  constexpr int H = 3600;
  DistanceSpanTable t;
  t.spans = {
      {5 * H, 10 * H, 0.2, 137.5, 0.05, 1150.0, 85.0},
      {10 * H, 14 * H, 0.125, 189.29, 0.125, 1312.5, 187.72},
      {14 * H, 19 * H, 0.2, 137.5, 0.05, 1150.0, 85.0},
      {19 * H, 1 * H, 0.1, 189.29, 0.15, 1312.5, 215.8},
      // printed as 0.005, which gives 28 m against the printed 73 m; 0.05 gives 73 m
      {1 * H, 5 * H, 0.2, 115.0, verbatim_row5 ? 0.005 : 0.05, 1000.0, 73.0},
  };
  return t;
}

namespace {

struct TwoGroups {
  std::size_t dominant_n = 0;
  double dominant_mean = 0.0;
  std::size_t other_n = 0;
  double other_mean = 0.0;
};

// Optimal 1-D 2-means split of sorted values.
TwoGroups split_two_means(std::vector<double> values) {
  TwoGroups g;
  if (values.empty()) return g;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i] + values[i];
    prefix_sq[i + 1] = prefix_sq[i] + values[i] * values[i];
  }
  auto sse = [&](std::size_t lo, std::size_t hi) {
    const double cnt = static_cast<double>(hi - lo);
    if (cnt <= 0) return 0.0;
    const double s = prefix[hi] - prefix[lo];
    return (prefix_sq[hi] - prefix_sq[lo]) - s * s / cnt;
  };
  std::size_t best = n;  // n means no split
  double best_cost = sse(0, n) - 1e-9 * std::max(1.0, sse(0, n));
  for (std::size_t cut = 1; cut < n; ++cut) {
    if (values[cut] == values[cut - 1]) continue;
    const double cost = sse(0, cut) + sse(cut, n);
    if (cost < best_cost) {
      best_cost = cost;
      best = cut;
    }
  }
  auto mean = [&](std::size_t lo, std::size_t hi) {
    return hi > lo ? (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo) : 0.0;
  };
  if (best == n) {
    g.dominant_n = n;
    g.dominant_mean = mean(0, n);
    g.other_mean = g.dominant_mean;
    return g;
  }
  const std::size_t low_n = best, high_n = n - best;
  if (low_n >= high_n) {
    g = {low_n, mean(0, best), high_n, mean(best, n)};
  } else {
    g = {high_n, mean(best, n), low_n, mean(0, best)};
  }
  return g;
}

}  // namespace

DistanceSpanTable derive_distance_spans(const DatasetBundle& bundle, std::uint64_t slot_seed,
                                        int k_min, const SpanConfig& config) {
  if (k_min < 1) throw Error(ErrorKind::DomainError, "k_min must be >= 1");
  DistanceSpanTable table = paper_distance_spans(config.verbatim_row5);
  if (config.use_paper_table) return table;
  if (!(config.distance_presence >= 0.0 && config.distance_presence <= 1.0)) {
    throw Error(ErrorKind::DomainError, "distance_presence must be within [0, 1]");
  }

  const std::size_t n_spans = table.spans.size();
  std::vector<std::vector<double>> radii(n_spans);
  std::vector<std::size_t> samples(n_spans, 0);

  for (int d = 0; d < kDaysPerWeek; ++d) {
    std::vector<SlotSeries> slots;
    slots.reserve(bundle.carparks.size());
    for (const auto& c : bundle.carparks) slots.push_back(simulate_slots(c, d, slot_seed));
    for (int b = 0; b < kHalfHourBins; ++b) {
      const int t = b * 1800;
      const std::size_t s = table.index_at(t);
      for (const auto& place : bundle.places) {
        ++samples[s];
        if (auto r = radius_for_k(place.location, d, t, k_min, bundle.carparks, slots)) {
          radii[s].push_back(*r);
        }
      }
    }
  }

  for (std::size_t s = 0; s < n_spans; ++s) {
    auto& span = table.spans[s];
    span.recorded_expectation_m.reset();
    const std::size_t bounded = radii[s].size();
    if (bounded == 0 || samples[s] == 0) {
      span.p_dominant = span.p_nondominant = 0.0;
      span.mu_dominant_m = span.mu_nondominant_m = 0.0;
      continue;
    }
    const double mass =
        config.distance_presence * static_cast<double>(bounded) / static_cast<double>(samples[s]);
    const TwoGroups g = split_two_means(radii[s]);
    span.p_dominant = mass * static_cast<double>(g.dominant_n) / static_cast<double>(bounded);
    span.p_nondominant = mass * static_cast<double>(g.other_n) / static_cast<double>(bounded);
    span.mu_dominant_m = g.dominant_mean;
    span.mu_nondominant_m = g.other_mean;
  }
  return table;
}

std::vector<HourWindow> default_rush_windows() { return {{7, 9}, {16, 18}}; }

std::vector<HourWindow> rush_windows(const std::optional<WeekMatrix>& traffic) {
  if (!traffic) return default_rush_windows();
  std::array<double, kHoursPerDay> mean{};
  double peak = 0.0;
  for (int h = 0; h < kHoursPerDay; ++h) {
    for (int d = 0; d < 5; ++d) mean[h] += (*traffic)[d][h];
    mean[h] /= 5.0;
    peak = std::max(peak, mean[h]);
  }
  if (peak <= 0.0) return default_rush_windows();
  std::vector<HourWindow> out;
  for (int h = 0; h < kHoursPerDay;) {
    if (mean[h] >= 0.8 * peak) {
      int end = h;
      while (end < kHoursPerDay && mean[end] >= 0.8 * peak) ++end;
      out.push_back({h, end});
      h = end;
    } else {
      ++h;
    }
  }
  return out;
}

bool in_rush(std::span<const HourWindow> windows, int hour) noexcept {
  for (const auto& w : windows) {
    if (w.start_hour <= w.end_hour) {
      if (hour >= w.start_hour && hour < w.end_hour) return true;
    } else if (hour >= w.start_hour || hour < w.end_hour) {
      return true;
    }
  }
  return false;
}

json to_json(const CrowdDistributions& crowd) {
  json by_day = json::object();
  for (int d = 0; d < kDaysPerWeek; ++d) by_day[std::string(kDayNames[d])] = crowd.by_day[d];
  json by_place_day = json::object();
  for (const auto& [place, days] : crowd.by_place_day) by_place_day[place] = days;
  json by_pdh = json::object();
  for (const auto& [place, cells] : crowd.by_place_day_hour) by_pdh[place] = cells;
  return {{"total", crowd.total()},
          {"by_place", crowd.by_place},
          {"by_day", by_day},
          {"by_place_day", by_place_day},
          {"by_place_day_hour", by_pdh}};
}

json to_json(const AvailabilityProfile& availability) {
  json out = json::object();
  for (int d = 0; d < kDaysPerWeek; ++d) out[std::string(kDayNames[d])] = availability.open_counts[d];
  return out;
}

json to_json(const DistanceSpanTable& table) {
  json spans = json::array();
  for (const auto& s : table.spans) {
    json j = {{"span", span_label(s.start_sec, s.end_sec)},
              {"start_sec", s.start_sec},
              {"end_sec", s.end_sec},
              {"p_dominant", s.p_dominant},
              {"mu_dominant_m", s.mu_dominant_m},
              {"p_nondominant", s.p_nondominant},
              {"mu_nondominant_m", s.mu_nondominant_m},
              {"expectation_m", s.expectation_m()},
              {"p_null", 1.0 - s.p_dominant - s.p_nondominant}};
    if (s.recorded_expectation_m) j["recorded_expectation_m"] = *s.recorded_expectation_m;
    spans.push_back(std::move(j));
  }
  return {{"spans", spans}};
}

}  // namespace cqsim
