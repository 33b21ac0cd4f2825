#include "cqsim/generator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "cqsim/errors.hpp"

namespace cqsim {

using nlohmann::json;

namespace {

constexpr std::array<int, 7> kAllDays = {0, 1, 2, 3, 4, 5, 6};
constexpr std::array<int, 5> kWeekdays = {0, 1, 2, 3, 4};
constexpr std::array<int, 2> kWeekendDays = {5, 6};

constexpr std::uint32_t kUnassigned = std::numeric_limits<std::uint32_t>::max();

double round_to_cents(double x) { return std::round(x * 100.0) / 100.0; }
double round_to_mm(double x) { return std::round(x * 1000.0) / 1000.0; }

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::DomainError, std::string(name) + " must be within [0, 1]");
  }
}

// Runs fn(i) for i in [0, n) on `threads` workers. fn must only touch state
// owned by index i.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
}

}  // namespace

const char* to_string(Family family) noexcept {
  switch (family) {
    case Family::Daily: return "Daily";
    case Family::Weekday: return "Weekday";
    case Family::Weekend: return "Weekend";
    case Family::Random: return "Random";
  }
  return "Random";
}

const char* to_string(DistanceGroup group) noexcept {
  return group == DistanceGroup::Dominant ? "dominant" : "nondominant";
}

const char* to_string(PriceCategory category) noexcept {
  switch (category) {
    case PriceCategory::ExpectedTime: return "expected_time";
    case PriceCategory::RandomNormal: return "random_normal";
    case PriceCategory::Locality: return "locality";
    case PriceCategory::TimeOfDay: return "time_of_day";
  }
  return "random_normal";
}

std::span<const int> family_days(Family family) noexcept {
  switch (family) {
    case Family::Daily: return kAllDays;
    case Family::Weekday: return kWeekdays;
    case Family::Weekend: return kWeekendDays;
    case Family::Random: return kAllDays;
  }
  return kAllDays;
}

const std::array<CommuterProfileSpec, 13>& published_profiles() noexcept {
  static const std::array<CommuterProfileSpec, 13> kProfiles = {{
      {1, Family::Daily, true, true, 0.0935},
      {2, Family::Daily, true, false, 0.0312},
      {3, Family::Daily, false, true, 0.0156},
      {4, Family::Daily, false, false, 0.0156},
      {5, Family::Weekday, true, true, 0.1670},
      {6, Family::Weekday, true, false, 0.0557},
      {7, Family::Weekday, false, true, 0.0278},
      {8, Family::Weekday, false, false, 0.0278},
      {9, Family::Weekend, true, true, 0.0312},
      {10, Family::Weekend, true, false, 0.0312},
      {11, Family::Weekend, false, true, 0.0039},
      {12, Family::Weekend, false, false, 0.0117},
      {13, Family::Random, std::nullopt, std::nullopt, 0.4674},
  }};
  return kProfiles;
}

std::array<CommuterProfileSpec, 13> normalized_profiles() {
  auto profiles = published_profiles();
  double sum = 0.0;
  for (const auto& p : profiles) sum += p.probability;
  for (auto& p : profiles) p.probability /= sum;
  return profiles;
}

void GenerationConfig::validate() const {
  volume.validate();
  if (!is_valid(origin_center)) throw Error(ErrorKind::DomainError, "origin_center out of range");
  if (!(origin_radius_m >= 0.0) || !std::isfinite(origin_radius_m)) {
    throw Error(ErrorKind::DomainError, "origin_radius_m must be >= 0");
  }
  check_probability(cond_probs.rating, "cond_probs.rating");
  check_probability(cond_probs.price, "cond_probs.price");
  check_probability(cond_probs.duration, "cond_probs.duration");
  check_probability(vehicle_mod_fraction, "vehicle_mod_fraction");
  check_probability(per_param_mod_prob, "per_param_mod_prob");
  if (!(max_mod.height_m >= 0.0) || !(max_mod.length_m >= 0.0) || !(max_mod.width_m >= 0.0)) {
    throw Error(ErrorKind::DomainError, "max_mod dimensions must be >= 0");
  }
  check_probability(price_categories.expected_time, "price_categories.expected_time");
  check_probability(price_categories.random_normal, "price_categories.random_normal");
  check_probability(price_categories.locality, "price_categories.locality");
  check_probability(price_categories.time_of_day, "price_categories.time_of_day");
  const double price_sum = price_categories.expected_time + price_categories.random_normal +
                           price_categories.locality + price_categories.time_of_day;
  if (std::abs(price_sum - 1.0) > 1e-9) {
    throw Error(ErrorKind::DomainError, "price_categories must sum to 1");
  }
  if (!(onstreet_price.sd >= 0.0) || !std::isfinite(onstreet_price.mean)) {
    throw Error(ErrorKind::DomainError, "onstreet_price.sd must be >= 0");
  }
  double factor_sum = 0.0;
  for (double p : distance_factor_probs) {
    check_probability(p, "distance_factor_probs");
    factor_sum += p;
  }
  if (std::abs(factor_sum - 1.0) > 1e-9) {
    throw Error(ErrorKind::DomainError, "distance_factor_probs must sum to 1");
  }
  if (rush_windows) {
    for (const auto& w : *rush_windows) {
      if (w.start_hour < 0 || w.start_hour > 23 || w.end_hour < 0 || w.end_hour > 24 ||
          w.start_hour == w.end_hour) {
        throw Error(ErrorKind::DomainError, "rush_windows hours must be within [0, 24]");
      }
    }
  }
  if (!(spans.distance_presence >= 0.0 && spans.distance_presence <= 1.0)) {
    throw Error(ErrorKind::DomainError, "spans.distance_presence must be within [0, 1]");
  }
  if (k_min < 1) throw Error(ErrorKind::DomainError, "k_min must be >= 1");
  if (query_id.empty()) throw Error(ErrorKind::DomainError, "query_id must not be empty");
}

json to_json(const GenerationConfig& c) {
  json alpha_at = json::array();
  for (const auto& [key, v] : c.volume.alpha_at) alpha_at.push_back({key.first, key.second, v});
  json p_query_at = json::array();
  for (const auto& [key, v] : c.volume.p_query_at) p_query_at.push_back({key.first, key.second, v});
  json rush = nullptr;
  if (c.rush_windows) {
    rush = json::array();
    for (const auto& w : *c.rush_windows) rush.push_back({w.start_hour, w.end_hour});
  }
  return {
      {"volume", {{"alpha", c.volume.alpha}, {"p_query", c.volume.p_query},
                  {"alpha_at", alpha_at}, {"p_query_at", p_query_at}}},
      {"origin_center", {{"lat", c.origin_center.lat}, {"lng", c.origin_center.lng}}},
      {"origin_radius_m", c.origin_radius_m},
      {"cond_probs", {{"rating", c.cond_probs.rating}, {"price", c.cond_probs.price},
                      {"duration", c.cond_probs.duration}}},
      {"vehicle_mod_fraction", c.vehicle_mod_fraction},
      {"per_param_mod_prob", c.per_param_mod_prob},
      {"max_mod", {{"height_m", c.max_mod.height_m}, {"length_m", c.max_mod.length_m},
                   {"width_m", c.max_mod.width_m}}},
      {"price_categories", {{"expected_time", c.price_categories.expected_time},
                            {"random_normal", c.price_categories.random_normal},
                            {"locality", c.price_categories.locality},
                            {"time_of_day", c.price_categories.time_of_day}}},
      {"onstreet_price", {{"mean", c.onstreet_price.mean}, {"sd", c.onstreet_price.sd}}},
      {"rush_windows", rush},
      {"distance_factor_probs", c.distance_factor_probs},
      {"spans", {{"use_paper_table", c.spans.use_paper_table},
                 {"verbatim_row5", c.spans.verbatim_row5},
                 {"distance_presence", c.spans.distance_presence}}},
      {"k_min", c.k_min},
      {"query_id", c.query_id},
      {"seed", c.seed},
  };
}

std::vector<std::pair<int, int>> assign_execution_time(std::uint64_t count, int hour, Rng& rng) {
  if (hour < 0 || hour >= kHoursPerDay) throw Error(ErrorKind::DomainError, "hour must be within [0, 23]");
  std::vector<int> seconds(count);
  for (auto& s : seconds) s = static_cast<int>(rng.below(3600));
  std::sort(seconds.begin(), seconds.end());
  std::vector<std::pair<int, int>> out;
  out.reserve(count);
  for (int s : seconds) out.emplace_back(s / 60, s % 60);
  return out;
}

// ---------------------------------------------------------------------------
// Commuter allocation

namespace {

// Unassigned templates indexed two ways: by (place, day, hour) bucket and by
// (day, rush-hour?) pool. Removal is O(1) swap-and-pop in both.
class SlotIndex {
 public:
  SlotIndex(std::span<const TemplateSlot> slots, std::size_t n_places, std::span<const HourWindow> rush)
      : slots_(slots),
        n_places_(n_places),
        buckets_(n_places * kDaysPerWeek * kHoursPerDay),
        bucket_pos_(slots.size()),
        pool_pos_(slots.size()) {
    for (int h = 0; h < kHoursPerDay; ++h) rush_hour_[h] = in_rush(rush, h);
    for (std::uint32_t t = 0; t < slots.size(); ++t) {
      const auto& s = slots[t];
      if (s.place >= n_places || s.day >= kDaysPerWeek || s.hour >= kHoursPerDay) {
        throw Error(ErrorKind::DomainError, "template slot out of range");
      }
      auto& b = buckets_[key(s.place, s.day, s.hour)];
      bucket_pos_[t] = static_cast<std::uint32_t>(b.size());
      b.push_back(t);
      auto& p = pools_[s.day][rush_hour_[s.hour]];
      pool_pos_[t] = static_cast<std::uint32_t>(p.size());
      p.push_back(t);
    }
  }

  std::size_t n_places() const { return n_places_; }
  bool rush_hour(int h) const { return rush_hour_[h]; }

  std::size_t bucket_size(std::uint32_t p, int d, int h) const { return buckets_[key(p, d, h)].size(); }
  std::uint32_t bucket_pick(std::uint32_t p, int d, int h, Rng& rng) const {
    const auto& b = buckets_[key(p, d, h)];
    return b[rng.below(b.size())];
  }

  std::size_t pool_size(int d, int rush) const { return pools_[d][rush].size(); }
  std::size_t day_size(int d) const { return pools_[d][0].size() + pools_[d][1].size(); }
  std::uint32_t pool_pick(int d, int rush, Rng& rng) const {
    const auto& p = pools_[d][rush];
    return p[rng.below(p.size())];
  }

  const TemplateSlot& slot(std::uint32_t t) const { return slots_[t]; }

  void take(std::uint32_t t) {
    const auto& s = slots_[t];
    erase(buckets_[key(s.place, s.day, s.hour)], bucket_pos_, t);
    erase(pools_[s.day][rush_hour_[s.hour]], pool_pos_, t);
  }

 private:
  std::size_t key(std::uint32_t p, int d, int h) const {
    return (static_cast<std::size_t>(p) * kDaysPerWeek + d) * kHoursPerDay + h;
  }

  static void erase(std::vector<std::uint32_t>& vec, std::vector<std::uint32_t>& pos, std::uint32_t t) {
    const std::uint32_t i = pos[t];
    const std::uint32_t last = vec.back();
    vec[i] = last;
    pos[last] = i;
    vec.pop_back();
  }

  std::span<const TemplateSlot> slots_;
  std::size_t n_places_;
  std::vector<std::vector<std::uint32_t>> buckets_;
  std::vector<std::uint32_t> bucket_pos_;
  std::array<std::array<std::vector<std::uint32_t>, 2>, kDaysPerWeek> pools_;
  std::vector<std::uint32_t> pool_pos_;
  std::array<int, kHoursPerDay> rush_hour_{};
};

struct ProfileShape {
  std::span<const int> days;
  bool same_location = false;
  bool same_time = false;
  bool prefer_rush = false;
};

class Allocator {
 public:
  Allocator(SlotIndex& index, Rng& rng) : index_(index), rng_(rng) {}

  // Claims one template per day for a new consumer; empty when infeasible.
  std::vector<std::uint32_t> claim(const ProfileShape& shape, std::optional<std::uint32_t>& home_place,
                                   std::optional<int>& home_hour) {
    constexpr int kAttempts = 32;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      const bool rush_only = shape.prefer_rush && attempt < kAttempts / 2;
      auto anchor = pick_anchor(shape.days, rush_only);
      if (!anchor) {
        if (rush_only) continue;
        return {};
      }
      const auto& s = index_.slot(*anchor);
      auto plan = build_plan(shape, s.place, s.hour, s.day, *anchor);
      if (!plan.empty()) return commit(shape, plan, s.place, s.hour, home_place, home_hour);
    }
    return exhaustive(shape, home_place, home_hour);
  }

 private:
  std::optional<std::uint32_t> pick_anchor(std::span<const int> days, bool rush_only) {
    std::vector<double> weights;
    std::vector<std::pair<int, int>> pools;
    for (int d : days) {
      for (int r = rush_only ? 1 : 0; r < 2; ++r) {
        weights.push_back(static_cast<double>(index_.pool_size(d, r)));
        pools.emplace_back(d, r);
      }
    }
    if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; })) {
      return std::nullopt;
    }
    const auto [d, r] = pools[rng_.weighted(weights)];
    return index_.pool_pick(d, r, rng_);
  }

  std::optional<std::uint32_t> pick_on_day(const ProfileShape& shape, std::uint32_t place, int hour, int d) {
    if (shape.same_location && shape.same_time) {
      if (index_.bucket_size(place, d, hour) == 0) return std::nullopt;
      return index_.bucket_pick(place, d, hour, rng_);
    }
    if (shape.same_location) {
      std::array<double, kHoursPerDay> w{};
      double total = 0.0;
      for (int h = 0; h < kHoursPerDay; ++h) total += w[h] = static_cast<double>(index_.bucket_size(place, d, h));
      if (total == 0.0) return std::nullopt;
      const int h = static_cast<int>(rng_.weighted(w));
      return index_.bucket_pick(place, d, h, rng_);
    }
    if (shape.same_time) {
      weights_.assign(index_.n_places(), 0.0);
      double total = 0.0;
      for (std::uint32_t p = 0; p < index_.n_places(); ++p) {
        total += weights_[p] = static_cast<double>(index_.bucket_size(p, d, hour));
      }
      if (total == 0.0) return std::nullopt;
      const auto p = static_cast<std::uint32_t>(rng_.weighted(weights_));
      return index_.bucket_pick(p, d, hour, rng_);
    }
    const std::array<double, 2> w = {static_cast<double>(index_.pool_size(d, 0)),
                                     static_cast<double>(index_.pool_size(d, 1))};
    if (w[0] + w[1] == 0.0) return std::nullopt;
    return index_.pool_pick(d, static_cast<int>(rng_.weighted(w)), rng_);
  }

  std::vector<std::uint32_t> build_plan(const ProfileShape& shape, std::uint32_t place, int hour,
                                        int fixed_day, std::optional<std::uint32_t> fixed) {
    std::vector<std::uint32_t> plan;
    plan.reserve(shape.days.size());
    for (int d : shape.days) {
      if (fixed && d == fixed_day) {
        plan.push_back(*fixed);
        continue;
      }
      auto t = pick_on_day(shape, place, hour, d);
      if (!t) return {};
      plan.push_back(*t);
    }
    return plan;
  }

  std::vector<std::uint32_t> commit(const ProfileShape& shape, const std::vector<std::uint32_t>& plan,
                                    std::uint32_t place, int hour, std::optional<std::uint32_t>& home_place,
                                    std::optional<int>& home_hour) {
    for (auto t : plan) index_.take(t);
    home_place = shape.same_location ? std::optional<std::uint32_t>(place) : std::nullopt;
    home_hour = shape.same_time ? std::optional<int>(hour) : std::nullopt;
    return plan;
  }

  // Fallback once random anchors keep failing: enumerate every feasible
  // (place, hour) key and pick one weighted by its remaining capacity.
  std::vector<std::uint32_t> exhaustive(const ProfileShape& shape, std::optional<std::uint32_t>& home_place,
                                        std::optional<int>& home_hour) {
    struct Key {
      std::uint32_t place;
      int hour;
    };
    for (int pass = shape.prefer_rush ? 0 : 1; pass < 2; ++pass) {
      const bool rush_only = pass == 0;
      std::vector<Key> keys;
      std::vector<double> weights;
      const std::size_t places = shape.same_location ? index_.n_places() : 1;
      const int hours = shape.same_time ? kHoursPerDay : 1;
      for (std::uint32_t p = 0; p < places; ++p) {
        for (int h = 0; h < hours; ++h) {
          if (shape.same_time && rush_only && !index_.rush_hour(h)) continue;
          double cap = std::numeric_limits<double>::infinity();
          for (int d : shape.days) {
            std::size_t n = 0;
            if (shape.same_location && shape.same_time) {
              n = index_.bucket_size(p, d, h);
            } else if (shape.same_location) {
              for (int hh = 0; hh < kHoursPerDay; ++hh) n += index_.bucket_size(p, d, hh);
            } else if (shape.same_time) {
              for (std::uint32_t pp = 0; pp < index_.n_places(); ++pp) n += index_.bucket_size(pp, d, h);
            } else {
              n = index_.day_size(d);
            }
            cap = std::min(cap, static_cast<double>(n));
          }
          if (cap > 0.0) {
            keys.push_back({p, h});
            weights.push_back(cap);
          }
        }
      }
      if (keys.empty()) continue;
      const Key k = keys[rng_.weighted(weights)];
      auto plan = build_plan(shape, k.place, k.hour, -1, std::nullopt);
      if (plan.empty()) throw Error(ErrorKind::InfeasibleAllocation, "feasible key produced no plan");
      return commit(shape, plan, k.place, k.hour, home_place, home_hour);
    }
    return {};
  }

  SlotIndex& index_;
  Rng& rng_;
  std::vector<double> weights_;
};

int templates_per_consumer(Family family) {
  return family == Family::Random ? 1 : static_cast<int>(family_days(family).size());
}

}  // namespace

Allocation allocate_commuters(std::span<const TemplateSlot> slots, std::size_t n_places,
                              std::span<const CommuterProfileSpec> profiles,
                              std::span<const HourWindow> rush, Rng& rng) {
  if (slots.size() >= kUnassigned) throw Error(ErrorKind::DomainError, "too many templates");
  double prob_sum = 0.0;
  const CommuterProfileSpec* random_profile = nullptr;
  for (const auto& p : profiles) {
    check_probability(p.probability, "profile probability");
    prob_sum += p.probability;
    if (p.family == Family::Random) random_profile = &p;
  }
  if (!random_profile) {
    throw Error(ErrorKind::InfeasibleAllocation, "profile table needs a Random profile for fallback");
  }
  if (!(prob_sum > 0.0)) throw Error(ErrorKind::DomainError, "profile probabilities sum to 0");

  Allocation out;
  out.owner.assign(slots.size(), kUnassigned);
  SlotIndex index(slots, n_places, rush);
  Allocator allocator(index, rng);

  const double n = static_cast<double>(slots.size());
  auto constrainedness = [](const CommuterProfileSpec& p) {
    return (p.same_location.value_or(false) ? 2 : 0) + (p.same_time.value_or(false) ? 1 : 0);
  };
  std::vector<const CommuterProfileSpec*> order;
  for (const auto& p : profiles) {
    if (p.family != Family::Random) order.push_back(&p);
  }
  // both flags, then same_location, then same_time, then neither; ties by family then number
  std::stable_sort(order.begin(), order.end(), [&](const auto* a, const auto* b) {
    const int ca = constrainedness(*a), cb = constrainedness(*b);
    if (ca != cb) return ca > cb;
    return a->profile_no < b->profile_no;
  });

  for (const auto* profile : order) {
    const int per = templates_per_consumer(profile->family);
    const auto wanted = static_cast<std::size_t>(std::llround(profile->probability / prob_sum * n / per));
    const ProfileShape shape{family_days(profile->family), profile->same_location.value_or(false),
                             profile->same_time.value_or(false),
                             profile->same_time.value_or(false) &&
                                 (profile->family == Family::Daily || profile->family == Family::Weekday)};
    for (std::size_t c = 0; c < wanted; ++c) {
      std::optional<std::uint32_t> home_place;
      std::optional<int> home_hour;
      auto claimed = allocator.claim(shape, home_place, home_hour);
      if (claimed.empty()) break;  // exhausted: the rest falls to Random
      const auto consumer = static_cast<std::uint32_t>(out.consumers.size());
      out.consumers.push_back({profile->profile_no, home_place, home_hour});
      for (auto t : claimed) out.owner[t] = consumer;
    }
  }

  for (std::uint32_t t = 0; t < slots.size(); ++t) {
    if (out.owner[t] != kUnassigned) continue;
    out.owner[t] = static_cast<std::uint32_t>(out.consumers.size());
    out.consumers.push_back({random_profile->profile_no, std::nullopt, std::nullopt});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vehicles and conditions

VehicleAssignment assign_vehicle(const Consumer& consumer, std::span<const VehicleSpec> vehicles,
                                 const GenerationConfig& config, Rng& rng) {
  if (vehicles.empty()) throw Error(ErrorKind::DomainError, "vehicle catalog is empty");
  const VehicleSpec& base = vehicles[rng.below(vehicles.size())];
  VehicleAssignment out{base.vin, base.vin, false, base};
  if (!rng.bernoulli(config.vehicle_mod_fraction)) return out;
  out.modified = true;

  bool changed = false;
  auto modify = [&](double& dim, double max_delta) {
    if (!rng.bernoulli(config.per_param_mod_prob)) return;
    const double delta = round_to_mm(rng.truncated_normal(max_delta / 2.0, max_delta / 4.0, 0.0, max_delta));
    if (delta > 0.0) changed = true;
    dim = round_to_mm(dim + delta);
  };
  modify(out.spec.height, config.max_mod.height_m);
  modify(out.spec.length, config.max_mod.length_m);
  modify(out.spec.width, config.max_mod.width_m);
  if (changed) {
    out.vin = base.vin + "-M" + std::to_string(consumer.consumer_id);
    out.spec.vin = out.vin;
  }
  return out;
}

double crowd_multiplier(double rp) noexcept { return 1.0 - 0.5 * std::clamp(rp, 0.0, 100.0) / 100.0; }

ConditionContext make_condition_context(const DatasetBundle& bundle, const CrowdDistributions& crowd,
                                        DistanceSpanTable spans, const GenerationConfig& config) {
  spans.validate();
  ConditionContext ctx;
  const std::size_t n_spans = spans.spans.size();
  std::vector<double> weighted(n_spans, 0.0), counts(n_spans, 0.0);
  for (const auto& place : bundle.places) {
    const auto it = crowd.by_place_day_hour.find(place.place_id);
    if (it == crowd.by_place_day_hour.end()) continue;
    for (int d = 0; d < kDaysPerWeek; ++d) {
      for (int h = 0; h < kHoursPerDay; ++h) {
        const double n = static_cast<double>(it->second[d][h]);
        if (n == 0.0) continue;
        const std::size_t s = spans.index_at(h * 3600);
        weighted[s] += n * crowd_multiplier(place.rp[d][h]);
        counts[s] += n;
      }
    }
  }
  ctx.crowd_norm.resize(n_spans);
  for (std::size_t s = 0; s < n_spans; ++s) {
    ctx.crowd_norm[s] = counts[s] > 0.0 ? weighted[s] / counts[s] : 1.0;
  }

  Rng locality = Rng::derive(config.seed, "price.locality");
  for (std::size_t p = 0; p < bundle.places.size(); ++p) {
    ctx.locality_rate.push_back(round_to_cents(locality.uniform(4.0, 12.0)));
    ctx.locality_price.push_back(round_to_cents(locality.uniform(10.0, 40.0)));
  }
  Rng by_span = Rng::derive(config.seed, "price.time_of_day");
  for (std::size_t s = 0; s < n_spans; ++s) ctx.span_price.push_back(round_to_cents(by_span.uniform(10.0, 40.0)));
  ctx.spans = std::move(spans);
  return ctx;
}

namespace {

double draw_expected_time(const PopularityProfile& place, Rng& rng) {
  const double mean = (place.min_time + place.max_time) / 2.0;
  const double sd = (place.max_time - place.min_time) / 4.0;
  return round_to_cents(rng.truncated_normal(mean, sd, 1.0, std::numeric_limits<double>::infinity()));
}

}  // namespace

void attach_conditions(QueryTemplate& tmpl, const Consumer& consumer, const ConditionContext& ctx,
                       std::size_t place_index, const PopularityProfile& place,
                       const GenerationConfig& config, Rng& rng) {
  const std::size_t span_index = ctx.spans.index_at(tmpl.second_of_day());
  const DistanceSpan& span = ctx.spans.spans[span_index];

  // distance
  tmpl.distance.reset();
  tmpl.distance_group.reset();
  const double u = rng.uniform();
  if (u < span.p_dominant + span.p_nondominant) {
    const bool dominant = u < span.p_dominant;
    const double mu = dominant ? span.mu_dominant_m : span.mu_nondominant_m;
    tmpl.distance_group = dominant ? DistanceGroup::Dominant : DistanceGroup::NonDominant;
    double value = 0.0;
    switch (rng.weighted(config.distance_factor_probs)) {
      case 0: {
        const double pref = consumer.static_distance_pref.value_or(kStaticPrefReferenceM);
        value = std::clamp(pref * mu / kStaticPrefReferenceM, kMinDistanceM, kMaxDistanceM);
        break;
      }
      case 1: {
        const double m = crowd_multiplier(place.rp[tmpl.day][tmpl.hour]) / ctx.crowd_norm[span_index];
        value = rng.truncated_normal(mu * m, mu * m / 4.0, kMinDistanceM, kMaxDistanceM);
        break;
      }
      default:
        value = rng.truncated_normal(mu, mu / 4.0, kMinDistanceM, kMaxDistanceM);
    }
    tmpl.distance = round_to_cents(value);
  }

  // expected time (duration check)
  tmpl.expected_time.reset();
  if (rng.bernoulli(config.cond_probs.duration)) tmpl.expected_time = draw_expected_time(place, rng);

  // price
  tmpl.price.reset();
  tmpl.price_category.reset();
  if (rng.bernoulli(config.cond_probs.price)) {
    const auto& pc = config.price_categories;
    const std::array<double, 4> w = {pc.expected_time, pc.random_normal, pc.locality, pc.time_of_day};
    const auto category = static_cast<PriceCategory>(rng.weighted(w));
    double price = 0.0;
    switch (category) {
      case PriceCategory::ExpectedTime: {
        const double minutes = tmpl.expected_time ? *tmpl.expected_time : draw_expected_time(place, rng);
        price = minutes / 60.0 * ctx.locality_rate[place_index];
        break;
      }
      case PriceCategory::RandomNormal:
        price = rng.truncated_normal(config.onstreet_price.mean, config.onstreet_price.sd, 0.0,
                                     std::numeric_limits<double>::infinity());
        break;
      case PriceCategory::Locality:
        price = ctx.locality_price[place_index];
        break;
      case PriceCategory::TimeOfDay:
        price = ctx.span_price[span_index];
        break;
    }
    tmpl.price = round_to_cents(price);
    tmpl.price_category = category;
  }

  // rating
  tmpl.rating.reset();
  if (rng.bernoulli(config.cond_probs.rating)) {
    static constexpr std::array<double, 5> kRatings = {2.5, 3.0, 3.5, 4.0, 4.5};
    tmpl.rating = kRatings[rng.below(kRatings.size())];
  }
}

// ---------------------------------------------------------------------------
// Pipeline

GenerationResult generate(const DatasetBundle& bundle, const GenerationConfig& config) {
  validate(bundle);
  config.validate();

  const CrowdDistributions crowd = crowd_distributions(bundle, config.volume);
  const std::size_t n_places = bundle.places.size();
  const std::size_t n_groups = n_places * kDaysPerWeek;

  // template offsets per (place, day) group, canonical order
  std::vector<std::size_t> offset(n_groups + 1, 0);
  for (std::size_t p = 0; p < n_places; ++p) {
    const auto& cells = crowd.by_place_day_hour.at(bundle.places[p].place_id);
    for (int d = 0; d < kDaysPerWeek; ++d) {
      std::uint64_t n = 0;
      for (int h = 0; h < kHoursPerDay; ++h) n += cells[d][h];
      offset[p * kDaysPerWeek + d + 1] = n;
    }
  }
  std::partial_sum(offset.begin(), offset.end(), offset.begin());

  GenerationResult result;
  auto& templates = result.templates;
  templates.resize(offset.back());

  // schedule + origin
  parallel_for(n_groups, config.threads, [&](std::size_t g) {
    const std::size_t p = g / kDaysPerWeek;
    const int d = static_cast<int>(g % kDaysPerWeek);
    const auto& place = bundle.places[p];
    const auto& cells = crowd.by_place_day_hour.at(place.place_id);
    Rng rng = Rng::derive(config.seed, "schedule", p, static_cast<std::uint64_t>(d));
    std::size_t i = offset[g];
    for (int h = 0; h < kHoursPerDay; ++h) {
      for (auto [minute, second] : assign_execution_time(cells[d][h], h, rng)) {
        QueryTemplate& t = templates[i];
        t.id = i + 1;
        t.address = place.name;
        t.day = d;
        t.hour = h;
        t.minute = minute;
        t.second = second;
        t.origin = sample_origin(config.origin_center, config.origin_radius_m, rng);
        t.query_id = config.query_id;
        ++i;
      }
    }
  });

  // commuter profiles
  std::vector<TemplateSlot> slots(templates.size());
  for (std::size_t g = 0; g < n_groups; ++g) {
    for (std::size_t i = offset[g]; i < offset[g + 1]; ++i) {
      slots[i] = {static_cast<std::uint32_t>(g / kDaysPerWeek), static_cast<std::uint8_t>(g % kDaysPerWeek),
                  static_cast<std::uint8_t>(templates[i].hour)};
    }
  }
  const auto rush = config.rush_windows ? *config.rush_windows : rush_windows(bundle.traffic);
  const auto profiles = normalized_profiles();
  Rng alloc_rng = Rng::derive(config.seed, "allocation");
  Allocation allocation = allocate_commuters(slots, n_places, profiles, rush, alloc_rng);

  Rng consumer_rng = Rng::derive(config.seed, "consumers");
  result.consumers.reserve(allocation.consumers.size());
  for (std::size_t c = 0; c < allocation.consumers.size(); ++c) {
    const auto& a = allocation.consumers[c];
    Consumer consumer;
    consumer.consumer_id = c + 1;
    consumer.profile_no = a.profile_no;
    if (a.home_place) consumer.home_destination = bundle.places[*a.home_place].place_id;
    consumer.home_hour = a.home_hour;
    consumer.static_distance_pref = round_to_cents(consumer_rng.truncated_normal(
        kStaticPrefReferenceM, kStaticPrefReferenceM / 4.0, kMinDistanceM, kMaxDistanceM));
    auto vehicle = assign_vehicle(consumer, bundle.vehicles, config, consumer_rng);
    consumer.vin = vehicle.vin;
    consumer.base_vin = vehicle.base_vin;
    consumer.modified = vehicle.modified;
    consumer.vehicle = vehicle.spec;
    result.consumers.push_back(std::move(consumer));
  }
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const Consumer& c = result.consumers[allocation.owner[i]];
    templates[i].consumer_id = c.consumer_id;
    templates[i].profile_no = c.profile_no;
    templates[i].vin = c.vin;
  }

  // preference conditions
  result.spans = derive_distance_spans(bundle, config.seed, config.k_min, config.spans);
  const ConditionContext ctx = make_condition_context(bundle, crowd, result.spans, config);
  parallel_for(n_groups, config.threads, [&](std::size_t g) {
    const std::size_t p = g / kDaysPerWeek;
    Rng rng = Rng::derive(config.seed, "conditions", p, g % kDaysPerWeek);
    for (std::size_t i = offset[g]; i < offset[g + 1]; ++i) {
      attach_conditions(templates[i], result.consumers[allocation.owner[i]], ctx, p, bundle.places[p],
                        config, rng);
    }
  });
  return result;
}

json GenerationResult::stats() const {
  const double n = static_cast<double>(templates.size());
  std::array<std::uint64_t, 14> per_profile{};
  std::array<std::uint64_t, 14> consumers_per_profile{};
  std::uint64_t rating = 0, price = 0, duration = 0, distance = 0, dominant = 0;
  std::array<std::uint64_t, 4> price_cats{};
  for (const auto& t : templates) {
    if (t.profile_no >= 1 && t.profile_no <= 13) ++per_profile[t.profile_no];
    rating += t.rating.has_value();
    price += t.price.has_value();
    duration += t.expected_time.has_value();
    distance += t.distance.has_value();
    dominant += t.distance_group == DistanceGroup::Dominant;
    if (t.price_category) ++price_cats[static_cast<int>(*t.price_category)];
  }
  std::uint64_t modified = 0;
  for (const auto& c : consumers) {
    if (c.profile_no >= 1 && c.profile_no <= 13) ++consumers_per_profile[c.profile_no];
    modified += c.modified;
  }
  auto share = [&](std::uint64_t k) { return n > 0 ? static_cast<double>(k) / n : 0.0; };

  json profiles = json::array();
  const auto targets = normalized_profiles();
  for (const auto& p : published_profiles()) {
    profiles.push_back({{"profile_no", p.profile_no},
                        {"family", to_string(p.family)},
                        {"templates", per_profile[p.profile_no]},
                        {"consumers", consumers_per_profile[p.profile_no]},
                        {"share", share(per_profile[p.profile_no])},
                        {"published_probability", p.probability},
                        {"target", targets[p.profile_no - 1].probability}});
  }
  json cats = json::object();
  for (int c = 0; c < 4; ++c) cats[to_string(static_cast<PriceCategory>(c))] = price_cats[c];
  return {{"templates", templates.size()},
          {"consumers", consumers.size()},
          {"profiles", profiles},
          {"conditions", {{"rating", share(rating)},
                          {"price", share(price)},
                          {"expected_time", share(duration)},
                          {"distance", share(distance)}}},
          {"distance_dominant_share", distance ? static_cast<double>(dominant) / distance : 0.0},
          {"price_categories", cats},
          {"vehicles_modified_share",
           consumers.empty() ? 0.0 : static_cast<double>(modified) / consumers.size()}};
}

}  // namespace cqsim
