// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cqsim/executor.hpp"
#include "cqsim/generator.hpp"
#include "cqsim/harness.hpp"
#include "cqsim/render.hpp"
#include "cqsim/stats.hpp"
#include "cqsim/store.hpp"
#include "support.hpp"

using namespace cqsim;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::map<std::string, std::string> names_by_id(const DatasetBundle& b) {
  std::map<std::string, std::string> out;
  for (const auto& p : b.places) out[p.place_id] = p.name;
  return out;
}

// Shared by criteria 3-6.
struct FixtureRun {
  DatasetBundle bundle;
  GenerationConfig config;
  GenerationResult result;
};

const FixtureRun& large_run() {
  static const FixtureRun run = [] {
    FixtureRun r;
    r.bundle = make_fixtures({2024, 10, 20, 50, kDefaultCenter, 2000.0});
    r.config.seed = 2024;
    r.config.volume.alpha = 2.0;
    r.config.threads = 1;
    r.result = generate(r.bundle, r.config);
    return r;
  }();
  return run;
}

Verdict criterion1() {
  const auto n = query_count(70, 5, 0.4);
  return {n == 140, "query_count(70, 5, 0.4) = " + std::to_string(n)};
}

Verdict criterion2() {
  int bundles = 0, total_mismatch = 0, cell_mismatch = 0;
  std::uint64_t templates = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto b = make_fixtures({seed, 2 + static_cast<int>(seed % 4), 8, 10, kDefaultCenter, 1500.0});
    GenerationConfig c;
    c.seed = seed;
    c.volume.alpha = 0.25 + 0.05 * static_cast<double>(seed % 7);
    c.volume.p_query = 0.3 + 0.1 * static_cast<double>(seed % 5);
    const auto r = generate(b, c);
    ++bundles;
    templates += r.templates.size();

    std::map<std::string, std::array<std::array<std::uint64_t, 24>, 7>> observed;
    for (const auto& t : r.templates) ++observed[t.address][t.day][t.hour];
    std::uint64_t expected_total = 0;
    for (const auto& p : b.places) {
      for (int d = 0; d < 7; ++d) {
        for (int h = 0; h < 24; ++h) {
          const auto want = testing::oracle_query_count(p.rp[d][h], c.volume.alpha, c.volume.p_query);
          expected_total += want;
          const auto it = observed.find(p.name);
          const std::uint64_t got = it == observed.end() ? 0 : it->second[d][h];
          cell_mismatch += got != want;
        }
      }
    }
    total_mismatch += expected_total != r.templates.size();
  }
  return {bundles >= 20 && total_mismatch == 0 && cell_mismatch == 0,
          std::to_string(bundles) + " bundles, " + std::to_string(templates) + " templates, " +
              std::to_string(total_mismatch) + " total and " + std::to_string(cell_mismatch) + " cell mismatches"};
}

Verdict criterion3() {
  const auto& run = large_run();
  const auto& r = run.result;
  const double n = static_cast<double>(r.templates.size());
  std::array<std::uint64_t, 14> counts{};
  for (const auto& t : r.templates) ++counts[t.profile_no];
  const auto targets = normalized_profiles();
  double worst_published = 0.0, worst_target = 0.0;
  for (const auto& p : published_profiles()) {
    const double share = static_cast<double>(counts[p.profile_no]) / n;
    worst_published = std::max(worst_published, std::abs(share - p.probability));
    worst_target = std::max(worst_target, std::abs(share - targets[p.profile_no - 1].probability));
  }

  const auto name_of = names_by_id(run.bundle);
  std::map<std::uint64_t, std::vector<const QueryTemplate*>> owned;
  for (const auto& t : r.templates) owned[t.consumer_id].push_back(&t);
  std::size_t violations = owned.size() == r.consumers.size() ? 0 : 1;
  for (const auto& c : r.consumers) {
    const auto& spec = published_profiles()[c.profile_no - 1];
    const auto it = owned.find(c.consumer_id);
    if (it == owned.end()) {
      ++violations;
      continue;
    }
    std::vector<int> days;
    for (const auto* t : it->second) {
      days.push_back(t->day);
      violations += t->profile_no != c.profile_no;
      violations += spec.same_time.value_or(false) && t->hour != c.home_hour.value_or(-1);
      violations += spec.same_location.value_or(false) &&
                    (!c.home_destination || t->address != name_of.at(*c.home_destination));
    }
    std::sort(days.begin(), days.end());
    const auto fam = family_days(spec.family);
    if (spec.family == Family::Random) {
      violations += it->second.size() != 1;
    } else {
      violations += days != std::vector<int>(fam.begin(), fam.end());
    }
  }
  return {n >= 100'000 && worst_published <= 0.015 && violations == 0,
          std::to_string(r.templates.size()) + " templates, max |share - published| = " +
              fmt("%.4f", worst_published) + " (vs normalized " + fmt("%.4f", worst_target) + "), " +
              std::to_string(violations) + " recurrence violations"};
}

Verdict criterion4() {
  const auto& r = large_run().result;
  const double n = static_cast<double>(r.templates.size());
  double rating = 0, price = 0, duration = 0;
  for (const auto& t : r.templates) {
    rating += t.rating.has_value();
    price += t.price.has_value();
    duration += t.expected_time.has_value();
  }
  rating /= n;
  price /= n;
  duration /= n;
  const bool ok = std::abs(rating - 0.5003) <= 0.01 && std::abs(price - 0.8004) <= 0.01 &&
                  std::abs(duration - 0.2003) <= 0.01;
  return {ok, "rating " + fmt("%.4f", rating) + ", price " + fmt("%.4f", price) + ", duration " +
                  fmt("%.4f", duration)};
}

Verdict criterion5() {
  const auto& r = large_run().result;
  const auto table = paper_distance_spans(false);
  struct Acc {
    double n = 0, dominant = 0, sum_d = 0, sum_n = 0;
  };
  std::vector<Acc> acc(table.spans.size());
  for (const auto& t : r.templates) {
    if (!t.distance) continue;
    auto& a = acc[table.index_at(t.second_of_day())];
    a.n += 1;
    if (t.distance_group == DistanceGroup::Dominant) {
      a.dominant += 1;
      a.sum_d += *t.distance;
    } else {
      a.sum_n += *t.distance;
    }
  }
  bool ok = true;
  double worst_share = 0, worst_mean = 0, worst_e = 0;
  for (std::size_t i = 0; i < table.spans.size(); ++i) {
    const auto& s = table.spans[i];
    const auto& a = acc[i];
    if (a.n == 0 || a.dominant == 0 || a.dominant == a.n) {
      ok = false;
      continue;
    }
    const double share = a.dominant / a.n;
    const double want = s.p_dominant / (s.p_dominant + s.p_nondominant);
    worst_share = std::max(worst_share, std::abs(share - want));
    const double md = a.sum_d / a.dominant;
    const double mn = a.sum_n / (a.n - a.dominant);
    worst_mean = std::max({worst_mean, std::abs(md / s.mu_dominant_m - 1), std::abs(mn / s.mu_nondominant_m - 1)});
    if (s.recorded_expectation_m) {
      worst_e = std::max(worst_e, std::abs(s.expectation_m() / *s.recorded_expectation_m - 1));
    } else {
      ok = false;
    }
  }
  ok = ok && worst_share <= 0.02 && worst_mean <= 0.05 && worst_e <= 0.01;
  return {ok, "max share error " + fmt("%.4f", worst_share) + ", max mean error " + fmt("%.2f%%", 100 * worst_mean) +
                  ", max E error " + fmt("%.2f%%", 100 * worst_e)};
}

Verdict criterion6() {
  const auto& run = large_run();
  const double radius = run.config.origin_radius_m;
  const auto center = run.config.origin_center;
  std::uint64_t outside = 0, inner = 0, n = 0;
  for (const auto& t : run.result.templates) {
    const double d = haversine_m(center, t.origin);
    outside += d > radius + 1e-6;
    inner += d <= radius / 2;
    ++n;
  }
  Rng rng(99);
  for (int i = 0; i < 50'000; ++i) {
    const double d = haversine_m(center, sample_origin(center, radius, rng));
    outside += d > radius + 1e-6;
    inner += d <= radius / 2;
    ++n;
  }
  const double frac = static_cast<double>(inner) / static_cast<double>(n);
  return {outside == 0 && n >= 10'000 && std::abs(frac - 0.25) <= 0.02,
          std::to_string(n) + " origins, " + std::to_string(outside) + " outside, within half radius " +
              fmt("%.4f", frac)};
}

Verdict criterion7() {
  testing::TempDir dir("cqsim-accept");
  const auto bundle = make_fixtures({7, 6, 15, 30, kDefaultCenter, 2000.0});
  std::vector<std::string> digests;
  std::set<std::string> blobs;
  for (unsigned threads : {1u, 2u, 4u}) {
    GenerationConfig c;
    c.seed = 7;
    c.volume.alpha = 1.0;
    c.threads = threads;
    auto r = generate(bundle, c);
    PersistOptions o;
    o.seed = c.seed;
    o.config = to_json(c);
    o.config_digest = config_digest(c, bundle);
    o.dataset_digest = dataset_digest(bundle);
    o.created_at = 1'700'000'000;
    o.stats = r.stats();
    o.consumers = r.consumers;
    const auto out = dir / ("t" + std::to_string(threads));
    const auto store = persist(std::move(r.templates), out, o);
    digests.push_back(store.manifest().config_digest);
    const auto paths = StorePaths::in(out);
    blobs.insert(testing::slurp(paths.manifest) + '\0' + testing::slurp(paths.templates) + '\0' +
                 testing::slurp(paths.consumers));
  }
  const bool same_digest = std::all_of(digests.begin(), digests.end(), [&](auto& d) { return d == digests[0]; });
  return {blobs.size() == 1 && same_digest,
          "threads 1/2/4: " + std::to_string(blobs.size()) + " distinct store byte images, digest " +
              digests[0].substr(0, 12)};
}

Verdict criterion8() {
  testing::TempDir dir("cqsim-accept");
  const auto bundle = make_fixtures({8, 10, 20, 50, kDefaultCenter, 2000.0});
  GenerationConfig c;
  c.seed = 8;
  c.volume.alpha = 0.5;
  auto r = generate(bundle, c);
  PersistOptions o;
  o.seed = c.seed;
  o.config = to_json(c);
  const auto store = persist(std::move(r.templates), dir / "store", o);

  SinkOptions so;
  so.log_path = dir / "sink.ndjson";
  Sink sink(so);
  sink.start();
  RunConfig cfg;
  cfg.endpoint = sink.url();
  cfg.compression = 5040;
  cfg.max_in_flight = 4;
  const auto report = run(store, QueryRegistry::builtin(), cfg);
  sink.stop();
  const auto log = read_sink_log(so.log_path);
  const auto fid = fidelity_report(store, log, report);

  const auto ok_count = report.count(DispatchOutcome::Ok);
  const double within = report.within_epsilon_fraction();
  const std::uint64_t missing = fid["totals"]["missing"];
  const std::uint64_t duplicates = fid["totals"]["duplicates"];
  const bool hourly = fid["hourly_counts_match"];
  const bool ok = store.size() > 0 && report.dispatches.size() == store.size() && ok_count == store.size() &&
                  missing == 0 && duplicates == 0 && within >= 0.999 && hourly && report.complete;
  return {ok, std::to_string(store.size()) + " stored, " + std::to_string(ok_count) + " dispatched at 5040x, " +
                  std::to_string(missing) + " missing, " + std::to_string(duplicates) + " duplicates, " +
                  fmt("%.3f%%", 100 * within) + " within " + fmt("%.0f s", cfg.epsilon_seconds()) +
                  ", hourly counts " + (hourly ? "equal" : "differ")};
}

Verdict criterion9() {
  const auto bundle = make_fixtures({9, 5, 10, 20, kDefaultCenter, 2000.0});
  GenerationConfig c;
  c.seed = 9;
  c.volume.alpha = 1.0;
  auto r = generate(bundle, c);
  StoreManifest m;
  m.record_count = r.templates.size();
  // the boundary example sits alongside the generated records
  std::uint64_t next = r.templates.size() + 1;
  for (int s : {10 * 3600, 10 * 3600 + 8 * 60 + 20, 10 * 3600 + 9 * 60 + 59, 10 * 3600 + 10 * 60}) {
    QueryTemplate t = r.templates.front();
    t.id = next++;
    t.day = 0;
    t.hour = s / 3600;
    t.minute = s / 60 % 60;
    t.second = s % 60;
    r.templates.push_back(t);
  }
  const std::uint64_t boundary_id = r.templates.size() - 2;  // 10:08:20
  m.record_count = r.templates.size();
  std::sort(r.templates.begin(), r.templates.end(), [](const auto& a, const auto& b) {
    return std::make_pair(a.week_second(), a.id) < std::make_pair(b.week_second(), b.id);
  });
  const TemplateStore store(m, std::move(r.templates));

  std::set<std::uint64_t> seen;
  std::size_t overlaps = 0, fetched = 0, windows = 0;
  bool boundary_in_1000 = false;
  for (int day = 0; day < 7; ++day) {
    for (int start = 0; start < kSecondsPerDay; start += 600) {
      ++windows;
      for (const auto& rec : store.fetch_window(day, start, 600)) {
        ++fetched;
        overlaps += !seen.insert(rec.id).second;
        if (rec.id == boundary_id && day == 0 && start == 36'000) boundary_in_1000 = true;
      }
    }
  }
  const bool ok = overlaps == 0 && fetched == store.size() && seen.size() == store.size() && boundary_in_1000;
  return {ok, std::to_string(windows) + " windows, " + std::to_string(fetched) + " of " +
                  std::to_string(store.size()) + " records fetched, " + std::to_string(overlaps) +
                  " overlaps, 10:08:20 " + (boundary_in_1000 ? "in" : "not in") + " the 10:00 window"};
}

Verdict criterion10() {
  testing::TempDir dir("cqsim-accept");
  const auto bundle = make_fixtures({10, 4, 10, 20, kDefaultCenter, 2000.0});
  GenerationConfig c;
  c.seed = 10;
  c.volume.alpha = 1.0;
  auto r = generate(bundle, c);
  const auto store = persist(std::move(r.templates), dir / "store", PersistOptions{});
  const auto csv = dir / "templates.csv";
  const auto rows = export_csv(store, csv);
  const std::string text = testing::slurp(csv);
  const std::string header = text.substr(0, text.find('\n'));
  const bool header_ok = header == kCsvHeader;
  const auto back = import_csv(csv);
  std::size_t differing = back.size() == store.size() ? 0 : 1;
  for (std::size_t i = 0; i < std::min(back.size(), store.size()); ++i) {
    differing += !same_published_fields(back[i], store.records()[i]);
  }
  return {header_ok && differing == 0 && rows == store.size(),
          std::to_string(rows) + " rows, header " + (header_ok ? "exact" : "differs") + ", " +
              std::to_string(differing) + " differing records"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"query count worked example", criterion1},
      {"cardinality oracle over seeded bundles", criterion2},
      {"commuter profile shares and recurrence", criterion3},
      {"condition presence rates", criterion4},
      {"distance spans", criterion5},
      {"origin geometry", criterion6},
      {"determinism across thread counts", criterion7},
      {"full-week replay fidelity", criterion8},
      {"window partition", criterion9},
      {"CSV round-trip", criterion10},
  };
  int failed = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !v.pass;
    std::printf("%s criterion %zu: %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d of %zu criteria passed in %.1f s\n", static_cast<int>(criteria.size()) - failed, criteria.size(),
              total);
  return failed == 0 ? 0 : 1;
}
