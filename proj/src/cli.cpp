#include "cqsim/cli.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>
#include <type_traits>

#include <CLI11.hpp>

#include "cqsim/errors.hpp"
#include "cqsim/executor.hpp"
#include "cqsim/harness.hpp"
#include "cqsim/render.hpp"
#include "cqsim/stats.hpp"
#include "cqsim/store.hpp"

namespace cqsim::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted.store(true); }

struct SignalGuard {
  using Handler = void (*)(int);
  Handler old_int, old_term;
  SignalGuard() {
    g_interrupted.store(false);
    old_int = std::signal(SIGINT, on_signal);
    old_term = std::signal(SIGTERM, on_signal);
  }
  ~SignalGuard() {
    std::signal(SIGINT, old_int);
    std::signal(SIGTERM, old_term);
  }
};

struct DataOpts {
  std::string data_dir;
  std::string places;
  std::string carparks;
  std::string vehicles;
  std::string traffic;
};

struct BootstrapOpts {
  std::string out;
  int places = 10;
  int carparks = 20;
  int vehicles = 50;
  double center_lat = kDefaultCenter.lat;
  double center_lng = kDefaultCenter.lng;
  double radius = 2000.0;
};

struct GenerateOpts {
  DataOpts data;
  double alpha = 10.0;
  double p_query = 1.0;
  std::vector<std::string> alpha_at;
  std::vector<std::string> p_query_at;
  double radius = 2000.0;
  double center_lat = kDefaultCenter.lat;
  double center_lng = kDefaultCenter.lng;
  double cond_rating = 0.5003;
  double cond_price = 0.8004;
  double cond_duration = 0.2003;
  double mod_fraction = 0.5;
  double mod_param_prob = 0.5;
  double max_mod_height = 0.30;
  double max_mod_length = 0.50;
  double max_mod_width = 0.25;
  double price_expected_time = 0.16;
  double price_random_normal = 0.64;
  double price_locality = 0.10;
  double price_time_of_day = 0.10;
  double onstreet_mean = 20.0;
  double onstreet_sd = 6.0;
  std::vector<std::string> rush;
  std::vector<double> factor_probs{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::string span_mode = "paper";
  bool verbatim_row5 = false;
  double distance_presence = 0.25;
  int k_min = 2;
  unsigned threads = 1;
  std::string query_id{kDefaultQueryId};
  std::string out;
  std::int64_t created_at = -1;
};

struct AnalyzeOpts {
  DataOpts data;
  double alpha = 10.0;
  double p_query = 1.0;
  int k_min = 2;
  std::string span_mode = "paper";
  std::string store;
  std::string destination;
  std::string out;
};

struct ExportOpts {
  std::string store;
  std::string out;
};

struct RunOpts {
  std::string store;
  std::string registry;
  std::string endpoint;
  double compression = 1.0;
  int window_seconds = 600;
  std::string start = "0:00:00";
  std::string duration = "7d";
  unsigned max_in_flight = 32;
  int timeout_ms = 5000;
  std::string report;
};

struct SinkOpts {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string log;
  int delay_ms = 0;
  unsigned threads = 128;
  std::string duration = "0";
};

struct ReportOpts {
  std::string store;
  std::string log;
  std::string run_report;
  std::string out;
};

template <typename T>
std::string config_value(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return json(v).dump();
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(v);
  } else {
    if (v.empty()) return "";
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + config_value(v[i]);
    return out + "]";
  }
}

struct Parser {
  CLI::App app{"Context query workload synthesizer and replay engine", "cqsim"};
  std::uint64_t seed = 1;
  BootstrapOpts bootstrap;
  GenerateOpts generate;
  AnalyzeOpts analyze;
  ExportOpts export_;
  RunOpts run;
  SinkOpts sink;
  ReportOpts report;

  CLI::App* bootstrap_cmd = nullptr;
  CLI::App* generate_cmd = nullptr;
  CLI::App* analyze_cmd = nullptr;
  CLI::App* export_cmd = nullptr;
  CLI::App* run_cmd = nullptr;
  CLI::App* sink_cmd = nullptr;
  CLI::App* report_cmd = nullptr;

  struct Bound {
    const CLI::App* owner;
    std::string key;
    std::function<std::string()> value;
  };
  std::vector<Bound> bound;

  template <typename T>
  CLI::Option* add(CLI::App* cmd, const std::string& name, T& var, const std::string& description) {
    auto* opt = cmd->add_option(name, var, description);
    bound.push_back({cmd, opt->get_single_name(), [&var] { return config_value(var); }});
    return opt;
  }

  Parser(const Parser&) = delete;
  Parser& operator=(const Parser&) = delete;

  Parser() {
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "key = value file mirroring the command line flags");
    add(&app, "--seed", seed, "Seed for every random stream");
    app.require_subcommand(1);
    app.fallthrough();

    bootstrap_cmd = app.add_subcommand("bootstrap", "Write a synthetic dataset bundle");
    add(bootstrap_cmd, "--out", bootstrap.out, "Output directory")->required();
    add(bootstrap_cmd, "--n-places", bootstrap.places, "Destinations")->check(CLI::PositiveNumber);
    add(bootstrap_cmd, "--n-carparks", bootstrap.carparks, "Car parks")->check(CLI::PositiveNumber);
    add(bootstrap_cmd, "--n-vehicles", bootstrap.vehicles, "Vehicle specs")->check(CLI::PositiveNumber);
    add(bootstrap_cmd, "--center-lat", bootstrap.center_lat, "Area center latitude");
    add(bootstrap_cmd, "--center-lng", bootstrap.center_lng, "Area center longitude");
    add(bootstrap_cmd, "--radius", bootstrap.radius, "Area radius in meters");

    generate_cmd = app.add_subcommand("generate", "Synthesize and persist query templates");
    add_data_options(generate_cmd, generate.data);
    auto* g = generate_cmd;
    auto& go = generate;
    add(g, "--alpha", go.alpha, "Relative popularity multiplier");
    add(g, "--p-query", go.p_query, "Probability a crowd member queries");
    add(g, "--alpha-at", go.alpha_at, "Override as PLACE_ID:HOUR=VALUE");
    add(g, "--p-query-at", go.p_query_at, "Override as PLACE_ID:HOUR=VALUE");
    add(g, "--radius", go.radius, "Origin radius around the center in meters");
    add(g, "--center-lat", go.center_lat, "Origin center latitude (default: fixture.json or CBD)");
    add(g, "--center-lng", go.center_lng, "Origin center longitude");
    add(g, "--cond-rating", go.cond_rating, "Share of templates with a rating condition");
    add(g, "--cond-price", go.cond_price, "Share of templates with a price condition");
    add(g, "--cond-duration", go.cond_duration, "Share of templates with an expected_time condition");
    add(g, "--mod-fraction", go.mod_fraction, "Share of consumers with a modified vehicle");
    add(g, "--mod-param-prob", go.mod_param_prob, "Per-dimension modification probability");
    add(g, "--max-mod-height", go.max_mod_height, "Largest height increase in meters");
    add(g, "--max-mod-length", go.max_mod_length, "Largest length increase in meters");
    add(g, "--max-mod-width", go.max_mod_width, "Largest width increase in meters");
    add(g, "--price-expected-time", go.price_expected_time, "Price category share: expected time");
    add(g, "--price-random-normal", go.price_random_normal, "Price category share: on-street normal");
    add(g, "--price-locality", go.price_locality, "Price category share: locality");
    add(g, "--price-time-of-day", go.price_time_of_day, "Price category share: time of day");
    add(g, "--onstreet-mean", go.onstreet_mean, "On-street price mean (AUD)");
    add(g, "--onstreet-sd", go.onstreet_sd, "On-street price standard deviation (AUD)");
    add(g, "--rush", go.rush, "Rush hour window START-END (default: from traffic, else 7-9 16-18)");
    add(g, "--factor-probs", go.factor_probs, "Distance factor shares: static crowd random")
        ->expected(3)
        ->delimiter(',');
    add(g, "--span-mode", go.span_mode, "Distance spans: paper or derived")
        ->check(CLI::IsMember({"paper", "derived"}));
    g->add_flag("--verbatim-row5", go.verbatim_row5, "Keep the printed 0.005 in the 01-05 span");
    bound.push_back({g, "verbatim-row5", [&go] { return config_value(go.verbatim_row5); }});
    add(g, "--distance-presence", go.distance_presence, "Derived spans: base distance presence");
    add(g, "--k-min", go.k_min, "Available car parks needed for the derived radius");
    add(g, "--threads", go.threads, "Worker threads (output does not depend on it)")
        ->check(CLI::PositiveNumber);
    add(g, "--query-id", go.query_id, "query_id stamped on every template");
    add(g, "--created-at", go.created_at, "Manifest timestamp (default: SOURCE_DATE_EPOCH or now)");
    add(g, "--out", go.out, "Store directory")->required();

    analyze_cmd = app.add_subcommand("analyze", "Dataset statistics and store curves");
    add_data_options(analyze_cmd, analyze.data);
    add(analyze_cmd, "--alpha", analyze.alpha, "Relative popularity multiplier");
    add(analyze_cmd, "--p-query", analyze.p_query, "Probability a crowd member queries");
    add(analyze_cmd, "--k-min", analyze.k_min, "Available car parks needed for the derived radius");
    add(analyze_cmd, "--span-mode", analyze.span_mode, "Distance spans: paper or derived")
        ->check(CLI::IsMember({"paper", "derived"}));
    add(analyze_cmd, "--store", analyze.store, "Also report per-hour counts from this store");
    add(analyze_cmd, "--destination", analyze.destination, "Restrict store curves to one address");
    add(analyze_cmd, "--out", analyze.out, "Write JSON here instead of stdout");

    export_cmd = app.add_subcommand("export", "Write a store as CSV");
    add(export_cmd, "--store", export_.store, "Store directory")->required();
    add(export_cmd, "--out", export_.out, "CSV path")->required();

    run_cmd = app.add_subcommand("run", "Replay a store against an HTTP endpoint");
    add(run_cmd, "--store", run.store, "Store directory")->required();
    add(run_cmd, "--registry", run.registry, "Query registry JSON (default: built-in queries)");
    add(run_cmd, "--endpoint", run.endpoint, "POST target, http://host:port/path")->required();
    add(run_cmd, "--compression", run.compression, "Simulated seconds per wall-clock second");
    add(run_cmd, "--window-seconds", run.window_seconds, "Scheduler period in simulated seconds");
    add(run_cmd, "--start", run.start, "Start as DAY:HH:MM (DAY 0-6 or Mon..Sun)");
    add(run_cmd, "--duration", run.duration, "Simulated duration, e.g. 3600, 90m, 24h, 7d");
    add(run_cmd, "--max-in-flight", run.max_in_flight, "Concurrent request bound")
        ->check(CLI::PositiveNumber);
    add(run_cmd, "--timeout-ms", run.timeout_ms, "Request timeout")->check(CLI::PositiveNumber);
    add(run_cmd, "--report", run.report, "Write the run report JSON here");

    sink_cmd = app.add_subcommand("sink", "Receive and log POSTed queries");
    add(sink_cmd, "--host", sink.host, "Bind address");
    add(sink_cmd, "--port", sink.port, "Port, 0 for any free port")->check(CLI::Range(0, 65535));
    add(sink_cmd, "--log", sink.log, "NDJSON log path");
    add(sink_cmd, "--delay-ms", sink.delay_ms, "Fixed response delay")->check(CLI::NonNegativeNumber);
    add(sink_cmd, "--threads", sink.threads, "Handler threads")->check(CLI::PositiveNumber);
    add(sink_cmd, "--duration", sink.duration, "Serve this long (wall clock), 0 until interrupted");

    report_cmd = app.add_subcommand("report", "Compare a sink log with the stored schedule");
    add(report_cmd, "--store", report.store, "Store directory")->required();
    add(report_cmd, "--log", report.log, "Sink NDJSON log")->required();
    add(report_cmd, "--run-report", report.run_report, "Report written by run")->required();
    add(report_cmd, "--out", report.out, "Write JSON here instead of stdout");
  }

  void add_data_options(CLI::App* cmd, DataOpts& d) {
    add(cmd, "--data-dir", d.data_dir, "Directory holding places.json, carparks.csv, vehicles.csv");
    add(cmd, "--places", d.places, "Popularity profiles (JSON)");
    add(cmd, "--carparks", d.carparks, "Car parks (CSV)");
    add(cmd, "--vehicles", d.vehicles, "Vehicle specs (CSV)");
    add(cmd, "--traffic", d.traffic, "Weekly traffic matrix (CSV)");
  }

  void parse(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("cqsim");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  }
};

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorKind::DomainError, message); }

double parse_number(const std::string& text, const std::string& what) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) invalid(what + ": not a number '" + text + "'");
  return v;
}

int parse_int(std::string_view text, const std::string& what) {
  int v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) invalid(what + ": not an integer '" + std::string(text) + "'");
  return v;
}

// PLACE_ID:HOUR=VALUE
std::map<std::pair<std::string, int>, double> parse_overrides(const std::vector<std::string>& items,
                                                               const std::string& flag) {
  std::map<std::pair<std::string, int>, double> out;
  for (const auto& item : items) {
    const auto eq = item.rfind('=');
    const auto colon = item.rfind(':', eq);
    if (eq == std::string::npos || colon == std::string::npos || colon == 0) {
      invalid(flag + ": expected PLACE_ID:HOUR=VALUE, got '" + item + "'");
    }
    const int hour = parse_int(std::string_view(item).substr(colon + 1, eq - colon - 1), flag);
    out[{item.substr(0, colon), hour}] = parse_number(item.substr(eq + 1), flag);
  }
  return out;
}

HourWindow parse_window(const std::string& text) {
  const auto dash = text.find('-');
  if (dash == std::string::npos) invalid("--rush: expected START-END, got '" + text + "'");
  return {parse_int(std::string_view(text).substr(0, dash), "--rush"),
          parse_int(std::string_view(text).substr(dash + 1), "--rush")};
}

int parse_day(std::string_view text) {
  if (text.size() == 1 && text[0] >= '0' && text[0] <= '6') return text[0] - '0';
  for (int d = 0; d < kDaysPerWeek; ++d) {
    const std::string_view name = kDayNames[d];
    if (text.size() >= 3 && text.size() <= name.size()) {
      bool match = true;
      for (std::size_t i = 0; i < text.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[i])) != std::tolower(static_cast<unsigned char>(name[i]))) {
          match = false;
          break;
        }
      }
      if (match) return d;
    }
  }
  invalid("--start: unknown day '" + std::string(text) + "'");
}

std::pair<int, int> parse_start(const std::string& text) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
  if (c2 == std::string::npos) invalid("--start: expected DAY:HH:MM, got '" + text + "'");
  const int day = parse_day(std::string_view(text).substr(0, c1));
  const int hh = parse_int(std::string_view(text).substr(c1 + 1, c2 - c1 - 1), "--start");
  const int mm = parse_int(std::string_view(text).substr(c2 + 1), "--start");
  if (hh < 0 || hh > 23 || mm < 0 || mm > 59) invalid("--start: time out of range '" + text + "'");
  return {day, hh * 3600 + mm * 60};
}

int parse_duration(const std::string& text, const std::string& flag) {
  if (text.empty()) invalid(flag + ": empty duration");
  int unit = 1;
  std::string_view digits(text);
  switch (text.back()) {
    case 's': unit = 1; digits.remove_suffix(1); break;
    case 'm': unit = 60; digits.remove_suffix(1); break;
    case 'h': unit = 3600; digits.remove_suffix(1); break;
    case 'd': unit = kSecondsPerDay; digits.remove_suffix(1); break;
    default: break;
  }
  const int v = parse_int(digits, flag);
  if (v < 0 || v > kSecondsPerWeek / unit) invalid(flag + ": out of range '" + text + "'");
  return v * unit;
}

GenerationConfig build_generation_config(const Parser& p) {
  const auto& o = p.generate;
  GenerationConfig c;
  c.volume.alpha = o.alpha;
  c.volume.p_query = o.p_query;
  c.volume.alpha_at = parse_overrides(o.alpha_at, "--alpha-at");
  c.volume.p_query_at = parse_overrides(o.p_query_at, "--p-query-at");
  c.origin_center = {o.center_lat, o.center_lng};
  c.origin_radius_m = o.radius;
  c.cond_probs = {o.cond_rating, o.cond_price, o.cond_duration};
  c.vehicle_mod_fraction = o.mod_fraction;
  c.per_param_mod_prob = o.mod_param_prob;
  c.max_mod = {o.max_mod_height, o.max_mod_length, o.max_mod_width};
  c.price_categories = {o.price_expected_time, o.price_random_normal, o.price_locality, o.price_time_of_day};
  c.onstreet_price = {o.onstreet_mean, o.onstreet_sd};
  if (!o.rush.empty()) {
    std::vector<HourWindow> windows;
    for (const auto& r : o.rush) windows.push_back(parse_window(r));
    c.rush_windows = std::move(windows);
  }
  if (o.factor_probs.size() != 3) invalid("--factor-probs: expected three values");
  std::copy(o.factor_probs.begin(), o.factor_probs.end(), c.distance_factor_probs.begin());
  c.spans.use_paper_table = o.span_mode == "paper";
  c.spans.verbatim_row5 = o.verbatim_row5;
  c.spans.distance_presence = o.distance_presence;
  c.k_min = o.k_min;
  c.query_id = o.query_id;
  c.seed = p.seed;
  c.threads = o.threads;
  return c;
}

DatasetBundle load_bundle(const DataOpts& d, const GeoPoint& center) {
  fs::path places = d.places, carparks = d.carparks, vehicles = d.vehicles;
  if (!d.data_dir.empty()) {
    const auto paths = FixturePaths::in(d.data_dir);
    if (places.empty()) places = paths.places;
    if (carparks.empty()) carparks = paths.carparks;
    if (vehicles.empty()) vehicles = paths.vehicles;
  }
  if (places.empty() || carparks.empty() || vehicles.empty()) {
    invalid("datasets: give --data-dir or all of --places, --carparks, --vehicles");
  }
  IngestConfig cfg;
  cfg.center = center;
  if (!d.traffic.empty()) cfg.traffic_path = fs::path(d.traffic);
  return load_datasets(places, carparks, vehicles, cfg);
}

std::optional<GeoPoint> fixture_center(const DataOpts& d) {
  if (d.data_dir.empty()) return std::nullopt;
  const auto meta = FixturePaths::in(d.data_dir).meta;
  std::ifstream in(meta);
  if (!in) return std::nullopt;
  try {
    const auto j = json::parse(in);
    return GeoPoint{j.at("center").at("lat").get<double>(), j.at("center").at("lng").get<double>()};
  } catch (const json::exception&) {
    throw Error(ErrorKind::SchemaViolation, meta.string() + ": unreadable center");
  }
}

std::int64_t created_at(std::int64_t flag) {
  if (flag >= 0) return flag;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    std::int64_t v = 0;
    const std::string_view s(env);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size()) return v;
    invalid("SOURCE_DATE_EPOCH is not an integer");
  }
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void emit(const json& doc, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << doc.dump(2) << '\n';
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::IOError, "cannot write " + path);
  f << doc.dump(2) << '\n';
  f.flush();
  if (!f) throw Error(ErrorKind::IOError, "cannot write " + path);
}

json manifest_summary(const StoreManifest& m) {
  return json{{"record_count", m.record_count},
              {"seed", m.seed},
              {"config_digest", m.config_digest},
              {"dataset_digest", m.dataset_digest},
              {"created_at", m.created_at},
              {"stats", m.stats}};
}

int cmd_bootstrap(const Parser& p, std::ostream& out) {
  const auto& o = p.bootstrap;
  FixtureSpec spec;
  spec.seed = p.seed;
  spec.n_places = o.places;
  spec.n_carparks = o.carparks;
  spec.n_vehicles = o.vehicles;
  spec.center = {o.center_lat, o.center_lng};
  spec.radius_m = o.radius;
  if (!is_valid(spec.center)) invalid("--center-lat/--center-lng out of range");
  if (!(spec.radius_m > 0.0)) invalid("--radius must be > 0");
  const auto bundle = bootstrap_fixtures(spec, o.out);
  out << json{{"out", o.out},
              {"seed", spec.seed},
              {"places", bundle.places.size()},
              {"carparks", bundle.carparks.size()},
              {"vehicles", bundle.vehicles.size()},
              {"templates_at_default_volume", total_query_count(bundle, QueryVolumeConfig{})}}
             .dump(2)
      << '\n';
  return 0;
}

int cmd_generate(const Parser& p, std::ostream& out) {
  GenerationConfig config = build_generation_config(p);
  const auto* lat = p.generate_cmd->get_option("--center-lat");
  const auto* lng = p.generate_cmd->get_option("--center-lng");
  if (lat->count() == 0 && lng->count() == 0) {
    if (auto c = fixture_center(p.generate.data)) config.origin_center = *c;
  }
  config.validate();
  const auto bundle = load_bundle(p.generate.data, config.origin_center);
  auto result = generate(bundle, config);
  PersistOptions options;
  options.seed = config.seed;
  options.config = to_json(config);
  options.config_digest = config_digest(config, bundle);
  options.dataset_digest = dataset_digest(bundle);
  options.created_at = created_at(p.generate.created_at);
  options.stats = result.stats();
  options.consumers = result.consumers;
  const auto store = persist(std::move(result.templates), p.generate.out, options);
  auto summary = manifest_summary(store.manifest());
  summary["out"] = p.generate.out;
  summary["consumers"] = result.consumers.size();
  out << summary.dump(2) << '\n';
  return 0;
}

int cmd_analyze(const Parser& p, std::ostream& out) {
  const auto& o = p.analyze;
  json doc = json::object();
  const bool have_data = !o.data.data_dir.empty() || !o.data.places.empty();
  if (have_data) {
    QueryVolumeConfig volume;
    volume.alpha = o.alpha;
    volume.p_query = o.p_query;
    volume.validate();
    const auto bundle = load_bundle(o.data, fixture_center(o.data).value_or(kDefaultCenter));
    SpanConfig spans;
    spans.use_paper_table = o.span_mode == "paper";
    doc["total_query_count"] = total_query_count(bundle, volume);
    doc["crowd"] = to_json(crowd_distributions(bundle, volume));
    doc["availability"] = to_json(availability_profile(bundle.carparks));
    doc["spans"] = to_json(derive_distance_spans(bundle, p.seed, o.k_min, spans));
    json rush = json::array();
    for (const auto& w : rush_windows(bundle.traffic)) rush.push_back({w.start_hour, w.end_hour});
    doc["rush_windows"] = rush;
  }
  if (!o.store.empty()) {
    const auto store = TemplateStore::open(o.store);
    std::map<std::string, std::vector<std::uint64_t>> per_destination;
    std::vector<std::uint64_t> week(kDaysPerWeek * kHoursPerDay, 0);
    for (const auto& r : store.records()) {
      if (!o.destination.empty() && r.address != o.destination) continue;
      const auto h = static_cast<std::size_t>(r.day * kHoursPerDay + r.hour);
      ++week[h];
      auto& v = per_destination[r.address];
      if (v.empty()) v.assign(week.size(), 0);
      ++v[h];
    }
    doc["store"] = {{"manifest", manifest_summary(store.manifest())},
                    {"per_hour", week},
                    {"per_destination_hour", per_destination}};
  }
  if (!have_data && o.store.empty()) invalid("analyze: give --data-dir/--places... and/or --store");
  emit(doc, o.out, out);
  return 0;
}

int cmd_export(const Parser& p, std::ostream& out) {
  const auto store = TemplateStore::open(p.export_.store);
  const auto rows = export_csv(store, p.export_.out);
  out << json{{"out", p.export_.out}, {"rows", rows}}.dump() << '\n';
  return 0;
}

int cmd_run(const Parser& p, std::ostream& out, std::ostream& err) {
  const auto& o = p.run;
  RunConfig cfg;
  cfg.endpoint = o.endpoint;
  cfg.compression = o.compression;
  cfg.window_seconds = o.window_seconds;
  std::tie(cfg.start_day, cfg.start_second) = parse_start(o.start);
  cfg.duration_seconds = parse_duration(o.duration, "--duration");
  cfg.duration_seconds = std::min(cfg.duration_seconds, kSecondsPerWeek - cfg.start_week_second());
  cfg.max_in_flight = o.max_in_flight;
  cfg.request_timeout_ms = o.timeout_ms;
  cfg.validate();
  const auto store = TemplateStore::open(o.store);
  const auto registry = o.registry.empty() ? QueryRegistry::builtin() : QueryRegistry::load(o.registry);
  registry.check_covers(store);

  SignalGuard guard;
  std::stop_source stop;
  std::jthread watcher([&](std::stop_token done) {
    while (!done.stop_requested()) {
      if (g_interrupted.load()) {
        stop.request_stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  });
  const auto report = cqsim::run(store, registry, cfg, stop.get_token());
  watcher.request_stop();
  if (!o.report.empty()) emit(to_json(report), o.report, out);
  out << report.summary().dump(2) << '\n';
  if (stop.stop_requested()) {
    err << "interrupted: partial report" << (o.report.empty() ? "" : " written to " + o.report) << '\n';
    return 2;
  }
  return 0;
}

int cmd_sink(const Parser& p, std::ostream& out) {
  const auto& o = p.sink;
  SinkOptions options;
  options.host = o.host;
  options.port = o.port;
  options.log_path = o.log;
  options.response_delay = std::chrono::milliseconds(o.delay_ms);
  options.threads = o.threads;
  const int seconds = parse_duration(o.duration, "--duration");
  SignalGuard guard;
  Sink sink(options);
  sink.start();
  out << json{{"listening", sink.url()}, {"port", sink.port()}}.dump() << std::endl;
  const auto until = std::chrono::steady_clock::now() + std::chrono::seconds(seconds);
  while (!g_interrupted.load() && (seconds == 0 || std::chrono::steady_clock::now() < until)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  sink.stop();
  out << json{{"received", sink.size()}}.dump() << '\n';
  return 0;
}

int cmd_report(const Parser& p, std::ostream& out) {
  const auto& o = p.report;
  const auto store = TemplateStore::open(o.store);
  const auto log = read_sink_log(o.log);
  std::ifstream in(o.run_report);
  if (!in) throw Error(ErrorKind::MissingFile, o.run_report);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::SchemaViolation, o.run_report + ": " + e.what());
  }
  const auto run = run_report_from_json(doc);
  emit(fidelity_report(store, log, run), o.out, out);
  return 0;
}

}  // namespace

GenerationConfig generation_config_from_args(const std::vector<std::string>& args) {
  Parser p;
  p.parse(args);
  if (!p.app.got_subcommand(p.generate_cmd)) invalid("not a generate command line");
  return build_generation_config(p);
}

std::string config_text_from_args(const std::vector<std::string>& args) {
  Parser p;
  p.parse(args);
  std::string out;
  for (const auto& b : p.bound) {
    if (b.owner != &p.app) continue;
    if (auto v = b.value(); !v.empty()) out += b.key + "=" + v + "\n";
  }
  for (const auto* sub : p.app.get_subcommands()) {
    for (const auto& b : p.bound) {
      if (b.owner != sub) continue;
      // empty lists are the defaults and are left out
      if (auto v = b.value(); !v.empty()) out += sub->get_name() + "." + b.key + "=" + v + "\n";
    }
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Parser p;
  try {
    p.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << p.app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << p.app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << p.app.help();
    return 1;
  }
  try {
    if (p.app.got_subcommand(p.bootstrap_cmd)) return cmd_bootstrap(p, out);
    if (p.app.got_subcommand(p.generate_cmd)) return cmd_generate(p, out);
    if (p.app.got_subcommand(p.analyze_cmd)) return cmd_analyze(p, out);
    if (p.app.got_subcommand(p.export_cmd)) return cmd_export(p, out);
    if (p.app.got_subcommand(p.run_cmd)) return cmd_run(p, out, err);
    if (p.app.got_subcommand(p.sink_cmd)) return cmd_sink(p, out);
    if (p.app.got_subcommand(p.report_cmd)) return cmd_report(p, out);
    err << p.app.help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace cqsim::cli
