#include "cqsim/executor.hpp"

#include <algorithm>
#include <charconv>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>

#include <httplib.h>

#include "cqsim/errors.hpp"

namespace cqsim {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now().time_since_epoch()).count();
}

Clock::time_point to_time_point(std::int64_t ns) { return Clock::time_point(std::chrono::nanoseconds(ns)); }

struct Trigger {
  std::uint64_t template_id = 0;
  std::string query_id;
  std::string address;
  int scheduled_at = 0;
  std::int64_t due_ns = 0;
  bool late = false;
  std::string body;
};

struct TriggerLater {
  bool operator()(const Trigger& a, const Trigger& b) const noexcept {
    if (a.due_ns != b.due_ns) return a.due_ns > b.due_ns;
    return a.template_id > b.template_id;
  }
};

// Fan-out of trigger firings to every subscriber.
class TriggerBus {
 public:
  using Handler = std::function<void(Trigger&&)>;

  void subscribe(Handler handler) { handlers_.push_back(std::move(handler)); }

  void publish(Trigger&& trigger) const {
    for (std::size_t i = 0; i + 1 < handlers_.size(); ++i) {
      Trigger copy = trigger;
      handlers_[i](std::move(copy));
    }
    if (!handlers_.empty()) handlers_.back()(std::move(trigger));
  }

 private:
  std::vector<Handler> handlers_;
};

template <class T>
class Channel {
 public:
  void push(T value) {
    {
      std::lock_guard lock(mutex_);
      items_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  /// Blocks until an item arrives or the channel is closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    return value;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> items_;
  bool closed_ = false;
};

// One-shot triggers fired from a single thread in due order.
class TimerQueue {
 public:
  explicit TimerQueue(const TriggerBus& bus) : bus_(bus), thread_([this] { loop(); }) {}

  ~TimerQueue() {
    shutdown();
    if (thread_.joinable()) thread_.join();
  }

  void schedule(Trigger trigger) {
    {
      std::lock_guard lock(mutex_);
      heap_.push(std::move(trigger));
    }
    cv_.notify_all();
  }

  /// Blocks until every scheduled trigger has fired or the queue shut down.
  void wait_idle() {
    std::unique_lock lock(mutex_);
    idle_cv_.wait(lock, [&] { return (heap_.empty() && !firing_) || stopped_; });
  }

  void shutdown() {
    {
      std::lock_guard lock(mutex_);
      stopped_ = true;
    }
    cv_.notify_all();
    idle_cv_.notify_all();
  }

  /// Triggers that never fired; valid after shutdown.
  std::vector<Trigger> take_pending() {
    if (thread_.joinable()) thread_.join();
    std::vector<Trigger> out;
    std::lock_guard lock(mutex_);
    while (!heap_.empty()) {
      out.push_back(heap_.top());
      heap_.pop();
    }
    return out;
  }

 private:
  void loop() {
    std::unique_lock lock(mutex_);
    while (!stopped_) {
      if (heap_.empty()) {
        idle_cv_.notify_all();
        cv_.wait(lock, [&] { return stopped_ || !heap_.empty(); });
        continue;
      }
      const auto due = heap_.top().due_ns;
      if (now_ns() < due) {
        cv_.wait_until(lock, to_time_point(due));
        continue;
      }
      Trigger t = heap_.top();
      heap_.pop();
      firing_ = true;
      lock.unlock();
      bus_.publish(std::move(t));
      lock.lock();
      firing_ = false;
    }
  }

  const TriggerBus& bus_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::priority_queue<Trigger, std::vector<Trigger>, TriggerLater> heap_;
  bool stopped_ = false;
  bool firing_ = false;
  std::thread thread_;
};

DispatchRecord make_record(const Trigger& t) {
  DispatchRecord r;
  r.template_id = t.template_id;
  r.query_id = t.query_id;
  r.address = t.address;
  r.scheduled_at = t.scheduled_at;
  r.due_ns = t.due_ns;
  r.late = t.late;
  return r;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

bool sent(const DispatchRecord& r) noexcept { return r.dispatched_ns != 0; }

}  // namespace

Endpoint Endpoint::parse(const std::string& url) {
  constexpr std::string_view scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw Error(ErrorKind::DomainError, "endpoint must start with http://: " + url);
  std::string_view rest(url);
  rest.remove_prefix(scheme.size());
  const auto slash = rest.find('/');
  std::string_view authority = rest.substr(0, slash);
  Endpoint e;
  e.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  const auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    const auto port_text = authority.substr(colon + 1);
    int port = 0;
    auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc() || p != port_text.data() + port_text.size() || port <= 0 || port > 65535) {
      throw Error(ErrorKind::DomainError, "endpoint port is invalid: " + url);
    }
    e.port = port;
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) throw Error(ErrorKind::DomainError, "endpoint host is empty: " + url);
  e.host = std::string(authority);
  return e;
}

std::string Endpoint::url() const { return "http://" + host + ":" + std::to_string(port) + path; }

void RunConfig::validate() const {
  Endpoint::parse(endpoint);
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::DomainError, msg); };
  if (window_seconds <= 0) fail("window_seconds must be > 0");
  if (!(compression >= 1.0) || !std::isfinite(compression)) fail("compression must be >= 1");
  if (start_day < 0 || start_day >= kDaysPerWeek) fail("start day must be in [0, 6]");
  if (start_second < 0 || start_second >= kSecondsPerDay) fail("start second_of_day must be in [0, 86399]");
  if (duration_seconds <= 0) fail("duration must be > 0");
  if (end_week_second() > kSecondsPerWeek) fail("start + duration must not pass the end of the week");
  if (max_in_flight == 0) fail("max_in_flight must be positive");
  if (request_timeout_ms <= 0) fail("request timeout must be positive");
  if (fetch_lead_ms < 0) fail("fetch_lead_ms must be >= 0");
}

json to_json(const RunConfig& c) {
  return json{{"endpoint", c.endpoint},
              {"window_seconds", c.window_seconds},
              {"compression", c.compression},
              {"start_day", c.start_day},
              {"start_second", c.start_second},
              {"duration_seconds", c.duration_seconds},
              {"max_in_flight", c.max_in_flight},
              {"request_timeout_ms", c.request_timeout_ms},
              {"fetch_lead_ms", c.fetch_lead_ms}};
}

static RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.endpoint = j.at("endpoint").get<std::string>();
  c.window_seconds = j.at("window_seconds").get<int>();
  c.compression = j.at("compression").get<double>();
  c.start_day = j.at("start_day").get<int>();
  c.start_second = j.at("start_second").get<int>();
  c.duration_seconds = j.at("duration_seconds").get<int>();
  c.max_in_flight = j.at("max_in_flight").get<unsigned>();
  c.request_timeout_ms = j.at("request_timeout_ms").get<int>();
  c.fetch_lead_ms = j.value("fetch_lead_ms", 50);
  return c;
}

const char* to_string(DispatchOutcome outcome) noexcept {
  switch (outcome) {
    case DispatchOutcome::Ok: return "ok";
    case DispatchOutcome::HttpError: return "http_error";
    case DispatchOutcome::Timeout: return "timeout";
    case DispatchOutcome::TransportError: return "transport_error";
    case DispatchOutcome::RenderError: return "render_error";
    case DispatchOutcome::Cancelled: return "cancelled";
  }
  return "?";
}

static DispatchOutcome outcome_from_string(const std::string& s) {
  for (auto o : {DispatchOutcome::Ok, DispatchOutcome::HttpError, DispatchOutcome::Timeout,
                 DispatchOutcome::TransportError, DispatchOutcome::RenderError, DispatchOutcome::Cancelled}) {
    if (s == to_string(o)) return o;
  }
  throw Error(ErrorKind::SchemaViolation, "unknown dispatch outcome '" + s + "'");
}

json to_json(const DispatchRecord& r) {
  json j{{"template_id", r.template_id},
         {"query_id", r.query_id},
         {"address", r.address},
         {"scheduled_at", r.scheduled_at},
         {"due_ns", r.due_ns},
         {"dispatched_ns", r.dispatched_ns},
         {"completed_ns", r.completed_ns},
         {"mapped_at", r.mapped_at},
         {"status", r.status},
         {"outcome", to_string(r.outcome)},
         {"late", r.late}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

DispatchRecord dispatch_record_from_json(const json& j) {
  DispatchRecord r;
  r.template_id = j.at("template_id").get<std::uint64_t>();
  r.query_id = j.at("query_id").get<std::string>();
  r.address = j.value("address", std::string());
  r.scheduled_at = j.at("scheduled_at").get<int>();
  r.due_ns = j.at("due_ns").get<std::int64_t>();
  r.dispatched_ns = j.at("dispatched_ns").get<std::int64_t>();
  r.completed_ns = j.at("completed_ns").get<std::int64_t>();
  r.mapped_at = j.at("mapped_at").get<double>();
  r.status = j.at("status").get<int>();
  r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  r.late = j.value("late", false);
  r.error = j.value("error", std::string());
  return r;
}

std::uint64_t RunReport::count(DispatchOutcome outcome) const noexcept {
  return static_cast<std::uint64_t>(
      std::count_if(dispatches.begin(), dispatches.end(), [&](const auto& d) { return d.outcome == outcome; }));
}

double RunReport::within_epsilon_fraction() const noexcept {
  const double eps = config.epsilon_seconds();
  std::uint64_t total = 0, within = 0;
  for (const auto& d : dispatches) {
    if (!sent(d)) continue;
    ++total;
    if (std::abs(d.deviation_seconds()) <= eps) ++within;
  }
  return total == 0 ? 1.0 : static_cast<double>(within) / static_cast<double>(total);
}

double RunReport::map_to_simulated(std::int64_t steady_ns) const noexcept {
  return config.start_week_second() + static_cast<double>(steady_ns - wall_origin_ns) * config.compression / 1e9;
}

json RunReport::summary() const {
  std::vector<double> deviation, latency;
  std::uint64_t late = 0;
  for (const auto& d : dispatches) {
    if (d.late) ++late;
    if (!sent(d)) continue;
    deviation.push_back(std::abs(d.deviation_seconds()));
    if (d.completed_ns) latency.push_back(d.latency_ms());
  }
  json outcomes = json::object();
  for (auto o : {DispatchOutcome::Ok, DispatchOutcome::HttpError, DispatchOutcome::Timeout,
                 DispatchOutcome::TransportError, DispatchOutcome::RenderError, DispatchOutcome::Cancelled}) {
    outcomes[to_string(o)] = count(o);
  }
  return json{{"expected", expected},
              {"records", dispatches.size()},
              {"complete", complete},
              {"outcomes", outcomes},
              {"late", late},
              {"epsilon_seconds", config.epsilon_seconds()},
              {"within_epsilon_fraction", within_epsilon_fraction()},
              {"deviation_seconds", {{"p50", percentile(deviation, 0.5)},
                                     {"p99", percentile(deviation, 0.99)},
                                     {"p999", percentile(deviation, 0.999)},
                                     {"max", deviation.empty() ? 0.0 : *std::max_element(deviation.begin(), deviation.end())}}},
              {"latency_ms", {{"p50", percentile(latency, 0.5)}, {"p99", percentile(latency, 0.99)}}},
              {"max_in_flight_observed", max_in_flight_observed}};
}

json to_json(const RunReport& report) {
  json dispatches = json::array();
  for (const auto& d : report.dispatches) dispatches.push_back(to_json(d));
  return json{{"config", to_json(report.config)},
              {"wall_origin_ns", report.wall_origin_ns},
              {"expected", report.expected},
              {"complete", report.complete},
              {"max_in_flight_observed", report.max_in_flight_observed},
              {"summary", report.summary()},
              {"dispatches", std::move(dispatches)}};
}

RunReport run_report_from_json(const json& j) {
  try {
    RunReport r;
    r.config = run_config_from_json(j.at("config"));
    r.wall_origin_ns = j.at("wall_origin_ns").get<std::int64_t>();
    r.expected = j.at("expected").get<std::uint64_t>();
    r.complete = j.at("complete").get<bool>();
    r.max_in_flight_observed = j.value("max_in_flight_observed", 0u);
    for (const auto& d : j.at("dispatches")) r.dispatches.push_back(dispatch_record_from_json(d));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("run report: ") + e.what());
  }
}

RunReport run(const TemplateStore& store, const QueryRegistry& registry, const RunConfig& config,
              std::stop_token stop) {
  config.validate();
  registry.check_covers(store);
  const Endpoint endpoint = Endpoint::parse(config.endpoint);

  RunReport report;
  report.config = config;
  const int begin = config.start_week_second();
  const int end = config.end_week_second();
  report.expected = store.fetch_week_range(begin, end).size();

  const double ns_per_sim_second = 1e9 / config.compression;
  const std::int64_t lead_ns = static_cast<std::int64_t>(config.fetch_lead_ms) * 1'000'000;
  report.wall_origin_ns = now_ns() + lead_ns + 100'000'000;
  const std::int64_t origin = report.wall_origin_ns;
  auto wall_of = [&](double week_second) {
    return origin + static_cast<std::int64_t>(std::llround((week_second - begin) * ns_per_sim_second));
  };
  auto sim_of = [&](std::int64_t ns) { return begin + static_cast<double>(ns - origin) / ns_per_sim_second; };

  Channel<DispatchRecord> results;
  Channel<Trigger> work;
  std::atomic<bool> cancelled{false};
  std::atomic<unsigned> in_flight{0};
  std::atomic<unsigned> max_in_flight{0};

  std::jthread collector([&] {
    while (auto r = results.pop()) report.dispatches.push_back(std::move(*r));
  });

  std::vector<std::jthread> workers;
  workers.reserve(config.max_in_flight);
  for (unsigned w = 0; w < config.max_in_flight; ++w) {
    workers.emplace_back([&] {
      httplib::Client client(endpoint.host, endpoint.port);
      client.set_keep_alive(true);
      client.set_tcp_nodelay(true);
      const auto timeout = std::chrono::milliseconds(config.request_timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      while (auto t = work.pop()) {
        DispatchRecord r = make_record(*t);
        if (cancelled.load(std::memory_order_relaxed)) {
          results.push(std::move(r));
          continue;
        }
        const unsigned now_in = in_flight.fetch_add(1) + 1;
        unsigned seen = max_in_flight.load();
        while (now_in > seen && !max_in_flight.compare_exchange_weak(seen, now_in)) {
        }
        r.dispatched_ns = now_ns();
        r.mapped_at = sim_of(r.dispatched_ns);
        auto res = client.Post(endpoint.path, t->body, "application/json");
        r.completed_ns = now_ns();
        in_flight.fetch_sub(1);
        if (res) {
          r.status = res->status;
          r.outcome = res->status >= 200 && res->status < 300 ? DispatchOutcome::Ok : DispatchOutcome::HttpError;
        } else {
          const auto err = res.error();
          r.outcome = err == httplib::Error::ConnectionTimeout ||
                              (err == httplib::Error::Read && r.completed_ns - r.dispatched_ns >=
                                                                  static_cast<std::int64_t>(config.request_timeout_ms) * 1'000'000)
                          ? DispatchOutcome::Timeout
                          : DispatchOutcome::TransportError;
          r.error = httplib::to_string(err);
        }
        results.push(std::move(r));
      }
    });
  }

  TriggerBus bus;
  bus.subscribe([&](Trigger&& t) { work.push(std::move(t)); });
  TimerQueue timers(bus);

  std::mutex sleep_mutex;
  std::condition_variable_any sleep_cv;
  std::stop_callback on_stop(stop, [&] {
    cancelled.store(true);
    timers.shutdown();
    sleep_cv.notify_all();
  });

  for (int window = begin; window < end && !stop.stop_requested(); window += config.window_seconds) {
    {
      std::unique_lock lock(sleep_mutex);
      sleep_cv.wait_until(lock, stop, to_time_point(wall_of(window) - lead_ns), [] { return false; });
    }
    if (stop.stop_requested()) break;
    const int window_end = std::min(end, window + config.window_seconds);
    // fetch_window clips at midnight; a window straddling it is fetched in two parts
    for (int part = window; part < window_end;) {
      const int part_day = part / kSecondsPerDay;
      const int part_end = std::min(window_end, (part_day + 1) * kSecondsPerDay);
      const auto batch = store.fetch_window(part_day, part - part_day * kSecondsPerDay, part_end - part);
      for (const auto& rec : batch) {
        Trigger t;
        t.template_id = rec.id;
        t.query_id = rec.query_id;
        t.address = rec.address;
        t.scheduled_at = rec.week_second();
        t.due_ns = wall_of(t.scheduled_at);
        try {
          json envelope{{"query", render(rec, registry)}, {"template_id", rec.id}, {"scheduled_at", t.scheduled_at}};
          t.body = envelope.dump();
        } catch (const Error& e) {
          DispatchRecord r = make_record(t);
          r.outcome = DispatchOutcome::RenderError;
          r.error = e.what();
          results.push(std::move(r));
          continue;
        }
        t.late = now_ns() > t.due_ns;
        timers.schedule(std::move(t));
      }
      part = part_end;
    }
  }

  timers.wait_idle();
  timers.shutdown();
  for (auto& t : timers.take_pending()) results.push(make_record(t));
  work.close();
  workers.clear();
  results.close();
  collector.join();

  report.max_in_flight_observed = max_in_flight.load();
  report.complete = !stop.stop_requested() && report.dispatches.size() == report.expected;
  std::sort(report.dispatches.begin(), report.dispatches.end(), [](const auto& a, const auto& b) {
    return a.scheduled_at != b.scheduled_at ? a.scheduled_at < b.scheduled_at : a.template_id < b.template_id;
  });
  return report;
}

}  // namespace cqsim
