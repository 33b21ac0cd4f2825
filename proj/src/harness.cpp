#include "cqsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <httplib.h>

#include "cqsim/errors.hpp"

namespace cqsim {

using nlohmann::json;

namespace {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

}  // namespace

json to_json(const SinkEntry& e) {
  json j{{"recv_ns", e.recv_ns},
         {"template_id", e.template_id ? json(*e.template_id) : json(nullptr)},
         {"scheduled_at", e.scheduled_at ? json(*e.scheduled_at) : json(nullptr)},
         {"status", e.status}};
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

SinkEntry sink_entry_from_json(const json& j) {
  SinkEntry e;
  e.recv_ns = j.at("recv_ns").get<std::int64_t>();
  if (!j.at("template_id").is_null()) e.template_id = j.at("template_id").get<std::uint64_t>();
  if (!j.at("scheduled_at").is_null()) e.scheduled_at = j.at("scheduled_at").get<int>();
  e.status = j.at("status").get<int>();
  e.error = j.value("error", std::string());
  return e;
}

std::vector<SinkEntry> read_sink_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, path.string());
  std::vector<SinkEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(sink_entry_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::SchemaViolation, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

struct Sink::Impl {
  SinkOptions options;
  httplib::Server server;
  std::thread listener;
  int port = 0;
  bool running = false;

  mutable std::mutex mutex;
  mutable std::condition_variable grew;
  std::vector<SinkEntry> entries;

  // single log writer
  std::mutex log_mutex;
  std::condition_variable log_cv;
  std::deque<std::string> pending;
  bool log_closed = false;
  std::thread writer;

  void record(SinkEntry e) {
    std::string line = to_json(e).dump();
    {
      std::lock_guard lock(mutex);
      entries.push_back(std::move(e));
    }
    grew.notify_all();
    if (writer.joinable()) {
      {
        std::lock_guard lock(log_mutex);
        pending.push_back(std::move(line));
      }
      log_cv.notify_one();
    }
  }

  void write_loop(std::ofstream out) {
    std::unique_lock lock(log_mutex);
    for (;;) {
      log_cv.wait(lock, [&] { return !pending.empty() || log_closed; });
      std::deque<std::string> batch;
      batch.swap(pending);
      const bool closing = log_closed;
      lock.unlock();
      for (const auto& l : batch) out << l << '\n';
      out.flush();
      lock.lock();
      if (closing && pending.empty()) return;
    }
  }
};

Sink::Sink(SinkOptions options) : impl_(std::make_unique<Impl>()) { impl_->options = std::move(options); }

Sink::~Sink() { stop(); }

void Sink::start() {
  auto& im = *impl_;
  if (im.running) return;
  if (!im.options.log_path.empty()) {
    std::ofstream out(im.options.log_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IOError, "cannot write sink log " + im.options.log_path.string());
    im.writer = std::thread([&im, o = std::move(out)]() mutable { im.write_loop(std::move(o)); });
  }
  const unsigned threads = std::max(1u, im.options.threads);
  im.server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  im.server.set_keep_alive_max_count(1'000'000);
  im.server.set_tcp_nodelay(true);
  // no SO_REUSEPORT: a second sink on a taken port must fail
  im.server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  im.server.set_keep_alive_timeout(10);
  const auto delay = im.options.response_delay;
  im.server.Post(R"(/.*)", [&im, delay](const httplib::Request& req, httplib::Response& res) {
    SinkEntry e;
    e.recv_ns = now_ns();
    try {
      const auto body = json::parse(req.body);
      e.template_id = body.at("template_id").get<std::uint64_t>();
      e.scheduled_at = body.at("scheduled_at").get<int>();
      if (!body.at("query").is_string()) throw std::invalid_argument("query");
      e.status = 200;
    } catch (const std::exception&) {
      e.template_id.reset();
      e.scheduled_at.reset();
      e.status = 400;
      e.error = "parse_error";
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    res.status = e.status;
    res.set_content(e.status == 200 ? "{\"ok\":true}" : "{\"ok\":false}", "application/json");
    im.record(std::move(e));
  });

  int port = im.options.port == 0 ? im.server.bind_to_any_port(im.options.host)
                                  : (im.server.bind_to_port(im.options.host, im.options.port) ? im.options.port : -1);
  if (port <= 0) {
    stop();
    throw Error(ErrorKind::BindFailure,
                "cannot bind sink to " + im.options.host + ":" + std::to_string(im.options.port));
  }
  im.port = port;
  im.listener = std::thread([&im] { im.server.listen_after_bind(); });
  im.server.wait_until_ready();
  im.running = true;
}

void Sink::stop() {
  auto& im = *impl_;
  if (im.listener.joinable()) {
    im.server.stop();
    im.listener.join();
  }
  im.running = false;
  if (im.writer.joinable()) {
    {
      std::lock_guard lock(im.log_mutex);
      im.log_closed = true;
    }
    im.log_cv.notify_one();
    im.writer.join();
  }
}

int Sink::port() const noexcept { return impl_->port; }

std::string Sink::url(const std::string& path) const {
  return "http://" + impl_->options.host + ":" + std::to_string(impl_->port) + path;
}

std::vector<SinkEntry> Sink::entries() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->entries;
}

std::size_t Sink::size() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->entries.size();
}

bool Sink::wait_for(std::size_t n, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(impl_->mutex);
  return impl_->grew.wait_for(lock, timeout, [&] { return impl_->entries.size() >= n; });
}

json fidelity_report(const TemplateStore& store, std::span<const SinkEntry> log, const RunReport& run) {
  const RunConfig& cfg = run.config;
  const int begin = cfg.start_week_second();
  const int end = cfg.end_week_second();
  const int minutes = (end - begin + 59) / 60;
  const int hours = (end - begin + 3599) / 3600;

  std::vector<std::uint64_t> scheduled(minutes, 0), by_scheduled(minutes, 0), by_arrival(minutes, 0);
  std::vector<std::uint64_t> sched_hour(hours, 0), obs_hour(hours, 0), arrival_hour(hours, 0);
  std::map<std::string, std::pair<std::vector<std::uint64_t>, std::vector<std::uint64_t>>> per_destination;
  std::unordered_map<std::uint64_t, const TemplateRecord*> stored;

  auto slot = [&](std::vector<std::uint64_t>& v, std::int64_t offset, int width) {
    if (offset < 0) return;
    const auto i = static_cast<std::size_t>(offset / width);
    if (i < v.size()) ++v[i];
  };

  const auto range = store.fetch_week_range(begin, end);
  stored.reserve(range.size());
  for (const auto& r : range) {
    stored.emplace(r.id, &r);
    const int off = r.week_second() - begin;
    slot(scheduled, off, 60);
    slot(sched_hour, off, 3600);
    auto& dest = per_destination[r.address];
    if (dest.first.empty()) {
      dest.first.assign(hours, 0);
      dest.second.assign(hours, 0);
    }
    slot(dest.first, off, 3600);
  }

  std::unordered_map<std::uint64_t, const DispatchRecord*> dispatched;
  dispatched.reserve(run.dispatches.size());
  for (const auto& d : run.dispatches) dispatched.emplace(d.template_id, &d);

  std::unordered_map<std::uint64_t, std::uint32_t> seen;
  std::vector<std::uint64_t> unknown;
  std::vector<double> latency_ms, arrival_dev;
  std::uint64_t malformed = 0;
  for (const auto& e : log) {
    if (!e.template_id) {
      ++malformed;
      continue;
    }
    const auto id = *e.template_id;
    auto it = stored.find(id);
    if (it == stored.end()) {
      unknown.push_back(id);
      continue;
    }
    if (seen[id]++ > 0) continue;
    const TemplateRecord& r = *it->second;
    const int off = r.week_second() - begin;
    slot(by_scheduled, off, 60);
    slot(obs_hour, off, 3600);
    slot(per_destination[r.address].second, off, 3600);
    const double arrived = run.map_to_simulated(e.recv_ns);
    const auto arrival_off = static_cast<std::int64_t>(std::floor(arrived - begin));
    slot(by_arrival, arrival_off, 60);
    slot(arrival_hour, arrival_off, 3600);
    arrival_dev.push_back(arrived - r.week_second());
    if (auto d = dispatched.find(id); d != dispatched.end() && d->second->dispatched_ns) {
      latency_ms.push_back(static_cast<double>(e.recv_ns - d->second->dispatched_ns) / 1e6);
    }
  }

  std::vector<std::uint64_t> duplicates, missing;
  for (const auto& [id, n] : seen) {
    if (n > 1) duplicates.push_back(id);
  }
  for (const auto& r : range) {
    if (!seen.count(r.id)) missing.push_back(r.id);
  }
  std::sort(duplicates.begin(), duplicates.end());
  std::sort(unknown.begin(), unknown.end());
  unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());

  json destinations = json::object();
  for (const auto& [address, counts] : per_destination) {
    destinations[address] = {{"scheduled", counts.first}, {"observed", counts.second}};
  }

  std::vector<double> abs_dev;
  abs_dev.reserve(arrival_dev.size());
  for (double d : arrival_dev) abs_dev.push_back(std::abs(d));

  return json{
      {"range", {{"start_week_second", begin}, {"end_week_second", end}, {"compression", cfg.compression}}},
      {"totals",
       {{"scheduled", range.size()},
        {"observed_unique", seen.size()},
        {"log_entries", log.size()},
        {"malformed", malformed},
        {"missing", missing.size()},
        {"duplicates", duplicates.size()},
        {"unknown", unknown.size()}}},
      {"hourly_counts_match", sched_hour == obs_hour},
      {"per_minute", {{"scheduled", scheduled}, {"observed_by_scheduled_at", by_scheduled}, {"observed_by_arrival", by_arrival}}},
      {"per_hour", {{"scheduled", sched_hour}, {"observed_by_scheduled_at", obs_hour}, {"observed_by_arrival", arrival_hour}}},
      {"per_destination_hour", std::move(destinations)},
      {"latency_ms", {{"p50", percentile(latency_ms, 0.5)}, {"p90", percentile(latency_ms, 0.9)}, {"p99", percentile(latency_ms, 0.99)}}},
      {"arrival_deviation_seconds",
       {{"p50", percentile(abs_dev, 0.5)}, {"p99", percentile(abs_dev, 0.99)}, {"p999", percentile(abs_dev, 0.999)}}},
      {"missing_ids", missing},
      {"duplicate_ids", duplicates},
      {"unknown_ids", unknown}};
}

}  // namespace cqsim
