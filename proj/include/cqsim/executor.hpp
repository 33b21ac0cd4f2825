#pragma once

#include <cstdint>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include <json.hpp>

#include "cqsim/render.hpp"
#include "cqsim/store.hpp"

namespace cqsim {

struct Endpoint {
  std::string host;
  int port = 80;
  std::string path = "/";

  /// Accepts http://host[:port][/path]. Throws DomainError.
  static Endpoint parse(const std::string& url);
  std::string url() const;
};

struct RunConfig {
  std::string endpoint;
  int window_seconds = 600;
  double compression = 1.0;  // simulated seconds per wall-clock second
  int start_day = 0;
  int start_second = 0;  // second of day
  int duration_seconds = kSecondsPerWeek;
  unsigned max_in_flight = 32;
  int request_timeout_ms = 5000;
  /// Wall-clock head start of each window fetch before the window opens.
  int fetch_lead_ms = 50;

  int start_week_second() const noexcept { return start_day * kSecondsPerDay + start_second; }
  int end_week_second() const noexcept { return start_week_second() + duration_seconds; }
  /// Allowed simulated dispatch error: 1 s up to s = 60, proportional above.
  double epsilon_seconds() const noexcept { return compression <= 60.0 ? 1.0 : compression / 60.0; }

  /// Throws DomainError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);

enum class DispatchOutcome : std::uint8_t { Ok, HttpError, Timeout, TransportError, RenderError, Cancelled };

const char* to_string(DispatchOutcome outcome) noexcept;

struct DispatchRecord {
  std::uint64_t template_id = 0;
  std::string query_id;
  std::string address;
  int scheduled_at = 0;           // week second
  std::int64_t due_ns = 0;        // steady clock
  std::int64_t dispatched_ns = 0; // steady clock, 0 if never sent
  std::int64_t completed_ns = 0;
  double mapped_at = 0.0;         // simulated week second of the dispatch
  int status = 0;                 // HTTP status, 0 without a response
  DispatchOutcome outcome = DispatchOutcome::Cancelled;
  bool late = false;
  std::string error;

  double latency_ms() const noexcept {
    return dispatched_ns && completed_ns ? static_cast<double>(completed_ns - dispatched_ns) / 1e6 : 0.0;
  }
  /// mapped_at - scheduled_at, simulated seconds.
  double deviation_seconds() const noexcept { return mapped_at - static_cast<double>(scheduled_at); }
};

nlohmann::json to_json(const DispatchRecord& record);
DispatchRecord dispatch_record_from_json(const nlohmann::json& j);

struct RunReport {
  RunConfig config;
  std::int64_t wall_origin_ns = 0;  // steady clock instant of the start simulated second
  std::uint64_t expected = 0;       // store records in [start, start + duration)
  bool complete = false;
  unsigned max_in_flight_observed = 0;
  std::vector<DispatchRecord> dispatches;  // (scheduled_at, template_id) order

  std::uint64_t count(DispatchOutcome outcome) const noexcept;
  /// Fraction of sent dispatches with |deviation| <= epsilon.
  double within_epsilon_fraction() const noexcept;
  /// Simulated week second mapped from a steady clock instant.
  double map_to_simulated(std::int64_t steady_ns) const noexcept;

  nlohmann::json summary() const;
};

nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);

/// Replays the store's [start, start + duration) range against the endpoint.
/// Throws StoreRegistryMismatch / DomainError before starting; endpoint
/// failures end up in the records.
RunReport run(const TemplateStore& store, const QueryRegistry& registry, const RunConfig& config,
              std::stop_token stop = {});

}  // namespace cqsim
