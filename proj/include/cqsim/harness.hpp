#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cqsim/executor.hpp"
#include "cqsim/store.hpp"

namespace cqsim {

struct SinkEntry {
  std::int64_t recv_ns = 0;  // steady clock
  std::optional<std::uint64_t> template_id;
  std::optional<int> scheduled_at;
  int status = 200;
  std::string error;  // "parse_error" for malformed bodies

  friend bool operator==(const SinkEntry&, const SinkEntry&) = default;
};

nlohmann::json to_json(const SinkEntry& entry);
SinkEntry sink_entry_from_json(const nlohmann::json& j);
std::vector<SinkEntry> read_sink_log(const std::filesystem::path& path);

struct SinkOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::filesystem::path log_path;  // empty: memory only
  std::chrono::milliseconds response_delay{0};
  unsigned threads = 128;
};

/// HTTP receiver standing in for the context platform: acknowledges every
/// POST and records the envelope.
class Sink {
 public:
  explicit Sink(SinkOptions options = {});
  ~Sink();
  Sink(const Sink&) = delete;
  Sink& operator=(const Sink&) = delete;

  /// Binds and starts serving in the background. Throws BindFailure.
  void start();
  /// Stops serving and flushes the log. Idempotent.
  void stop();

  int port() const noexcept;
  std::string url(const std::string& path = "/queries") const;

  std::vector<SinkEntry> entries() const;
  std::size_t size() const;
  /// True once at least n entries were logged.
  bool wait_for(std::size_t n, std::chrono::milliseconds timeout) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Observed traffic against the stored schedule for the run's range.
nlohmann::json fidelity_report(const TemplateStore& store, std::span<const SinkEntry> log, const RunReport& run);

}  // namespace cqsim
