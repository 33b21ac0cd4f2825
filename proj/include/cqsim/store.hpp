#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cqsim/generator.hpp"

namespace cqsim {

/// Record type persisted by the template repository.
using TemplateRecord = QueryTemplate;

inline constexpr std::string_view kStoreFormat = "cqsim-store/1";
inline constexpr std::string_view kCsvHeader =
    "_id,location.lat,location.lng,address,day,hour,minute,second,distance,expected_time,price,"
    "rating,vin,query_id";

struct StoreManifest {
  std::uint64_t record_count = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string dataset_digest;
  std::int64_t created_at = 0;  // unix seconds
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json stats = nlohmann::json::object();
};

struct PersistOptions {
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::string config_digest;
  std::string dataset_digest;
  std::int64_t created_at = 0;
  nlohmann::json stats = nlohmann::json::object();
  /// Written to consumers.ndjson when non-empty.
  std::span<const Consumer> consumers;
};

struct StorePaths {
  std::filesystem::path manifest;
  std::filesystem::path templates;
  std::filesystem::path consumers;

  static StorePaths in(const std::filesystem::path& dir);
};

/// Write-once, read-many template repository ordered by
/// (day, hour, minute, second, id) with a per-second week index.
class TemplateStore {
 public:
  TemplateStore() = default;
  TemplateStore(StoreManifest manifest, std::vector<TemplateRecord> records);

  static TemplateStore open(const std::filesystem::path& dir);

  const StoreManifest& manifest() const noexcept { return manifest_; }
  std::span<const TemplateRecord> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  /// Records of `day` scheduled in [start, start + window), clipped to the
  /// end of the day. Half-open, so consecutive windows never overlap.
  std::span<const TemplateRecord> fetch_window(int day, int start_second_of_day, int window_seconds) const;

  /// Records with week second in [begin, end), 0 <= begin <= end <= one week.
  std::span<const TemplateRecord> fetch_week_range(int begin, int end) const;

  const TemplateRecord* find(std::uint64_t id) const;

 private:
  void build_index();

  StoreManifest manifest_;
  std::vector<TemplateRecord> records_;
  std::vector<std::uint32_t> week_offsets_;  // first record at or after each week second
  std::unordered_map<std::uint64_t, std::uint32_t> by_id_;
};

/// Sorts, writes `<dir>/manifest.json` + `<dir>/templates.ndjson` (+ consumers) and
/// returns the opened store. Throws Error{IOError}.
TemplateStore persist(std::vector<TemplateRecord> templates, const std::filesystem::path& dir,
                      const PersistOptions& options);

std::vector<Consumer> load_consumers(const std::filesystem::path& dir);

nlohmann::ordered_json to_json(const TemplateRecord& record);
TemplateRecord record_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const Consumer& consumer);

std::string sha256_hex(std::string_view data);
std::string dataset_digest(const DatasetBundle& bundle);
/// Digest over the canonical generation config and the dataset digest.
std::string config_digest(const GenerationConfig& config, const DatasetBundle& bundle);

/// Writes the published template columns, one row per record. Returns rows written.
std::size_t export_csv(const TemplateStore& store, const std::filesystem::path& path);
std::vector<TemplateRecord> import_csv(const std::filesystem::path& path);

/// Equality over the published template columns only.
bool same_published_fields(const TemplateRecord& a, const TemplateRecord& b) noexcept;

}  // namespace cqsim
