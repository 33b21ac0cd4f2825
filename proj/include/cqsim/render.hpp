#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "cqsim/store.hpp"

namespace cqsim {

// Registered query texts keyed by query_id. Texts reference template fields
// as {{field}} (published column names, plus consumer_id and profile_no).
// A span wrapped in [[? ... ]] is dropped when any field it references is null.
class QueryRegistry {
 public:
  /// The parking-availability pull query and its push variant.
  static QueryRegistry builtin();

  /// JSON object mapping query_id -> text. Throws MissingFile / SchemaViolation.
  static QueryRegistry load(const std::filesystem::path& path);

  /// Throws SchemaViolation on malformed markers or unknown field names.
  void add(std::string query_id, std::string text);

  const std::string* find(std::string_view query_id) const;
  const std::map<std::string, std::string, std::less<>>& queries() const noexcept { return queries_; }

  /// Throws StoreRegistryMismatch naming the first query_id with no text.
  void check_covers(const TemplateStore& store) const;

 private:
  std::map<std::string, std::string, std::less<>> queries_;
};

inline constexpr std::string_view kDefaultQueryId = "available-slots";
inline constexpr std::string_view kPushQueryId = "available-slots-push";

bool is_template_field(std::string_view name) noexcept;

/// Text value of a field, nullopt when the field is null or unknown.
std::optional<std::string> field_value(const TemplateRecord& record, std::string_view name);

/// Merges a record into arbitrary query text. Throws UnresolvedPlaceholder.
std::string render_text(std::string_view text, const TemplateRecord& record);

/// Throws UnknownQueryId / UnresolvedPlaceholder.
std::string render(const TemplateRecord& record, const QueryRegistry& registry);

}  // namespace cqsim
