#include "cqsim/render.hpp"

#include <array>
#include <fstream>
#include <set>

#include "cqsim/csv.hpp"
#include "cqsim/errors.hpp"

namespace cqsim {

using nlohmann::json;

namespace {

constexpr std::string_view kOpenField = "{{";
constexpr std::string_view kCloseField = "}}";
constexpr std::string_view kOpenOptional = "[[?";
constexpr std::string_view kCloseOptional = "]]";

constexpr std::array<std::string_view, 16> kFields = {
    "_id",   "location.lat",  "location.lng", "address", "day", "hour",     "minute",      "second",
    "distance", "expected_time", "price",     "rating",  "vin", "query_id", "consumer_id", "profile_no"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Substitutes fields in a marker-free fragment. Returns false if some field
// has no value; `missing` receives its name.
bool substitute(std::string_view text, const TemplateRecord* record, std::string& out, std::string& missing) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find(kOpenField, pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    const auto close = text.find(kCloseField, open + kOpenField.size());
    if (close == std::string_view::npos) {
      throw Error(ErrorKind::UnresolvedPlaceholder, "unterminated {{ in query text");
    }
    const auto name = trim(text.substr(open + kOpenField.size(), close - open - kOpenField.size()));
    if (record) {
      auto value = field_value(*record, name);
      if (!value) {
        missing = std::string(name);
        return false;
      }
      out.append(*value);
    } else if (!is_template_field(name)) {
      missing = std::string(name);
      return false;
    }
    pos = close + kCloseField.size();
  }
  return true;
}

// Walks optional clauses; with record == nullptr only validates structure
// and field names.
std::string expand(std::string_view text, const TemplateRecord* record) {
  std::string out;
  out.reserve(text.size() + 64);
  std::string missing;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto open = text.find(kOpenOptional, pos);
    const auto plain = text.substr(pos, open == std::string_view::npos ? std::string_view::npos : open - pos);
    if (!substitute(plain, record, out, missing)) {
      if (record) {
        throw Error(ErrorKind::UnresolvedPlaceholder,
                    "{{" + missing + "}} has no value and is not inside an optional clause");
      }
      throw Error(ErrorKind::SchemaViolation, "unknown template field {{" + missing + "}}");
    }
    if (open == std::string_view::npos) break;

    const auto body_start = open + kOpenOptional.size();
    const auto close = text.find(kCloseOptional, body_start);
    if (close == std::string_view::npos) {
      throw Error(record ? ErrorKind::UnresolvedPlaceholder : ErrorKind::SchemaViolation,
                  "unterminated [[? clause in query text");
    }
    const auto body = text.substr(body_start, close - body_start);
    if (body.find(kOpenOptional) != std::string_view::npos) {
      throw Error(record ? ErrorKind::UnresolvedPlaceholder : ErrorKind::SchemaViolation,
                  "optional clauses cannot nest");
    }
    std::string clause;
    if (substitute(body, record, clause, missing)) {
      out.append(clause);
    } else if (!record) {
      throw Error(ErrorKind::SchemaViolation, "unknown template field {{" + missing + "}}");
    }
    pos = close + kCloseOptional.size();
  }
  return out;
}

const char* const kPullQuery = R"(prefix schema:http://schema.org
pull (targetCarpark.*)
define
entity targetLocation is from schema:Place
  where targetLocation.name="{{address}}",
entity consumerCar is from schema:Vehicle
  where consumerCar.vin="{{vin}}",
entity targetWeather is from schema:Thing
  where targetWeather.location="Melbourne,VIC"
entity targetCarpark is from schema:ParkingFacility
  where
    [[?((distance(targetCarpark.location,
targetLocation.geo, "walking")<{"value":{{distance}},
"unit":"m"} and
goodForWalking(targetWeather)>=0.6) or
goodForWalking(targetWeather)>0.9) and
    ]]targetCarpark.maxHeight>consumerCar.height
and
targetCarpark.isOpen=true and
targetCarpark.availableSlots>0[[? and
targetCarpark.price<={"value":{{price}},
"unit":"aud"}]][[? and
targetCarpark.rating>={{rating}}]][[? and
isAvailable(targetCarpark.availableSlots,
{"start_time":now(), "end_time":{"value":{{expected_time}},
"unit":"minutes"}})]])";

const char* const kPushQuery = R"(prefix schema:http://schema.org
push (targetCarpark.*)
when
  distance(consumerCar.location,
targetLocation.geo)<={ "value":500, "unit": "m"}
define
entity targetLocation is from schema:Place
  where targetLocation.name="{{address}}",
entity consumerCar is from schema:Vehicle
  where consumerCar.vin="{{vin}}",
entity targetCarpark is from schema:ParkingFacility
  where
    goodForWalking(targetWeather)>=0.6 and
    targetCarpark.maxHeight>consumerCar.height and
    targetCarpark.isOpen=true and
    targetCarpark.availableSlots>0)";

std::string integer_text(std::uint64_t v) { return std::to_string(v); }

}  // namespace

bool is_template_field(std::string_view name) noexcept {
  for (auto f : kFields) {
    if (f == name) return true;
  }
  return false;
}

std::optional<std::string> field_value(const TemplateRecord& r, std::string_view name) {
  auto optional_number = [](const std::optional<double>& v) -> std::optional<std::string> {
    if (!v) return std::nullopt;
    return csv::format_double(*v);
  };
  if (name == "_id") return integer_text(r.id);
  if (name == "location.lat") return csv::format_double(r.origin.lat);
  if (name == "location.lng") return csv::format_double(r.origin.lng);
  if (name == "address") return r.address;
  if (name == "day") return std::to_string(r.day);
  if (name == "hour") return std::to_string(r.hour);
  if (name == "minute") return std::to_string(r.minute);
  if (name == "second") return std::to_string(r.second);
  if (name == "distance") return optional_number(r.distance);
  if (name == "expected_time") return optional_number(r.expected_time);
  if (name == "price") return optional_number(r.price);
  if (name == "rating") return optional_number(r.rating);
  if (name == "vin") return r.vin;
  if (name == "query_id") return r.query_id;
  if (name == "consumer_id") return integer_text(r.consumer_id);
  if (name == "profile_no") return std::to_string(r.profile_no);
  return std::nullopt;
}

std::string render_text(std::string_view text, const TemplateRecord& record) { return expand(text, &record); }

std::string render(const TemplateRecord& record, const QueryRegistry& registry) {
  const std::string* text = registry.find(record.query_id);
  if (!text) throw Error(ErrorKind::UnknownQueryId, "no registered query '" + record.query_id + "'");
  return render_text(*text, record);
}

QueryRegistry QueryRegistry::builtin() {
  QueryRegistry r;
  r.add(std::string(kDefaultQueryId), kPullQuery);
  r.add(std::string(kPushQueryId), kPushQuery);
  return r;
}

QueryRegistry QueryRegistry::load(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw Error(ErrorKind::MissingFile, path.string());
  std::ifstream in(path, std::ios::binary);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::SchemaViolation, path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::SchemaViolation, path.string() + ": expected an object");
  QueryRegistry r;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it.value().is_string()) {
      throw Error(ErrorKind::SchemaViolation, path.string() + ": query '" + it.key() + "' must be a string");
    }
    try {
      r.add(it.key(), it.value().get<std::string>());
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + " query '" + it.key() + "': " + e.what());
    }
  }
  return r;
}

void QueryRegistry::add(std::string query_id, std::string text) {
  if (query_id.empty()) throw Error(ErrorKind::SchemaViolation, "empty query_id");
  expand(text, nullptr);
  queries_[std::move(query_id)] = std::move(text);
}

const std::string* QueryRegistry::find(std::string_view query_id) const {
  auto it = queries_.find(query_id);
  return it == queries_.end() ? nullptr : &it->second;
}

void QueryRegistry::check_covers(const TemplateStore& store) const {
  std::set<std::string_view> seen;
  for (const auto& r : store.records()) {
    if (!seen.insert(r.query_id).second) continue;
    if (!find(r.query_id)) {
      throw Error(ErrorKind::StoreRegistryMismatch,
                  "store references query_id '" + r.query_id + "' missing from the registry");
    }
  }
}

}  // namespace cqsim
