#include "cqsim/store.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cqsim/csv.hpp"
#include "cqsim/errors.hpp"

namespace cqsim {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IOError, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::IOError, "write failed for " + path.string());
}

std::ifstream open_in(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorKind::MissingFile, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IOError, "cannot open " + path.string());
  return in;
}

bool record_less(const TemplateRecord& a, const TemplateRecord& b) {
  const int wa = a.week_second(), wb = b.week_second();
  if (wa != wb) return wa < wb;
  return a.id < b.id;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_double(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

void check_record(const TemplateRecord& r, const std::string& where) {
  if (r.day < 0 || r.day >= kDaysPerWeek || r.hour < 0 || r.hour >= kHoursPerDay || r.minute < 0 ||
      r.minute > 59 || r.second < 0 || r.second > 59) {
    throw Error(ErrorKind::InvariantViolation, where + ": schedule fields out of range");
  }
  if (!is_valid(r.origin)) throw Error(ErrorKind::InvariantViolation, where + ": origin out of range");
  if (r.address.empty() || r.vin.empty() || r.query_id.empty()) {
    throw Error(ErrorKind::SchemaViolation, where + ": address, vin and query_id are required");
  }
}

std::string iso_utc(std::int64_t seconds) {
  const std::time_t t = static_cast<std::time_t>(seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json manifest_json(const StoreManifest& m) {
  return {{"format", kStoreFormat},
          {"record_count", m.record_count},
          {"seed", m.seed},
          {"config_digest", m.config_digest},
          {"dataset_digest", m.dataset_digest},
          {"created_at", m.created_at},
          {"created_at_utc", iso_utc(m.created_at)},
          {"config", m.config},
          {"stats", m.stats}};
}

}  // namespace

StorePaths StorePaths::in(const fs::path& dir) {
  return {dir / "manifest.json", dir / "templates.ndjson", dir / "consumers.ndjson"};
}

ordered_json to_json(const TemplateRecord& r) {
  ordered_json j;
  j["_id"] = r.id;
  j["location"] = {{"lat", r.origin.lat}, {"lng", r.origin.lng}};
  j["address"] = r.address;
  j["day"] = r.day;
  j["hour"] = r.hour;
  j["minute"] = r.minute;
  j["second"] = r.second;
  j["distance"] = optional_json(r.distance);
  j["expected_time"] = optional_json(r.expected_time);
  j["price"] = optional_json(r.price);
  j["rating"] = optional_json(r.rating);
  j["vin"] = r.vin;
  j["query_id"] = r.query_id;
  j["consumer_id"] = r.consumer_id;
  j["profile_no"] = r.profile_no;
  j["distance_group"] = r.distance_group ? json(to_string(*r.distance_group)) : json(nullptr);
  j["price_category"] = r.price_category ? json(to_string(*r.price_category)) : json(nullptr);
  return j;
}

TemplateRecord record_from_json(const json& j) {
  TemplateRecord r;
  try {
    r.id = j.at("_id").get<std::uint64_t>();
    r.origin = {j.at("location").at("lat").get<double>(), j.at("location").at("lng").get<double>()};
    r.address = j.at("address").get<std::string>();
    r.day = j.at("day").get<int>();
    r.hour = j.at("hour").get<int>();
    r.minute = j.at("minute").get<int>();
    r.second = j.at("second").get<int>();
    r.distance = optional_double(j, "distance");
    r.expected_time = optional_double(j, "expected_time");
    r.price = optional_double(j, "price");
    r.rating = optional_double(j, "rating");
    r.vin = j.at("vin").get<std::string>();
    r.query_id = j.at("query_id").get<std::string>();
    r.consumer_id = j.value("consumer_id", std::uint64_t{0});
    r.profile_no = j.value("profile_no", 0);
    if (auto it = j.find("distance_group"); it != j.end() && it->is_string()) {
      r.distance_group = it->get<std::string>() == "dominant" ? DistanceGroup::Dominant : DistanceGroup::NonDominant;
    }
    if (auto it = j.find("price_category"); it != j.end() && it->is_string()) {
      const auto s = it->get<std::string>();
      for (int c = 0; c < 4; ++c) {
        if (s == to_string(static_cast<PriceCategory>(c))) r.price_category = static_cast<PriceCategory>(c);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("template record: ") + e.what());
  }
  return r;
}

ordered_json to_json(const Consumer& c) {
  ordered_json j;
  j["consumer_id"] = c.consumer_id;
  j["profile_no"] = c.profile_no;
  j["home_destination"] = c.home_destination ? json(*c.home_destination) : json(nullptr);
  j["home_hour"] = optional_json(c.home_hour);
  j["vin"] = c.vin;
  j["base_vin"] = c.base_vin;
  j["modified"] = c.modified;
  j["height"] = c.vehicle.height;
  j["length"] = c.vehicle.length;
  j["width"] = c.vehicle.width;
  j["static_distance_pref"] = optional_json(c.static_distance_pref);
  return j;
}

TemplateStore::TemplateStore(StoreManifest manifest, std::vector<TemplateRecord> records)
    : manifest_(std::move(manifest)), records_(std::move(records)) {
  if (manifest_.record_count != records_.size()) {
    throw Error(ErrorKind::InvariantViolation,
                "manifest record_count " + std::to_string(manifest_.record_count) + " != " +
                    std::to_string(records_.size()) + " records");
  }
  for (std::size_t i = 1; i < records_.size(); ++i) {
    if (!record_less(records_[i - 1], records_[i])) {
      throw Error(ErrorKind::InvariantViolation,
                  "records not ordered by (day, hour, minute, second, id) at _id " +
                      std::to_string(records_[i].id));
    }
  }
  build_index();
}

void TemplateStore::build_index() {
  week_offsets_.assign(kSecondsPerWeek + 1, 0);
  std::size_t i = 0;
  for (int w = 0; w <= kSecondsPerWeek; ++w) {
    while (i < records_.size() && records_[i].week_second() < w) ++i;
    week_offsets_[w] = static_cast<std::uint32_t>(i);
  }
  by_id_.clear();
  by_id_.reserve(records_.size());
  for (std::uint32_t k = 0; k < records_.size(); ++k) {
    if (!by_id_.emplace(records_[k].id, k).second) {
      throw Error(ErrorKind::InvariantViolation, "duplicate template _id " + std::to_string(records_[k].id));
    }
  }
}

std::span<const TemplateRecord> TemplateStore::fetch_window(int day, int start, int window) const {
  if (day < 0 || day >= kDaysPerWeek) throw Error(ErrorKind::DomainError, "day must be within [0, 6]");
  if (start < 0 || start >= kSecondsPerDay) {
    throw Error(ErrorKind::DomainError, "window start must be within [0, 86400)");
  }
  if (window <= 0) throw Error(ErrorKind::DomainError, "window must be > 0");
  const int end = std::min(kSecondsPerDay, start + std::min(window, kSecondsPerDay));
  return fetch_week_range(day * kSecondsPerDay + start, day * kSecondsPerDay + end);
}

std::span<const TemplateRecord> TemplateStore::fetch_week_range(int begin, int end) const {
  if (begin < 0 || end > kSecondsPerWeek || begin > end) {
    throw Error(ErrorKind::DomainError, "week range must satisfy 0 <= begin <= end <= 604800");
  }
  if (week_offsets_.empty()) return {};
  const auto first = week_offsets_[begin];
  const auto last = week_offsets_[end];
  return std::span<const TemplateRecord>(records_).subspan(first, last - first);
}

const TemplateRecord* TemplateStore::find(std::uint64_t id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

TemplateStore TemplateStore::open(const fs::path& dir) {
  const auto paths = StorePaths::in(dir);
  StoreManifest manifest;
  {
    auto in = open_in(paths.manifest);
    json m;
    try {
      m = json::parse(in);
      if (m.value("format", std::string{}) != kStoreFormat) {
        throw Error(ErrorKind::SchemaViolation, paths.manifest.string() + ": unknown store format");
      }
      manifest.record_count = m.at("record_count").get<std::uint64_t>();
      manifest.seed = m.at("seed").get<std::uint64_t>();
      manifest.config_digest = m.at("config_digest").get<std::string>();
      manifest.dataset_digest = m.value("dataset_digest", std::string{});
      manifest.created_at = m.at("created_at").get<std::int64_t>();
      manifest.config = m.value("config", json::object());
      manifest.stats = m.value("stats", json::object());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::SchemaViolation, paths.manifest.string() + ": " + e.what());
    }
  }

  std::vector<TemplateRecord> records;
  records.reserve(manifest.record_count);
  auto in = open_in(paths.templates);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::SchemaViolation,
                  paths.templates.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    auto r = record_from_json(j);
    check_record(r, paths.templates.filename().string() + " line " + std::to_string(line_no));
    records.push_back(std::move(r));
  }
  return TemplateStore(std::move(manifest), std::move(records));
}

TemplateStore persist(std::vector<TemplateRecord> templates, const fs::path& dir, const PersistOptions& options) {
  for (const auto& r : templates) check_record(r, "template _id " + std::to_string(r.id));
  std::sort(templates.begin(), templates.end(), record_less);
  {
    std::vector<std::uint64_t> ids;
    ids.reserve(templates.size());
    for (const auto& r : templates) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    const auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end()) throw Error(ErrorKind::InvariantViolation, "duplicate template _id " + std::to_string(*dup));
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IOError, "cannot create " + dir.string() + ": " + ec.message());
  const auto paths = StorePaths::in(dir);

  {
    auto out = open_out(paths.templates);
    for (const auto& r : templates) out << to_json(r).dump() << '\n';
    finish(out, paths.templates);
  }
  if (!options.consumers.empty()) {
    auto out = open_out(paths.consumers);
    for (const auto& c : options.consumers) out << to_json(c).dump() << '\n';
    finish(out, paths.consumers);
  } else {
    fs::remove(paths.consumers, ec);
  }

  StoreManifest manifest;
  manifest.record_count = templates.size();
  manifest.seed = options.seed;
  manifest.config_digest = options.config_digest;
  manifest.dataset_digest = options.dataset_digest;
  manifest.created_at = options.created_at;
  manifest.config = options.config;
  manifest.stats = options.stats;
  {
    auto out = open_out(paths.manifest);
    out << manifest_json(manifest).dump(2) << '\n';
    finish(out, paths.manifest);
  }
  return TemplateStore(std::move(manifest), std::move(templates));
}

std::vector<Consumer> load_consumers(const fs::path& dir) {
  const auto path = StorePaths::in(dir).consumers;
  auto in = open_in(path);
  std::vector<Consumer> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Consumer c;
      c.consumer_id = j.at("consumer_id").get<std::uint64_t>();
      c.profile_no = j.at("profile_no").get<int>();
      if (!j.at("home_destination").is_null()) c.home_destination = j["home_destination"].get<std::string>();
      if (!j.at("home_hour").is_null()) c.home_hour = j["home_hour"].get<int>();
      c.vin = j.at("vin").get<std::string>();
      c.base_vin = j.at("base_vin").get<std::string>();
      c.modified = j.at("modified").get<bool>();
      c.vehicle = {c.vin, j.at("height").get<double>(), j.at("length").get<double>(), j.at("width").get<double>()};
      if (!j.at("static_distance_pref").is_null()) c.static_distance_pref = j["static_distance_pref"].get<double>();
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::SchemaViolation, path.string() + ": " + e.what());
    }
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IOError, "sha256 failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

std::string dataset_digest(const DatasetBundle& bundle) {
  json places = json::array();
  for (const auto& p : bundle.places) {
    places.push_back({p.place_id, p.name, p.location.lat, p.location.lng, p.min_time, p.max_time, p.rp});
  }
  json carparks = json::array();
  for (const auto& c : bundle.carparks) {
    json opening = json::array();
    for (const auto& day : c.opening) opening.push_back(format_opening(day));
    carparks.push_back({c.carpark_id, c.name, c.location.lat, c.location.lng, c.capacity, c.price_per_hour,
                        c.rating, c.max_height, opening});
  }
  json vehicles = json::array();
  for (const auto& v : bundle.vehicles) vehicles.push_back({v.vin, v.height, v.length, v.width});
  json doc = {{"places", places},
              {"carparks", carparks},
              {"vehicles", vehicles},
              {"center", {bundle.center.lat, bundle.center.lng}},
              {"traffic", bundle.traffic ? json(*bundle.traffic) : json(nullptr)}};
  return sha256_hex(doc.dump());
}

std::string config_digest(const GenerationConfig& config, const DatasetBundle& bundle) {
  const json doc = {{"config", to_json(config)}, {"dataset", dataset_digest(bundle)}};
  return sha256_hex(doc.dump());
}

namespace {

std::string optional_cell(const std::optional<double>& v) {
  return v ? csv::format_double(*v) : std::string{};
}

std::optional<double> parse_optional(const std::string& cell, const std::string& where) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw Error(ErrorKind::SchemaViolation, where + ": bad number '" + cell + "'");
  }
  return v;
}

template <typename T>
T parse_required(const std::string& cell, const std::string& where) {
  T v{};
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw Error(ErrorKind::SchemaViolation, where + ": bad value '" + cell + "'");
  }
  return v;
}

}  // namespace

std::size_t export_csv(const TemplateStore& store, const fs::path& path) {
  auto out = open_out(path);
  out << kCsvHeader << '\n';
  std::size_t rows = 0;
  for (const auto& r : store.records()) {
    csv::write_row(out, {std::to_string(r.id), csv::format_double(r.origin.lat), csv::format_double(r.origin.lng),
                         r.address, std::to_string(r.day), std::to_string(r.hour), std::to_string(r.minute),
                         std::to_string(r.second), optional_cell(r.distance), optional_cell(r.expected_time),
                         optional_cell(r.price), optional_cell(r.rating), r.vin, r.query_id});
    ++rows;
  }
  finish(out, path);
  return rows;
}

std::vector<TemplateRecord> import_csv(const fs::path& path) {
  auto in = open_in(path);
  csv::Reader reader(in);
  auto header = reader.next_row();
  std::string joined;
  if (header) {
    for (std::size_t i = 0; i < header->size(); ++i) joined += (i ? "," : "") + (*header)[i];
  }
  if (joined != kCsvHeader) throw Error(ErrorKind::SchemaViolation, path.string() + ": unexpected header");
  std::vector<TemplateRecord> out;
  while (auto row = reader.next_row()) {
    if (row->size() == 1 && row->front().empty()) continue;
    const std::string where = path.filename().string() + " line " + std::to_string(reader.line());
    if (row->size() != 14) throw Error(ErrorKind::SchemaViolation, where + ": expected 14 columns");
    const auto& c = *row;
    TemplateRecord r;
    r.id = parse_required<std::uint64_t>(c[0], where + " _id");
    r.origin = {parse_required<double>(c[1], where + " location.lat"),
                parse_required<double>(c[2], where + " location.lng")};
    r.address = c[3];
    r.day = parse_required<int>(c[4], where + " day");
    r.hour = parse_required<int>(c[5], where + " hour");
    r.minute = parse_required<int>(c[6], where + " minute");
    r.second = parse_required<int>(c[7], where + " second");
    r.distance = parse_optional(c[8], where + " distance");
    r.expected_time = parse_optional(c[9], where + " expected_time");
    r.price = parse_optional(c[10], where + " price");
    r.rating = parse_optional(c[11], where + " rating");
    r.vin = c[12];
    r.query_id = c[13];
    check_record(r, where);
    out.push_back(std::move(r));
  }
  return out;
}

bool same_published_fields(const TemplateRecord& a, const TemplateRecord& b) noexcept {
  return a.id == b.id && a.origin == b.origin && a.address == b.address && a.day == b.day &&
         a.hour == b.hour && a.minute == b.minute && a.second == b.second && a.distance == b.distance &&
         a.expected_time == b.expected_time && a.price == b.price && a.rating == b.rating &&
         a.vin == b.vin && a.query_id == b.query_id;
}

}  // namespace cqsim
