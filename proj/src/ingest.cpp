#include "cqsim/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cqsim/csv.hpp"
#include "cqsim/errors.hpp"

namespace cqsim {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::SchemaViolation, where + ": " + what);
}

[[noreturn]] void invariant_error(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::InvariantViolation, where + ": " + what);
}

void require_file(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorKind::MissingFile, path.string());
  }
}

std::ifstream open_in(const fs::path& path) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IOError, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IOError, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::IOError, "write failed for " + path.string());
}

double parse_number(std::string_view text, const std::string& where) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    schema_error(where, "expected a number, got '" + std::string(text) + "'");
  }
  return value;
}

int parse_int(std::string_view text, const std::string& where) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    schema_error(where, "expected an integer, got '" + std::string(text) + "'");
  }
  return value;
}

const json& field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where, std::string("missing field '") + key + "'");
  return *it;
}

double number_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) schema_error(where, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::string string_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_string()) schema_error(where, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

WeekMatrix parse_week(const json& obj, const std::string& where) {
  if (!obj.is_object()) schema_error(where, "expected an object keyed by day name");
  WeekMatrix m{};
  for (int d = 0; d < kDaysPerWeek; ++d) {
    const std::string day(kDayNames[d]);
    const json& row = field(obj, day.c_str(), where);
    if (!row.is_array() || row.size() != kHoursPerDay) {
      schema_error(where, "field '" + day + "' must hold 24 values");
    }
    for (int h = 0; h < kHoursPerDay; ++h) {
      if (!row[h].is_number_integer()) {
        schema_error(where, day + "[" + std::to_string(h) + "] must be an integer");
      }
      m[d][h] = row[h].get<int>();
    }
  }
  return m;
}

json week_to_json(const WeekMatrix& m) {
  json out = json::object();
  for (int d = 0; d < kDaysPerWeek; ++d) out[std::string(kDayNames[d])] = m[d];
  return out;
}

void check_week(const WeekMatrix& m, const std::string& where) {
  for (int d = 0; d < kDaysPerWeek; ++d) {
    for (int h = 0; h < kHoursPerDay; ++h) {
      if (m[d][h] < 0 || m[d][h] > 100) {
        invariant_error(where, std::string(kDayNames[d]) + "[" + std::to_string(h) +
                                   "] = " + std::to_string(m[d][h]) + " outside [0, 100]");
      }
    }
  }
}

void check_point(const GeoPoint& p, const std::string& where) {
  if (!is_valid(p)) invariant_error(where, "lat/lng out of range");
}

int parse_clock(std::string_view text, const std::string& where) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) schema_error(where, "bad time '" + std::string(text) + "'");
  const int hh = parse_int(text.substr(0, colon), where);
  const int mm = parse_int(text.substr(colon + 1), where);
  if (hh < 0 || hh > 24 || mm < 0 || mm > 59 || (hh == 24 && mm != 0)) {
    schema_error(where, "bad time '" + std::string(text) + "'");
  }
  return hh * 3600 + mm * 60;
}

std::string clock_text(int sec) {
  std::ostringstream os;
  os << std::setw(2) << std::setfill('0') << sec / 3600 << ':' << std::setw(2)
     << std::setfill('0') << (sec % 3600) / 60;
  return os.str();
}

std::vector<PopularityProfile> load_places(const fs::path& path) {
  auto in = open_in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    schema_error(path.string(), e.what());
  }
  if (!doc.is_array()) schema_error(path.string(), "expected a JSON array of places");
  if (doc.empty()) schema_error(path.string(), "places file is empty");

  std::vector<PopularityProfile> places;
  places.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    std::string where = path.filename().string() + " record " + std::to_string(i);
    if (!rec.is_object()) schema_error(where, "expected an object");
    PopularityProfile p;
    p.place_id = string_field(rec, "place_id", where);
    where += " (place_id=" + p.place_id + ")";
    p.name = string_field(rec, "name", where);
    p.location = {number_field(rec, "lat", where), number_field(rec, "lng", where)};
    p.min_time = number_field(rec, "min_time", where);
    p.max_time = number_field(rec, "max_time", where);
    p.rp = parse_week(field(rec, "populartimes", where), where + " populartimes");
    places.push_back(std::move(p));
  }
  return places;
}

std::vector<CarPark> load_carparks(const fs::path& path) {
  auto in = open_in(path);
  csv::Reader reader(in);
  const std::string file = path.filename().string();
  auto header = reader.next_row();
  if (!header) schema_error(file, "carparks file is empty");

  static const std::vector<std::string> kExpected = {
      "carpark_id", "name",        "lat",         "lng",          "capacity",
      "price_per_hour", "rating",  "max_height",  "opening_mon",  "opening_tue",
      "opening_wed", "opening_thu", "opening_fri", "opening_sat", "opening_sun"};
  if (*header != kExpected) schema_error(file, "unexpected header");

  std::vector<CarPark> carparks;
  while (auto row = reader.next_row()) {
    if (row->size() == 1 && row->front().empty()) continue;  // trailing blank line
    std::string where = file + " line " + std::to_string(reader.line());
    if (row->size() != kExpected.size()) {
      schema_error(where, "expected " + std::to_string(kExpected.size()) + " columns");
    }
    const auto& r = *row;
    CarPark c;
    c.carpark_id = r[0];
    where += " (carpark_id=" + c.carpark_id + ")";
    c.name = r[1];
    c.location = {parse_number(r[2], where + " lat"), parse_number(r[3], where + " lng")};
    c.capacity = parse_int(r[4], where + " capacity");
    c.price_per_hour = parse_number(r[5], where + " price_per_hour");
    c.rating = parse_number(r[6], where + " rating");
    c.max_height = parse_number(r[7], where + " max_height");
    for (int d = 0; d < kDaysPerWeek; ++d) {
      try {
        c.opening[d] = parse_opening(r[8 + d]);
      } catch (const Error& e) {
        throw Error(e.kind(), where + " " + kExpected[8 + d] + ": " + e.what());
      }
    }
    carparks.push_back(std::move(c));
  }
  if (carparks.empty()) schema_error(file, "carparks file has no records");
  return carparks;
}

std::vector<VehicleSpec> load_vehicles(const fs::path& path) {
  auto in = open_in(path);
  csv::Reader reader(in);
  const std::string file = path.filename().string();
  auto header = reader.next_row();
  if (!header) schema_error(file, "vehicles file is empty");
  if (*header != std::vector<std::string>{"vin", "height", "length", "width"}) {
    schema_error(file, "unexpected header");
  }
  std::vector<VehicleSpec> vehicles;
  while (auto row = reader.next_row()) {
    if (row->size() == 1 && row->front().empty()) continue;
    std::string where = file + " line " + std::to_string(reader.line());
    if (row->size() != 4) schema_error(where, "expected 4 columns");
    const auto& r = *row;
    where += " (vin=" + r[0] + ")";
    vehicles.push_back({r[0], parse_number(r[1], where + " height"),
                        parse_number(r[2], where + " length"),
                        parse_number(r[3], where + " width")});
  }
  if (vehicles.empty()) schema_error(file, "vehicles file has no records");
  return vehicles;
}

}  // namespace

bool CarPark::is_open(int day, int second_of_day) const noexcept {
  if (day < 0 || day >= kDaysPerWeek) return false;
  for (const auto& w : opening[day]) {
    if (second_of_day >= w.open_sec && second_of_day < w.close_sec) return true;
  }
  return false;
}

std::vector<OpeningWindow> parse_opening(std::string_view cell) {
  std::vector<OpeningWindow> windows;
  if (cell == "closed") return windows;
  const std::string where = "opening '" + std::string(cell) + "'";
  if (cell.empty()) schema_error(where, "empty cell");
  std::size_t pos = 0;
  while (pos <= cell.size()) {
    const auto semi = cell.find(';', pos);
    const auto part = cell.substr(pos, semi == std::string_view::npos ? cell.size() - pos : semi - pos);
    const auto dash = part.find('-');
    if (dash == std::string_view::npos) schema_error(where, "expected HH:MM-HH:MM");
    OpeningWindow w{parse_clock(part.substr(0, dash), where), parse_clock(part.substr(dash + 1), where)};
    if (w.open_sec >= w.close_sec) invariant_error(where, "window must open before it closes");
    if (w.open_sec >= kSecondsPerDay) invariant_error(where, "window opens past midnight");
    windows.push_back(w);
    if (semi == std::string_view::npos) break;
    pos = semi + 1;
  }
  std::sort(windows.begin(), windows.end(),
            [](const auto& a, const auto& b) { return a.open_sec < b.open_sec; });
  for (std::size_t i = 1; i < windows.size(); ++i) {
    if (windows[i].open_sec < windows[i - 1].close_sec) invariant_error(where, "overlapping windows");
  }
  return windows;
}

std::string format_opening(const std::vector<OpeningWindow>& windows) {
  if (windows.empty()) return "closed";
  std::string out;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (i) out += ';';
    out += clock_text(windows[i].open_sec) + '-' + clock_text(windows[i].close_sec);
  }
  return out;
}

void validate(const DatasetBundle& bundle) {
  if (bundle.places.empty()) schema_error("bundle", "no places");
  if (bundle.carparks.empty()) schema_error("bundle", "no carparks");
  if (bundle.vehicles.empty()) schema_error("bundle", "no vehicles");
  check_point(bundle.center, "center");

  std::set<std::string> ids;
  for (const auto& p : bundle.places) {
    const std::string where = "place " + p.place_id;
    if (p.place_id.empty()) schema_error(where, "empty place_id");
    if (!ids.insert(p.place_id).second) invariant_error(where, "duplicate place_id");
    check_point(p.location, where);
    if (!(p.min_time > 0.0)) invariant_error(where, "min_time must be > 0");
    if (!(p.max_time >= p.min_time)) invariant_error(where, "max_time must be >= min_time");
    check_week(p.rp, where + " rp");
  }
  ids.clear();
  for (const auto& c : bundle.carparks) {
    const std::string where = "carpark " + c.carpark_id;
    if (!ids.insert(c.carpark_id).second) invariant_error(where, "duplicate carpark_id");
    check_point(c.location, where);
    if (c.capacity <= 0) invariant_error(where, "capacity must be > 0");
    if (!(c.price_per_hour >= 0.0)) invariant_error(where, "price_per_hour must be >= 0");
    if (!(c.rating >= 1.0 && c.rating <= 5.0)) invariant_error(where, "rating outside [1, 5]");
    if (!(c.max_height > 0.0)) invariant_error(where, "max_height must be > 0");
    for (int d = 0; d < kDaysPerWeek; ++d) {
      const auto& ws = c.opening[d];
      for (std::size_t i = 0; i < ws.size(); ++i) {
        if (ws[i].open_sec < 0 || ws[i].open_sec >= ws[i].close_sec ||
            ws[i].close_sec > kSecondsPerDay) {
          invariant_error(where, "bad opening window on " + std::string(kDayNames[d]));
        }
        if (i && ws[i].open_sec < ws[i - 1].close_sec) {
          invariant_error(where, "overlapping opening windows on " + std::string(kDayNames[d]));
        }
      }
    }
  }
  ids.clear();
  for (const auto& v : bundle.vehicles) {
    const std::string where = "vehicle " + v.vin;
    if (v.vin.empty()) schema_error(where, "empty vin");
    if (!ids.insert(v.vin).second) invariant_error(where, "duplicate vin");
    if (!(v.height > 0.0) || !(v.length > 0.0) || !(v.width > 0.0)) {
      invariant_error(where, "dimensions must be > 0");
    }
  }
  if (bundle.traffic) check_week(*bundle.traffic, "traffic");
}

DatasetBundle load_datasets(const fs::path& places_path, const fs::path& carparks_path,
                            const fs::path& vehicles_path, const IngestConfig& config) {
  DatasetBundle bundle;
  bundle.places = load_places(places_path);
  bundle.carparks = load_carparks(carparks_path);
  bundle.vehicles = load_vehicles(vehicles_path);
  bundle.center = config.center;
  if (config.traffic_path) bundle.traffic = read_week_matrix(*config.traffic_path);
  validate(bundle);
  return bundle;
}

WeekMatrix read_week_matrix(const fs::path& path) {
  auto in = open_in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    schema_error(path.string(), e.what());
  }
  WeekMatrix m = parse_week(doc, path.filename().string());
  check_week(m, path.filename().string());
  return m;
}

void write_week_matrix(const fs::path& path, const WeekMatrix& matrix) {
  auto out = open_out(path);
  out << week_to_json(matrix).dump(2) << '\n';
  finish(out, path);
}

void write_places(const fs::path& path, const std::vector<PopularityProfile>& places) {
  json doc = json::array();
  for (const auto& p : places) {
    doc.push_back({{"place_id", p.place_id},
                   {"name", p.name},
                   {"lat", p.location.lat},
                   {"lng", p.location.lng},
                   {"min_time", p.min_time},
                   {"max_time", p.max_time},
                   {"populartimes", week_to_json(p.rp)}});
  }
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

void write_carparks(const fs::path& path, const std::vector<CarPark>& carparks) {
  auto out = open_out(path);
  out << "carpark_id,name,lat,lng,capacity,price_per_hour,rating,max_height,"
         "opening_mon,opening_tue,opening_wed,opening_thu,opening_fri,opening_sat,opening_sun\n";
  for (const auto& c : carparks) {
    std::vector<std::string> row = {c.carpark_id,
                                    c.name,
                                    csv::format_double(c.location.lat),
                                    csv::format_double(c.location.lng),
                                    std::to_string(c.capacity),
                                    csv::format_double(c.price_per_hour),
                                    csv::format_double(c.rating),
                                    csv::format_double(c.max_height)};
    for (const auto& day : c.opening) row.push_back(format_opening(day));
    csv::write_row(out, row);
  }
  finish(out, path);
}

void write_vehicles(const fs::path& path, const std::vector<VehicleSpec>& vehicles) {
  auto out = open_out(path);
  out << "vin,height,length,width\n" << std::fixed << std::setprecision(3);
  for (const auto& v : vehicles) {
    out << csv::escape(v.vin) << ',' << v.height << ',' << v.length << ',' << v.width << '\n';
  }
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Synthetic fixtures

namespace {

constexpr std::array<std::string_view, 30> kFixtureNames = {
    "Flinders Street Station",
    "Royal Botanic Gardens Victoria",
    "Melbourne Museum",
    "Melbourne Cricket Ground",
    "Queen Victoria Market, Shed A",
    "Federation Square",
    "State Library Victoria",
    "Melbourne Skydeck",
    "Southern Cross Station",
    "National Gallery of Victoria",
    "Crown Melbourne",
    "Melbourne Aquarium",
    "Royal Exhibition Building",
    "Shrine of Remembrance",
    "Docklands Harbour Esplanade",
    "Chinatown \"Little Bourke\"",
    "Hosier Lane",
    "Block Arcade",
    "Melbourne Central",
    "Arts Centre Melbourne",
    "Rod Laver Arena",
    "Marvel Stadium",
    "St Paul's Cathedral",
    "Parliament House",
    "Old Melbourne Gaol",
    "Fitzroy Gardens",
    "Southbank Promenade",
    "Emporium Melbourne",
    "Immigration Museum",
    "Melbourne Town Hall",
};

double round_to(double x, double step) { return std::round(x / step) * step; }

double round_decimals(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

std::string padded_id(std::string_view prefix, int n) {
  std::ostringstream os;
  os << prefix << std::setw(3) << std::setfill('0') << n;
  return os.str();
}

double bump(double x, double center, double width) {
  const double z = (x - center) / width;
  return std::exp(-0.5 * z * z);
}

WeekMatrix fixture_curve(Rng& rng) {
  const double morning_at = rng.uniform(8.0, 12.0);
  const double morning_w = rng.uniform(1.5, 3.0);
  const double morning_amp = rng.uniform(30.0, 70.0);
  const double evening_at = rng.uniform(15.0, 19.0);
  const double evening_w = rng.uniform(2.0, 4.0);
  const double evening_amp = rng.uniform(60.0, 100.0);
  const double weekend_scale = rng.uniform(0.8, 1.3);
  const double weekend_shift = rng.uniform(0.5, 2.0);

  std::array<std::array<double, kHoursPerDay>, kDaysPerWeek> raw{};
  double peak = 0.0;
  for (int d = 0; d < kDaysPerWeek; ++d) {
    const bool weekend = d >= 5;
    const double day_scale = (weekend ? weekend_scale : 1.0) * rng.uniform(0.9, 1.1);
    const double shift = weekend ? weekend_shift : 0.0;
    for (int h = 0; h < kHoursPerDay; ++h) {
      const double x = h + 0.5;
      double v = morning_amp * bump(x, morning_at + shift, morning_w) +
                 evening_amp * bump(x, evening_at + shift, evening_w);
      // late-night activity wraps around midnight
      v += 0.6 * evening_amp * bump(x + 24.0, evening_at + shift, evening_w + 1.5);
      if (h >= 2 && h <= 5) v *= 0.25;
      v = std::max(0.0, v * day_scale + rng.normal(0.0, 3.0));
      raw[d][h] = v;
      peak = std::max(peak, v);
    }
  }
  WeekMatrix m{};
  for (int d = 0; d < kDaysPerWeek; ++d) {
    for (int h = 0; h < kHoursPerDay; ++h) {
      const double scaled = peak > 0.0 ? 100.0 * raw[d][h] / peak : 0.0;
      m[d][h] = std::clamp(static_cast<int>(std::lround(scaled)), 0, 100);
    }
  }
  return m;
}

std::array<std::vector<OpeningWindow>, kDaysPerWeek> fixture_opening(Rng& rng) {
  std::array<std::vector<OpeningWindow>, kDaysPerWeek> opening;
  const double pick = rng.uniform();
  for (int d = 0; d < kDaysPerWeek; ++d) {
    const bool weekend = d >= 5;
    if (pick < 0.4) {
      opening[d] = {{0, kSecondsPerDay}};
    } else if (pick < 0.7) {
      opening[d] = {{6 * 3600, kSecondsPerDay}};
    } else if (pick < 0.9) {
      opening[d] = weekend ? std::vector<OpeningWindow>{{8 * 3600, 20 * 3600}}
                           : std::vector<OpeningWindow>{{7 * 3600, 22 * 3600}};
    } else if (!weekend) {
      opening[d] = {{6 * 3600 + 1800, 19 * 3600 + 1800}};
    }
  }
  return opening;
}

std::string fixture_vin(Rng& rng) {
  static constexpr std::string_view kChars = "ABCDEFGHJKLMNPRSTUVWXYZ0123456789";
  std::string vin(17, '0');
  for (auto& ch : vin) ch = kChars[rng.below(kChars.size())];
  return vin;
}

}  // namespace

FixturePaths FixturePaths::in(const fs::path& dir) {
  return {dir / "places.json", dir / "carparks.csv", dir / "vehicles.csv", dir / "fixture.json"};
}

DatasetBundle make_fixtures(const FixtureSpec& spec) {
  if (spec.n_places < 1 || spec.n_carparks < 1 || spec.n_vehicles < 1) {
    throw Error(ErrorKind::DomainError, "fixture counts must be >= 1");
  }
  if (!(spec.radius_m > 0.0)) throw Error(ErrorKind::DomainError, "fixture radius must be > 0");
  if (!is_valid(spec.center)) throw Error(ErrorKind::DomainError, "fixture center out of range");

  DatasetBundle bundle;
  bundle.center = spec.center;

  Rng place_rng = Rng::derive(spec.seed, "fixture.places");
  for (int i = 0; i < spec.n_places; ++i) {
    PopularityProfile p;
    p.place_id = padded_id("P", i + 1);
    p.name = i < static_cast<int>(kFixtureNames.size())
                 ? std::string(kFixtureNames[i])
                 : "Fixture Place " + std::to_string(i + 1);
    p.location = sample_origin(spec.center, spec.radius_m, place_rng);
    const double a = round_decimals(place_rng.uniform(30.0, 240.0), 1);
    const double b = round_decimals(place_rng.uniform(30.0, 240.0), 1);
    p.min_time = std::min(a, b);
    p.max_time = std::max(a, b);
    p.rp = fixture_curve(place_rng);
    bundle.places.push_back(std::move(p));
  }

  Rng park_rng = Rng::derive(spec.seed, "fixture.carparks");
  for (int i = 0; i < spec.n_carparks; ++i) {
    CarPark c;
    c.carpark_id = padded_id("CP", i + 1);
    c.name = "Fixture Car Park " + std::to_string(i + 1);
    c.location = sample_origin(spec.center, spec.radius_m, park_rng);
    c.opening = fixture_opening(park_rng);
    c.capacity = 50 + static_cast<int>(park_rng.below(751));
    c.price_per_hour = round_to(park_rng.uniform(4.0, 20.0), 0.5);
    c.rating = round_decimals(park_rng.uniform(3.0, 4.9), 1);
    c.max_height = round_decimals(park_rng.uniform(1.9, 2.5), 2);
    bundle.carparks.push_back(std::move(c));
  }

  Rng vehicle_rng = Rng::derive(spec.seed, "fixture.vehicles");
  std::set<std::string> vins;
  while (static_cast<int>(bundle.vehicles.size()) < spec.n_vehicles) {
    VehicleSpec v;
    v.vin = fixture_vin(vehicle_rng);
    v.height = round_decimals(vehicle_rng.uniform(1.35, 2.1), 3);
    v.length = round_decimals(vehicle_rng.uniform(3.6, 5.4), 3);
    v.width = round_decimals(vehicle_rng.uniform(1.6, 2.05), 3);
    if (vins.insert(v.vin).second) bundle.vehicles.push_back(std::move(v));
  }

  validate(bundle);
  return bundle;
}

DatasetBundle bootstrap_fixtures(const FixtureSpec& spec, const fs::path& out_dir) {
  DatasetBundle bundle = make_fixtures(spec);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IOError, "cannot create " + out_dir.string() + ": " + ec.message());

  const auto paths = FixturePaths::in(out_dir);
  write_places(paths.places, bundle.places);
  write_carparks(paths.carparks, bundle.carparks);
  write_vehicles(paths.vehicles, bundle.vehicles);

  json meta = {{"seed", spec.seed},
               {"n_places", spec.n_places},
               {"n_carparks", spec.n_carparks},
               {"n_vehicles", spec.n_vehicles},
               {"center", {{"lat", spec.center.lat}, {"lng", spec.center.lng}}},
               {"radius_m", spec.radius_m}};
  auto out = open_out(paths.meta);
  out << meta.dump(2) << '\n';
  finish(out, paths.meta);
  return bundle;
}

}  // namespace cqsim
