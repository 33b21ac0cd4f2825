#include <doctest.h>

#include <sstream>
#include <thread>

#include "cqsim/cli.hpp"
#include "cqsim/harness.hpp"
#include "cqsim/store.hpp"
#include "support.hpp"

using namespace cqsim;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("unknown flags exit 1 with usage") {
  const auto r = invoke({"generate", "--out", "x", "--no-such-flag"});
  CHECK(r.code == 1);
  CHECK(r.err.find("--no-such-flag") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(invoke({}).code == 1);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("out-of-range p_query exits 1 naming the field") {
  testing::TempDir dir;
  const auto r = invoke({"generate", "--out", (dir / "s").string(), "--p-query", "1.3"});
  CHECK(r.code == 1);
  CHECK(r.err.find("p_query") != std::string::npos);
  CHECK(!std::filesystem::exists(dir / "s"));
}

TEST_CASE("config bounds are rejected before any work") {
  testing::TempDir dir;
  const std::vector<std::vector<std::string>> bad = {
      {"--alpha", "-1"},
      {"--p-query", "-0.1"},
      {"--alpha-at", "P1:24=2"},
      {"--alpha-at", "P1-3=2"},
      {"--radius", "0"},
      {"--center-lat", "95"},
      {"--cond-rating", "1.5"},
      {"--mod-fraction", "-0.5"},
      {"--mod-param-prob", "2"},
      {"--max-mod-height", "-1"},
      {"--price-expected-time", "0.5"},
      {"--onstreet-sd", "-1"},
      {"--rush", "9-7"},
      {"--factor-probs", "0.5,0.5,0.5"},
      {"--span-mode", "other"},
      {"--k-min", "0"},
      {"--threads", "0"},
      {"--query-id", ""},
  };
  for (const auto& extra : bad) {
    std::vector<std::string> args{"generate", "--out", (dir / "s").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = invoke(args);
    INFO(extra[0] << " " << extra[1] << ": " << r.err);
    CHECK(r.code == 1);
  }
  CHECK(invoke({"run", "--store", "x", "--endpoint", "http://127.0.0.1:1/", "--start", "7:00:00"}).code == 1);
  CHECK(invoke({"run", "--store", "x", "--endpoint", "http://127.0.0.1:1/", "--compression", "0.1"}).code == 1);
  CHECK(invoke({"run", "--store", "x", "--endpoint", "http://127.0.0.1:1/", "--duration", "5x"}).code == 1);
  CHECK(invoke({"sink", "--port", "70000"}).code == 1);
  CHECK(invoke({"export", "--store", (dir / "missing").string(), "--out", (dir / "o.csv").string()}).code == 1);
}

TEST_CASE("flags and config files are equivalent") {
  testing::TempDir dir;
  const std::vector<std::string> args = {"--seed", "77", "generate", "--out", "store", "--alpha", "3.5",
                                         "--p-query", "0.4", "--alpha-at", "P2:9=5", "--cond-price", "0.7",
                                         "--rush", "6-8", "--rush", "15-17", "--factor-probs", "0.2,0.3,0.5",
                                         "--span-mode", "derived", "--verbatim-row5", "--threads", "3"};
  const auto from_flags = cli::generation_config_from_args(args);
  CHECK(from_flags.seed == 77);
  CHECK(from_flags.volume.alpha == 3.5);
  CHECK(from_flags.volume.alpha_at.at({"P2", 9}) == 5.0);
  REQUIRE(from_flags.rush_windows);
  CHECK(from_flags.rush_windows->size() == 2);

  const auto text = cli::config_text_from_args(args);
  const auto file = dir / "generate.toml";
  testing::spit(file, text);
  const auto from_file = cli::generation_config_from_args({"--config", file.string(), "generate", "--out", "store"});
  CHECK(to_json(from_file) == to_json(from_flags));
  CHECK(from_file.threads == from_flags.threads);
  CHECK(cli::config_text_from_args({"--config", file.string(), "generate", "--out", "store"}) == text);

  // flags still override the file
  const auto mixed = cli::generation_config_from_args({"--config", file.string(), "generate", "--alpha", "9"});
  CHECK(mixed.volume.alpha == 9.0);
  CHECK(mixed.volume.p_query == 0.4);
}

TEST_CASE("bootstrap, generate, run, report end to end") {
  testing::TempDir dir;
  const auto data = (dir / "data").string();
  const auto store = (dir / "store").string();
  auto r = invoke({"--seed", "5", "bootstrap", "--out", data, "--n-places", "2", "--n-carparks", "12",
                   "--n-vehicles", "20"});
  REQUIRE_MESSAGE(r.code == 0, r.err);

  r = invoke({"--seed", "5", "generate", "--data-dir", data, "--alpha", "0.05", "--out", store, "--created-at", "0"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto opened = TemplateStore::open(store);
  REQUIRE(opened.size() > 0);
  CHECK(opened.manifest().created_at == 0);

  // a second generate with the same seed writes identical bytes
  const auto again = (dir / "again").string();
  r = invoke({"--seed", "5", "generate", "--data-dir", data, "--alpha", "0.05", "--out", again, "--created-at", "0",
              "--threads", "2"});
  REQUIRE(r.code == 0);
  CHECK(testing::slurp(std::filesystem::path(store) / "templates.ndjson") ==
        testing::slurp(std::filesystem::path(again) / "templates.ndjson"));
  CHECK(testing::slurp(std::filesystem::path(store) / "manifest.json") ==
        testing::slurp(std::filesystem::path(again) / "manifest.json"));

  // replay Monday morning quickly against an in-process sink
  int first_second = kSecondsPerWeek;
  for (const auto& rec : opened.records()) first_second = std::min(first_second, rec.week_second());
  const int start_day = first_second / kSecondsPerDay;
  const int start_hour = (first_second % kSecondsPerDay) / 3600;
  std::size_t expected = 0;
  for (const auto& rec : opened.records()) {
    if (rec.week_second() >= start_day * kSecondsPerDay + start_hour * 3600 &&
        rec.week_second() < start_day * kSecondsPerDay + (start_hour + 1) * 3600) {
      ++expected;
    }
  }
  SinkOptions so;
  so.log_path = dir / "sink.ndjson";
  Sink sink(so);
  sink.start();
  const auto report_path = (dir / "run.json").string();
  char start[16];
  std::snprintf(start, sizeof start, "%d:%02d:00", start_day, start_hour);
  r = invoke({"run", "--store", store, "--endpoint", sink.url(), "--start", start, "--duration", "1h",
              "--compression", "1800", "--max-in-flight", "4", "--report", report_path});
  sink.stop();
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(sink.size() == expected);

  const auto fidelity = (dir / "fidelity.json").string();
  r = invoke({"report", "--store", store, "--log", so.log_path.string(), "--run-report", report_path, "--out",
              fidelity});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto doc = nlohmann::json::parse(testing::slurp(fidelity));
  CHECK(doc["totals"]["missing"] == 0);
  CHECK(doc["totals"]["duplicates"] == 0);
  CHECK(doc["totals"]["scheduled"] == expected);

  const auto csv = (dir / "t.csv").string();
  r = invoke({"export", "--store", store, "--out", csv});
  REQUIRE(r.code == 0);
  CHECK(testing::slurp(csv).rfind(std::string(kCsvHeader) + "\n", 0) == 0);

  r = invoke({"analyze", "--data-dir", data, "--store", store});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto analysis = nlohmann::json::parse(r.out);
  CHECK(analysis["store"]["manifest"]["record_count"] == opened.size());
}

TEST_CASE("run refuses a registry that does not cover the store") {
  testing::TempDir dir;
  const auto data = (dir / "data").string();
  const auto store = (dir / "store").string();
  REQUIRE(invoke({"bootstrap", "--out", data, "--n-places", "1"}).code == 0);
  REQUIRE(invoke({"generate", "--data-dir", data, "--alpha", "0.01", "--query-id", "custom", "--out", store}).code ==
          0);
  const auto r = invoke({"run", "--store", store, "--endpoint", "http://127.0.0.1:1/"});
  CHECK(r.code == 1);
  CHECK(r.err.find("custom") != std::string::npos);
}
