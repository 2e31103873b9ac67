#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include "pmuopt/error.hpp"
#include "pmuopt/io.hpp"
#include "test_support.hpp"

using namespace pmuopt;
using Catch::Approx;

namespace {

const PlacementDataset& small_dataset() {
  static const PlacementDataset d = [] {
    ScenarioConfig cfg = ScenarioConfig::placement_defaults();
    cfg.hours = {0, 12};
    const auto records = generate_placement_dataset(testsupport::feeder12(), cfg);
    PlacementDataset ds = make_placement_dataset(records, full_layout(*records.front().index, records.front().substation));
    ds.seed = 77;
    ds.input_hash = "0123456789abcdef";
    return ds;
  }();
  return d;
}

PmudFile tiny_pmud() {
  PmudFile f;
  f.samples = 3;
  f.timesteps = 2;
  f.buses = {"s", "b"};
  f.features = 18;
  f.locations = 2;
  f.location_names = {"L1", "L2"};
  for (std::size_t i = 0; i < 3u * 2u * 18u; ++i) f.data.push_back(static_cast<float>(i) * 0.25f - 3.0f);
  f.location = {0, 1, 1};
  f.type = {0, 4, 10};
  f.seed = 9;
  f.input_hash = "feed";
  return f;
}

std::uint32_t le_u32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(s[at + static_cast<std::size_t>(k)]);
  return v;
}

std::uint16_t le_u16(const std::string& s, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(s[at]) | (static_cast<unsigned char>(s[at + 1]) << 8));
}

float le_f32(const std::string& s, std::size_t at) {
  const std::uint32_t bits = le_u32(s, at);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

TEST_CASE("fnv1a reference vectors") {
  CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
  CHECK(hex64(fnv1a64("foobar")) == "85944171f73967e8");
  CHECK(hex64(0x1) == "0000000000000001");
}

TEST_CASE("file fingerprint hashes the bytes") {
  testsupport::TempDir dir;
  testsupport::write_text(dir.path() / "x.txt", "foobar");
  CHECK(file_fingerprint(dir.path() / "x.txt") == "85944171f73967e8");
  CHECK_THROWS(read_file(dir.path() / "missing.txt"));
}

TEST_CASE("double formatting round-trips") {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-300.0, 300.0));
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.0) == "-2");
}

TEST_CASE("placement csv round trip is exact") {
  const PlacementDataset& ds = small_dataset();
  std::stringstream buf;
  write_placement_csv(buf, ds);
  const std::string text = buf.str();
  CHECK(text.rfind("# pmuopt placement seed=77 ", 0) == 0);
  CHECK(text.find("input_hash=0123456789abcdef") != std::string::npos);
  const std::string header = text.substr(text.find('\n') + 1, text.find('\n', text.find('\n') + 1) - text.find('\n') - 1);
  CHECK(header.rfind("scenario,line,type,t,rf,rg,hour,650_dV0_re,", 0) == 0);

  std::stringstream in(text);
  const PlacementDataset back = read_placement_csv(in);
  CHECK(back.seed == 77);
  CHECK(back.input_hash == ds.input_hash);
  REQUIRE(back.features.x.rows() == ds.features.x.rows());
  REQUIRE(back.features.x.cols() == ds.features.x.cols());
  CHECK((back.features.x.array() == ds.features.x.array()).all());
  CHECK(back.features.layout.buses() == ds.features.layout.buses());
  CHECK(back.features.labels == ds.features.labels);
  REQUIRE(back.specs.size() == ds.specs.size());
  for (std::size_t i = 0; i < ds.specs.size(); ++i) {
    CHECK(back.specs[i].line == ds.specs[i].line);
    CHECK(back.specs[i].kind == ds.specs[i].kind);
    CHECK(back.specs[i].position == ds.specs[i].position);
    CHECK(back.specs[i].rf_ohm == ds.specs[i].rf_ohm);
    CHECK(back.specs[i].rg_ohm == ds.specs[i].rg_ohm);
    CHECK(back.specs[i].hour == ds.specs[i].hour);
  }
  std::stringstream again;
  write_placement_csv(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("placement csv rejects malformed input") {
  std::string text;
  {
    std::stringstream buf;
    write_placement_csv(buf, small_dataset());
    text = buf.str();
  }
  SECTION("bad number") {
    std::string bad = text;
    bad.replace(bad.find_last_of(','), 1, ",zz");
    std::stringstream in(bad);
    CHECK_THROWS_AS(read_placement_csv(in), ParseError);
  }
  SECTION("unknown fault type") {
    std::string bad = text;
    const auto row = bad.find('\n', bad.find('\n') + 1) + 1;
    const auto c1 = bad.find(',', row);
    const auto c2 = bad.find(',', c1 + 1), c3 = bad.find(',', c2 + 1);
    bad.replace(c2 + 1, c3 - c2 - 1, "XYZ");
    std::stringstream in(bad);
    CHECK_THROWS_AS(read_placement_csv(in), ParseError);
  }
  SECTION("header out of layout") {
    std::string bad = text;
    bad.replace(bad.find("650_dV0_re"), 10, "650_dV9_re");
    std::stringstream in(bad);
    CHECK_THROWS_AS(read_placement_csv(in), ParseError);
  }
}

TEST_CASE("pmud byte layout") {
  const PmudFile f = tiny_pmud();
  std::stringstream buf;
  write_pmud(buf, f);
  const std::string s = buf.str();
  const std::size_t n = 3, t = 2, d = 18;
  REQUIRE(s.size() == 4 + 5 * 4 + 4 * n * t * d + 2 * n + 2 * n);
  CHECK(s.substr(0, 4) == "PMUD");
  CHECK(le_u32(s, 4) == 1);
  CHECK(le_u32(s, 8) == n);
  CHECK(le_u32(s, 12) == t);
  CHECK(le_u32(s, 16) == d);
  CHECK(le_u32(s, 20) == 2);
  for (std::size_t i = 0; i < n * t * d; ++i) CHECK(le_f32(s, 24 + 4 * i) == f.data[i]);
  const std::size_t labels = 24 + 4 * n * t * d;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(le_u16(s, labels + 2 * i) == f.location[i]);
    CHECK(le_u16(s, labels + 2 * n + 2 * i) == f.type[i]);
  }
}

TEST_CASE("pmud file round trip with sidecar") {
  testsupport::TempDir dir;
  const PmudFile f = tiny_pmud();
  const auto path = dir.path() / "train.pmud";
  write_pmud(path, f);
  CHECK(pmud_sidecar(path) == dir.path() / "train.pmud.json");
  const auto meta = nlohmann::json::parse(testsupport::slurp(pmud_sidecar(path)));
  CHECK(meta.at("buses") == nlohmann::json(f.buses));
  CHECK(meta.at("columns").size() == 18);
  CHECK(meta.at("type_names").size() == 11);

  const PmudFile back = read_pmud(path);
  CHECK(back.data == f.data);
  CHECK(back.location == f.location);
  CHECK(back.type == f.type);
  CHECK(back.buses == f.buses);
  CHECK(back.location_names == f.location_names);
  CHECK(back.seed == 9);
  CHECK(back.input_hash == "feed");
  write_pmud(dir.path() / "again.pmud", back);
  CHECK(testsupport::slurp(dir.path() / "again.pmud") == testsupport::slurp(path));
}

TEST_CASE("pmud reader rejects damaged files") {
  std::stringstream buf;
  write_pmud(buf, tiny_pmud());
  const std::string s = buf.str();
  SECTION("magic") {
    std::string bad = s;
    bad[0] = 'X';
    std::stringstream in(bad);
    CHECK_THROWS_AS(read_pmud(in), ParseError);
  }
  SECTION("version") {
    std::string bad = s;
    bad[4] = 2;
    std::stringstream in(bad);
    CHECK_THROWS_AS(read_pmud(in), ParseError);
  }
  SECTION("truncated") {
    std::stringstream in(s.substr(0, s.size() - 3));
    CHECK_THROWS_AS(read_pmud(in), ParseError);
  }
  SECTION("trailing bytes") {
    std::stringstream in(s + "x");
    CHECK_THROWS_AS(read_pmud(in), ParseError);
  }
  SECTION("location label out of range") {
    PmudFile f = tiny_pmud();
    f.location[2] = 5;
    CHECK_THROWS(f.check());
  }
}

TEST_CASE("pmud bus selection and row subsets") {
  PmudFile f = tiny_pmud();
  f.buses = {"s", "b", "c"};
  f.features = 24;
  f.data.clear();
  for (std::size_t i = 0; i < 3u * 2u * 24u; ++i) f.data.push_back(static_cast<float>(i));
  const std::vector<std::string> keep{"s", "c"};
  const PmudFile sel = f.select_buses(keep);
  CHECK(sel.features == 18);
  CHECK(sel.buses == keep);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t k = 0; k < 12; ++k) CHECK(sel.data[r * 18 + k] == f.data[r * 24 + k]);
    for (std::size_t k = 0; k < 6; ++k) CHECK(sel.data[r * 18 + 12 + k] == f.data[r * 24 + 18 + k]);
  }
  const std::vector<std::string> bad{"c", "s"};
  CHECK_THROWS_AS(f.select_buses(bad), ValidationError);

  const std::vector<std::size_t> rows{2, 0};
  const PmudFile sub = f.subset(rows);
  CHECK(sub.samples == 2);
  CHECK(sub.location == std::vector<std::uint16_t>{1, 0});
  CHECK(sub.type == std::vector<std::uint16_t>{10, 0});
  CHECK(sub.data[0] == f.data[2 * 48]);
}

TEST_CASE("cnn dataset converts to pmud") {
  ScenarioConfig cfg = ScenarioConfig::cnn_defaults(12);
  cfg.timesteps_pre = 3;
  cfg.timesteps_fault = 2;
  const CnnDataset ds = generate_cnn_dataset(testsupport::feeder12(), cfg);
  const PmudFile f = to_pmud(ds, 5, "abc");
  CHECK(f.samples == 12);
  CHECK(f.timesteps == 5);
  CHECK(f.features == 78);
  CHECK(f.locations == 11);
  CHECK(f.buses.front() == "650");
  CHECK(f.data == ds.data);
  f.check();
}

TEST_CASE("split of ten thousand rows") {
  std::vector<std::uint16_t> type(10000);
  Rng rng(2);
  for (auto& t : type) t = static_cast<std::uint16_t>(rng.index(11));
  const auto parts = stratified_split(type, {0.70, 0.15, 0.15}, 3);
  CHECK(parts[0].size() == 7000);
  CHECK(parts[1].size() == 1500);
  CHECK(parts[2].size() == 1500);
  std::vector<int> seen(10000, 0);
  for (const auto& p : parts)
    for (std::size_t i : p) ++seen[i];
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));

  std::map<int, int> total;
  for (auto t : type) ++total[t];
  const std::array<double, 3> ratios{0.70, 0.15, 0.15};
  for (std::size_t p = 0; p < 3; ++p) {
    std::map<int, int> count;
    for (std::size_t i : parts[p]) ++count[type[i]];
    for (const auto& [t, n] : total) CHECK(std::abs(count[t] - n * ratios[p]) <= 1.0 + 1e-9);
  }
  CHECK(stratified_split(type, ratios, 3) == parts);
  CHECK(stratified_split(type, ratios, 4) != parts);
}

TEST_CASE("split of small awkward counts stays within one sample") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 11 + rng.index(300);
    std::vector<std::uint16_t> type(n);
    for (auto& t : type) t = static_cast<std::uint16_t>(rng.index(5));
    const std::array<double, 3> ratios{0.7, 0.15, 0.15};
    const auto parts = stratified_split(type, ratios, static_cast<std::uint64_t>(trial));
    CHECK(parts[0].size() + parts[1].size() + parts[2].size() == n);
    std::map<int, int> total;
    for (auto t : type) ++total[t];
    for (std::size_t p = 0; p < 3; ++p) {
      std::map<int, int> count;
      for (std::size_t i : parts[p]) ++count[type[i]];
      for (const auto& [t, c] : total) CHECK(std::abs(count[t] - c * ratios[p]) < 1.0 + 1e-9);
    }
  }
}

TEST_CASE("placement report round trip") {
  testsupport::TempDir dir;
  PlacementResult r;
  r.selected = {"800", "840", "860"};
  r.additions = {"842", "860"};
  r.step_scores = {0.1, 0.5, 0.75};
  r.trajectory = {0.1, 0.5, 0.75};
  r.refinements = {{3, "842", "840", 0.7, 0.75}};
  r.recommended_count = 3;
  PlacementConfig cfg;
  cfg.budget = 3;
  cfg.seed = 42;
  const std::string text = placement_report_json(r, cfg, "deadbeef");
  const auto j = nlohmann::json::parse(text);
  for (const char* key : {"selected", "trajectory", "refinements", "recommended_count", "scorer", "config",
                          "dataset_fingerprint"})
    CHECK(j.contains(key));
  CHECK(j.at("scorer") == "svm_cv");
  CHECK(j.at("config").at("budget") == 3);

  const auto path = dir.path() / "report.json";
  write_placement_report(path, r, cfg, "deadbeef");
  const PlacementReport back = read_placement_report(path);
  CHECK(back.selected == r.selected);
  CHECK(back.trajectory == r.trajectory);
  CHECK(back.step_scores == r.step_scores);
  REQUIRE(back.refinements.size() == 1);
  CHECK(back.refinements[0].replacement == "840");
  CHECK(back.refinements[0].score_after == 0.75);
  CHECK(back.recommended_count == 3);
  CHECK(back.dataset_fingerprint == "deadbeef");
  CHECK(back.seed == 42);

  testsupport::write_text(dir.path() / "broken.json", "{\"selected\": [");
  CHECK_THROWS_AS(read_placement_report(dir.path() / "broken.json"), ParseError);
}

TEST_CASE("curve csv marks the recommended count") {
  PlacementResult r;
  r.step_scores = {0.2, 0.6, 0.55, 0.61};
  r.trajectory = {0.2, 0.6, 0.6, 0.61};
  r.recommended_count = 2;
  std::stringstream out;
  write_curve_csv(out, r, "abcd", 7);
  std::string line;
  std::getline(out, line);
  CHECK(line.rfind("#", 0) == 0);
  std::getline(out, line);
  CHECK(line == "pmu_count,best_score,step_score,recommended");
  std::vector<std::string> rows;
  while (std::getline(out, line)) rows.push_back(line);
  REQUIRE(rows.size() == 4);
  CHECK(rows[1] == "2,0.6,0.6,1");
  CHECK(rows[2] == "3,0.6,0.55,0");
}
