#include "pmuopt/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pmuopt/error.hpp"
#include "pmuopt/random.hpp"

namespace pmuopt {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_fingerprint(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(std::string_view text, const std::string& locus) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ParseError(locus, "not a number: '" + std::string(text) + "'");
  return v;
}

long long parse_int(std::string_view text, const std::string& locus) {
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ParseError(locus, "not an integer: '" + std::string(text) + "'");
  return v;
}

// Metadata "key=value" pairs of the leading comment line.
std::map<std::string, std::string> parse_comment(std::string_view line) {
  std::map<std::string, std::string> out;
  std::istringstream ss{std::string(line.substr(1))};
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return out;
}

const std::array<std::string, 7> kMetaColumns{"scenario", "line", "type", "t", "rf", "rg", "hour"};

}  // namespace

PlacementDataset make_placement_dataset(std::span<const PhasorRecord> records, const FeatureLayout& layout) {
  PlacementDataset ds;
  ds.features = build_feature_matrix(records, layout);
  for (const auto& r : records) ds.specs.push_back(r.spec);
  return ds;
}

void write_placement_csv(std::ostream& out, const PlacementDataset& data) {
  const auto& fm = data.features;
  if (data.specs.size() != fm.rows()) throw ValidationError("placement dataset specs and rows differ");
  out << "# pmuopt placement seed=" << data.seed << " input_hash=" << data.input_hash << "\n";
  for (std::size_t c = 0; c < kMetaColumns.size(); ++c) out << (c ? "," : "") << kMetaColumns[c];
  for (const auto& name : fm.layout.column_names()) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    const FaultSpec& s = data.specs[r];
    out << r << ',' << s.line << ',' << fault_type_name(s.kind) << ',' << format_double(s.position) << ','
        << format_double(s.rf_ohm) << ',' << format_double(s.rg_ohm) << ',' << s.hour;
    for (Eigen::Index c = 0; c < fm.x.cols(); ++c) out << ',' << format_double(fm.x(static_cast<Eigen::Index>(r), c));
    out << '\n';
  }
}

void write_placement_csv(const std::filesystem::path& path, const PlacementDataset& data) {
  auto out = open_out(path);
  write_placement_csv(out, data);
}

PlacementDataset read_placement_csv(std::istream& in) {
  PlacementDataset ds;
  std::string line;
  std::size_t lineno = 0;
  auto locus = [&](std::size_t col) { return std::to_string(lineno) + ":" + std::to_string(col + 1); };

  bool have_header = false;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (!have_header) {
        const auto meta = parse_comment(line);
        if (auto it = meta.find("seed"); it != meta.end())
          ds.seed = static_cast<std::uint64_t>(parse_int(it->second, locus(0)));
        if (auto it = meta.find("input_hash"); it != meta.end()) ds.input_hash = it->second;
      }
      continue;
    }
    const auto cells = split_csv(line);
    if (!have_header) {
      if (cells.size() < kMetaColumns.size()) throw ParseError(locus(0), "header lacks metadata columns");
      for (std::size_t c = 0; c < kMetaColumns.size(); ++c)
        if (cells[c] != kMetaColumns[c])
          throw ParseError(locus(c), "expected column '" + kMetaColumns[c] + "', got '" + std::string(cells[c]) + "'");
      for (std::size_t c = kMetaColumns.size(); c < cells.size(); ++c) names.emplace_back(cells[c]);
      have_header = true;
      continue;
    }
    if (cells.size() != kMetaColumns.size() + names.size())
      throw ParseError(locus(0), "expected " + std::to_string(kMetaColumns.size() + names.size()) + " cells, got " +
                                     std::to_string(cells.size()));
    FaultSpec s;
    s.line = std::string(cells[1]);
    const auto kind = parse_fault_type(cells[2]);
    if (!kind) throw ParseError(locus(2), "unknown fault type '" + std::string(cells[2]) + "'");
    s.kind = *kind;
    s.position = parse_double(cells[3], locus(3));
    s.rf_ohm = parse_double(cells[4], locus(4));
    s.rg_ohm = parse_double(cells[5], locus(5));
    s.hour = static_cast<int>(parse_int(cells[6], locus(6)));
    ds.specs.push_back(s);
    std::vector<double> row(names.size());
    for (std::size_t c = 0; c < names.size(); ++c)
      row[c] = parse_double(cells[kMetaColumns.size() + c], locus(kMetaColumns.size() + c));
    rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError("1:1", "missing header");
  if (rows.empty()) throw ValidationError("placement dataset has no rows");

  // Recover the bus order from the dV0_re columns; the layout must then reproduce the header.
  std::vector<std::string> buses;
  for (const auto& n : names) {
    const std::string suffix = "_dV0_re";
    if (n.size() > suffix.size() && n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0)
      buses.push_back(n.substr(0, n.size() - suffix.size()));
  }
  if (buses.empty()) throw ParseError("header", "no feature columns");
  FeatureLayout layout(buses);
  if (layout.column_names() != names) throw ParseError("header", "feature columns do not follow the bus block layout");

  ds.features.layout = layout;
  ds.features.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < names.size(); ++c)
      ds.features.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  for (const auto& s : ds.specs) ds.features.labels.push_back({s.line, s.kind});
  return ds;
}

PlacementDataset read_placement_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_placement_csv(in);
}

void PmudFile::check() const {
  const std::size_t expect = std::size_t{samples} * timesteps * features;
  if (data.size() != expect) throw ValidationError("pmud data size does not match its header");
  if (location.size() != samples || type.size() != samples) throw ValidationError("pmud label arrays do not match n");
  if (!buses.empty() && FeatureLayout(buses).width() != features)
    throw ValidationError("pmud bus layout does not match the feature count");
  for (auto l : location)
    if (l >= locations) throw ValidationError("pmud location label out of range");
  for (auto t : type)
    if (t >= kAllFaultTypes.size()) throw ValidationError("pmud type label out of range");
}

PmudFile PmudFile::select_buses(std::span<const std::string> selection) const {
  if (buses.empty()) throw ValidationError("pmud file has no bus layout");
  const FeatureLayout full(buses);
  for (const auto& b : selection)
    if (!full.find(b)) throw ValidationError("placement bus " + b + " is missing from the dataset");
  if (selection.empty() || selection.front() != full.substation())
    throw ValidationError("placement must start with the substation " + full.substation());
  const auto cols = full.columns_for(selection);
  PmudFile out = *this;
  out.features = static_cast<std::uint32_t>(cols.size());
  out.buses.assign(selection.begin(), selection.end());
  out.data.resize(std::size_t{samples} * timesteps * cols.size());
  for (std::size_t s = 0; s < std::size_t{samples} * timesteps; ++s)
    for (std::size_t c = 0; c < cols.size(); ++c) out.data[s * cols.size() + c] = data[s * features + cols[c]];
  return out;
}

PmudFile PmudFile::subset(std::span<const std::size_t> rows) const {
  PmudFile out = *this;
  const std::size_t stride = std::size_t{timesteps} * features;
  out.samples = static_cast<std::uint32_t>(rows.size());
  out.data.resize(rows.size() * stride);
  out.location.resize(rows.size());
  out.type.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(rows[k] * stride), stride,
                out.data.begin() + static_cast<std::ptrdiff_t>(k * stride));
    out.location[k] = location[rows[k]];
    out.type[k] = type[rows[k]];
  }
  return out;
}

PmudFile to_pmud(const CnnDataset& dataset, std::uint64_t seed, std::string input_hash) {
  PmudFile f;
  f.samples = static_cast<std::uint32_t>(dataset.samples);
  f.timesteps = static_cast<std::uint32_t>(dataset.timesteps);
  f.features = static_cast<std::uint32_t>(dataset.features);
  f.locations = static_cast<std::uint32_t>(dataset.location_names.size());
  f.data = dataset.data;
  f.location = dataset.location;
  f.type = dataset.type;
  f.buses = dataset.layout.buses();
  f.location_names = dataset.location_names;
  f.seed = seed;
  f.input_hash = std::move(input_hash);
  f.check();
  return f;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

void get_bytes(std::istream& in, unsigned char* dst, std::size_t n, const char* what) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw ParseError(what, "truncated pmud file");
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  get_bytes(in, b, 4, what);
  return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
}

}  // namespace

void write_pmud(std::ostream& out, const PmudFile& file) {
  file.check();
  out.write(kPmudMagic.data(), 4);
  put_u32(out, kPmudVersion);
  put_u32(out, file.samples);
  put_u32(out, file.timesteps);
  put_u32(out, file.features);
  put_u32(out, file.locations);
  for (float f : file.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  for (auto v : file.location) put_u16(out, v);
  for (auto v : file.type) put_u16(out, v);
}

PmudFile read_pmud(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kPmudMagic.data(), 4) != 0) throw ParseError("magic", "not a PMUD file");
  const std::uint32_t version = get_u32(in, "version");
  if (version != kPmudVersion) throw ParseError("version", "unsupported PMUD version " + std::to_string(version));
  PmudFile f;
  f.samples = get_u32(in, "n");
  f.timesteps = get_u32(in, "timesteps");
  f.features = get_u32(in, "d");
  f.locations = get_u32(in, "n_loc");
  const std::size_t count = std::size_t{f.samples} * f.timesteps * f.features;
  f.data.resize(count);
  std::vector<unsigned char> raw(count * 4);
  get_bytes(in, raw.data(), raw.size(), "data");
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint32_t bits = std::uint32_t{raw[4 * k]} | std::uint32_t{raw[4 * k + 1]} << 8 |
                               std::uint32_t{raw[4 * k + 2]} << 16 | std::uint32_t{raw[4 * k + 3]} << 24;
    std::memcpy(&f.data[k], &bits, 4);
  }
  std::vector<unsigned char> labels(std::size_t{f.samples} * 4);
  get_bytes(in, labels.data(), labels.size(), "labels");
  f.location.resize(f.samples);
  f.type.resize(f.samples);
  for (std::size_t k = 0; k < f.samples; ++k) {
    f.location[k] = static_cast<std::uint16_t>(labels[2 * k] | labels[2 * k + 1] << 8);
    const std::size_t o = 2 * std::size_t{f.samples} + 2 * k;
    f.type[k] = static_cast<std::uint16_t>(labels[o] | labels[o + 1] << 8);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailer", "trailing bytes after pmud labels");
  return f;
}

std::filesystem::path pmud_sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void write_pmud(const std::filesystem::path& path, const PmudFile& file) {
  {
    auto out = open_out(path, true);
    write_pmud(out, file);
  }
  json meta;
  meta["format"] = "PMUD";
  meta["version"] = kPmudVersion;
  meta["samples"] = file.samples;
  meta["timesteps"] = file.timesteps;
  meta["features"] = file.features;
  meta["buses"] = file.buses;
  meta["columns"] = file.buses.empty() ? std::vector<std::string>{} : FeatureLayout(file.buses).column_names();
  meta["location_names"] = file.location_names;
  std::vector<std::string> types;
  for (FaultType t : kAllFaultTypes) types.emplace_back(fault_type_name(t));
  meta["type_names"] = types;
  meta["seed"] = file.seed;
  meta["input_hash"] = file.input_hash;
  auto out = open_out(pmud_sidecar(path));
  out << meta.dump(2) << '\n';
}

PmudFile read_pmud(const std::filesystem::path& path) {
  PmudFile f;
  {
    auto in = open_in(path, true);
    f = read_pmud(in);
  }
  const auto side = pmud_sidecar(path);
  if (std::filesystem::exists(side)) {
    json meta;
    try {
      meta = json::parse(read_file(side));
      f.buses = meta.at("buses").get<std::vector<std::string>>();
      f.location_names = meta.at("location_names").get<std::vector<std::string>>();
      f.seed = meta.at("seed").get<std::uint64_t>();
      f.input_hash = meta.at("input_hash").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(side.string(), e.what());
    }
  }
  f.check();
  return f;
}

std::array<std::vector<std::size_t>, 3> stratified_split(std::span<const std::uint16_t> type,
                                                         std::array<double, 3> ratios, std::uint64_t seed) {
  const double total_ratio = ratios[0] + ratios[1] + ratios[2];
  for (double r : ratios)
    if (!(r >= 0.0)) throw ValidationError("split ratios must be non-negative");
  if (!(total_ratio > 0.0)) throw ValidationError("split ratios must not all be zero");
  for (double& r : ratios) r /= total_ratio;

  std::map<std::uint16_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < type.size(); ++i) members[type[i]].push_back(i);

  // Overall targets by largest remainder.
  const auto n = static_cast<double>(type.size());
  std::array<std::size_t, 3> target{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = n * ratios[static_cast<std::size_t>(s)];
    target[static_cast<std::size_t>(s)] = static_cast<std::size_t>(exact);
    frac[static_cast<std::size_t>(s)] = exact - static_cast<double>(target[static_cast<std::size_t>(s)]);
    assigned += target[static_cast<std::size_t>(s)];
  }
  for (; assigned < type.size(); ++assigned) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < 3; ++s)
      if (frac[s] > frac[best]) best = s;
    ++target[best];
    frac[best] = -1.0;
  }

  std::map<std::uint16_t, std::array<std::size_t, 3>> counts;
  std::array<long long, 3> demand{};
  for (std::size_t s = 0; s < 3; ++s) demand[s] = static_cast<long long>(target[s]);
  for (const auto& [t, idx] : members) {
    auto& c = counts[t];
    for (std::size_t s = 0; s < 3; ++s) {
      c[s] = static_cast<std::size_t>(static_cast<double>(idx.size()) * ratios[s]);
      demand[s] -= static_cast<long long>(c[s]);
    }
  }
  for (auto& [t, c] : counts) {
    std::size_t left = members[t].size() - c[0] - c[1] - c[2];
    std::array<bool, 3> used{};
    while (left > 0) {
      std::size_t best = 3;
      for (std::size_t s = 0; s < 3; ++s)
        if (!used[s] && (best == 3 || demand[s] > demand[best])) best = s;
      if (best == 3) {
        used = {};
        continue;
      }
      ++c[best];
      --demand[best];
      used[best] = true;
      --left;
    }
  }

  Rng rng(seed);
  std::array<std::vector<std::size_t>, 3> out;
  for (auto& [t, idx] : members) {
    rng.shuffle(std::span<std::size_t>(idx));
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t k = 0; k < counts[t][s]; ++k) out[s].push_back(idx[pos++]);
  }
  for (auto& part : out) rng.shuffle(std::span<std::size_t>(part));
  return out;
}

namespace {

json config_json(const PlacementConfig& c) {
  json j;
  j["budget"] = c.budget;
  j["scorer"] = std::string(scorer_name(c.scorer));
  j["target"] = std::string(score_target_name(c.target));
  j["refine"] = c.refine;
  j["radius"] = c.radius;
  j["epsilon"] = c.epsilon;
  j["seed"] = c.seed;
  j["svm"] = {{"C", c.svm.c}, {"gamma", c.svm.gamma}, {"tolerance", c.svm.tolerance},
              {"max_iterations", c.svm.max_iterations}, {"cache_entries", c.svm.cache_entries}};
  j["cv"] = {{"folds", c.cv.folds}, {"stratified", c.cv.stratified}, {"seed", c.cv.seed}};
  return j;
}

}  // namespace

std::string placement_report_json(const PlacementResult& result, const PlacementConfig& config,
                                  const std::string& dataset_fingerprint) {
  json j;
  j["selected"] = result.selected;
  j["additions"] = result.additions;
  j["trajectory"] = result.trajectory;
  j["step_scores"] = result.step_scores;
  json refs = json::array();
  for (const auto& r : result.refinements)
    refs.push_back({{"step", r.step},
                    {"replaced", r.replaced},
                    {"replacement", r.replacement},
                    {"score_before", r.score_before},
                    {"score_after", r.score_after}});
  j["refinements"] = refs;
  j["recommended_count"] = result.recommended_count;
  j["budget_truncated"] = result.budget_truncated;
  j["scorer"] = std::string(scorer_name(config.scorer));
  j["config"] = config_json(config);
  j["seed"] = config.seed;
  j["dataset_fingerprint"] = dataset_fingerprint;
  return j.dump(2) + "\n";
}

void write_placement_report(const std::filesystem::path& path, const PlacementResult& result,
                            const PlacementConfig& config, const std::string& dataset_fingerprint) {
  auto out = open_out(path);
  out << placement_report_json(result, config, dataset_fingerprint);
}

PlacementReport read_placement_report(const std::filesystem::path& path) {
  PlacementReport r;
  try {
    const json j = json::parse(read_file(path));
    r.selected = j.at("selected").get<std::vector<std::string>>();
    r.trajectory = j.at("trajectory").get<std::vector<double>>();
    if (j.contains("step_scores")) r.step_scores = j.at("step_scores").get<std::vector<double>>();
    for (const auto& e : j.at("refinements"))
      r.refinements.push_back({e.at("step").get<std::size_t>(), e.at("replaced").get<std::string>(),
                               e.at("replacement").get<std::string>(), e.at("score_before").get<double>(),
                               e.at("score_after").get<double>()});
    r.recommended_count = j.at("recommended_count").get<std::size_t>();
    r.scorer = j.at("scorer").get<std::string>();
    r.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("budget_truncated")) r.budget_truncated = j.at("budget_truncated").get<bool>();
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ":" + std::to_string(e.byte), e.what());
  } catch (const json::exception& e) {
    throw ParseError(path.string(), e.what());
  }
  if (r.selected.empty()) throw ValidationError("placement report selects no buses");
  return r;
}

void write_curve_csv(std::ostream& out, const PlacementResult& result, const std::string& dataset_fingerprint,
                     std::uint64_t seed) {
  out << "# pmuopt curve seed=" << seed << " input_hash=" << dataset_fingerprint << "\n";
  out << "pmu_count,best_score,step_score,recommended\n";
  for (std::size_t k = 0; k < result.trajectory.size(); ++k)
    out << k + 1 << ',' << format_double(result.trajectory[k]) << ',' << format_double(result.step_scores[k]) << ','
        << (k + 1 == result.recommended_count ? 1 : 0) << '\n';
}

}  // namespace pmuopt
