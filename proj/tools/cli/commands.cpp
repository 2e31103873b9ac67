#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pmuopt/error.hpp"
#include "pmuopt/faultsim.hpp"
#include "pmuopt/features.hpp"
#include "pmuopt/feeder.hpp"
#include "pmuopt/io.hpp"
#include "pmuopt/parallel.hpp"
#include "pmuopt/placement.hpp"

namespace fs = std::filesystem;

namespace pmuopt::cli {

namespace {

void flatten(const nlohmann::json& j, std::map<std::string, std::string>& out) {
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      flatten(value, out);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ',';
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      out[key] = joined;
    } else if (value.is_string()) {
      out[key] = value.get<std::string>();
    } else if (!value.is_null()) {
      out[key] = value.dump();
    }
  }
}

bool mentions(const std::vector<std::string>& args, const std::string& key) {
  for (const auto& a : args) {
    if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0 || a == "--no-" + key) return true;
  }
  return false;
}

unsigned resolve_jobs(unsigned jobs) { return jobs == 0 ? default_jobs() : jobs; }

struct GenerateOptions {
  std::string feeder;
  std::string mode = "placement";
  std::vector<int> hours;
  std::vector<std::string> types;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  double noise = 0.0;
  double rf = 0.001;
  std::vector<double> rg;
  double rf_min = 0.01;
  double rf_max = 10.0;
  std::size_t timesteps_pre = 15;
  std::size_t timesteps_fault = 15;
  std::string out;
  unsigned jobs = 0;
};

struct SearchOptions {
  std::string data;
  std::string feeder;
  std::string scorer = "svm_cv";
  std::string target = "location";
  std::size_t budget = 5;
  bool refine = true;
  double gamma = 500.0;
  double c = 1500.0;
  double tolerance = 1e-3;
  std::size_t folds = 5;
  double epsilon = 0.0025;
  int radius = 2;
  std::uint64_t seed = 0;
  std::string out;
  unsigned jobs = 0;
  bool verbose = false;
};

struct ExportOptions {
  std::string data;
  std::string report;
  std::string out_dir;
  std::string prefix;
  std::uint64_t seed = 0;
};

void add_generate_options(CLI::App& cmd, GenerateOptions& o) {
  cmd.add_option("--feeder", o.feeder, "Feeder JSON file")->required()->check(CLI::ExistingFile);
  cmd.add_option("--mode", o.mode, "placement or cnn")->check(CLI::IsMember({"placement", "cnn"}));
  cmd.add_option("--hours", o.hours, "Comma-separated hours 0..23")->delimiter(',');
  cmd.add_option("--types", o.types, "Comma-separated fault types (default: all 11)")->delimiter(',');
  cmd.add_option("--samples", o.samples, "CNN sample count");
  cmd.add_option("--seed", o.seed, "Random seed");
  cmd.add_option("--noise", o.noise, "Relative measurement noise sigma (cnn mode)");
  cmd.add_option("--rf", o.rf, "Fault resistance in ohm (placement mode)");
  cmd.add_option("--rg", o.rg, "Ground resistance(s) in ohm")->delimiter(',');
  cmd.add_option("--rf-min", o.rf_min, "Lower fault resistance in ohm (cnn mode)");
  cmd.add_option("--rf-max", o.rf_max, "Upper fault resistance in ohm (cnn mode)");
  cmd.add_option("--timesteps-pre", o.timesteps_pre, "Pre-fault steps (cnn mode)");
  cmd.add_option("--timesteps-fault", o.timesteps_fault, "During-fault steps (cnn mode)");
  cmd.add_option("--out", o.out, "Output file (.csv or .pmud)")->required();
  cmd.add_option("--jobs", o.jobs, "Worker threads, 0 = all cores");
}

void add_search_options(CLI::App& cmd, SearchOptions& o) {
  cmd.add_option("--data", o.data, "Placement dataset CSV")->required()->check(CLI::ExistingFile);
  cmd.add_option("--feeder", o.feeder, "Feeder JSON (topology for refinement and the admittance scorer)")
      ->check(CLI::ExistingFile);
  cmd.add_option("--scorer", o.scorer, "svm_cv, correlation or admittance");
  cmd.add_option("--target", o.target, "SVM label: location, type or joint")
      ->check(CLI::IsMember({"location", "type", "joint"}));
  cmd.add_option("--budget", o.budget, "PMU budget including the substation");
  cmd.add_flag("--refine,!--no-refine", o.refine, "Neighborhood refinement (default on)");
  cmd.add_option("--gamma", o.gamma, "RBF width");
  cmd.add_option("--C,--c", o.c, "SVM regularization");
  cmd.add_option("--tolerance", o.tolerance, "SMO stopping tolerance");
  cmd.add_option("--folds", o.folds, "Cross-validation folds");
  cmd.add_option("--epsilon", o.epsilon, "Plateau tolerance");
  cmd.add_option("--radius", o.radius, "Refinement neighbor radius");
  cmd.add_option("--seed", o.seed, "Random seed");
  cmd.add_option("--out", o.out, "Output file")->required();
  cmd.add_option("--jobs", o.jobs, "Worker threads, 0 = all cores");
  cmd.add_flag("--verbose", o.verbose, "Report each search step on stderr");
}

void add_export_options(CLI::App& cmd, ExportOptions& o) {
  cmd.add_option("--data", o.data, "CNN dataset (.pmud)")->required()->check(CLI::ExistingFile);
  cmd.add_option("--report", o.report, "Placement report JSON")->required()->check(CLI::ExistingFile);
  cmd.add_option("--out-dir", o.out_dir, "Output directory")->required();
  cmd.add_option("--prefix", o.prefix, "File name prefix");
  cmd.add_option("--seed", o.seed, "Split seed");
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

int cmd_generate(const GenerateOptions& o, std::ostream& out) {
  const FeederModel model = load_feeder(o.feeder);
  ScenarioConfig cfg = o.mode == "cnn" ? ScenarioConfig::cnn_defaults(o.samples) : ScenarioConfig::placement_defaults();
  if (!o.hours.empty()) cfg.hours = o.hours;
  if (!o.types.empty()) {
    cfg.types.clear();
    for (const auto& t : o.types) {
      const auto kind = parse_fault_type(t);
      if (!kind) throw ValidationError("unknown fault type '" + t + "'");
      cfg.types.push_back(*kind);
    }
  }
  if (!o.rg.empty()) cfg.rg_values = o.rg;
  cfg.rf_ohm = o.rf;
  cfg.rf_min = o.rf_min;
  cfg.rf_max = o.rf_max;
  cfg.noise_sigma = o.noise;
  cfg.timesteps_pre = o.timesteps_pre;
  cfg.timesteps_fault = o.timesteps_fault;
  cfg.seed = o.seed;
  cfg.jobs = resolve_jobs(o.jobs);
  cfg.validate();

  std::ostringstream canon;
  canon << "mode=" << o.mode << ";hours=" << join_ints(cfg.hours) << ";types=";
  for (FaultType t : cfg.types) canon << fault_type_name(t) << ' ';
  canon << ";rf=" << format_double(cfg.rf_ohm) << ";rf_range=" << format_double(cfg.rf_min) << ':'
        << format_double(cfg.rf_max) << ";rg=";
  for (double rg : cfg.rg_values) canon << format_double(rg) << ' ';
  canon << ";samples=" << cfg.samples << ";steps=" << cfg.timesteps_pre << '+' << cfg.timesteps_fault
        << ";noise=" << format_double(cfg.noise_sigma) << ";seed=" << cfg.seed;
  const std::string input_hash = hex64(fnv1a64(canon.str(), fnv1a64(read_file(o.feeder))));

  std::map<std::string, std::size_t> census;
  if (cfg.mode == ScenarioMode::Placement) {
    const auto records = generate_placement_dataset(model, cfg);
    const FeatureLayout layout = full_layout(NodeIndex::build(model), model.substation());
    PlacementDataset ds = make_placement_dataset(records, layout);
    ds.seed = cfg.seed;
    ds.input_hash = input_hash;
    write_placement_csv(fs::path(o.out), ds);
    for (const auto& s : ds.specs) ++census[std::string(fault_type_name(s.kind))];
    out << "rows " << ds.specs.size() << "\n";
  } else {
    const CnnDataset cnn = generate_cnn_dataset(model, cfg);
    write_pmud(fs::path(o.out), to_pmud(cnn, cfg.seed, input_hash));
    for (auto t : cnn.type) ++census[std::string(fault_type_name(kAllFaultTypes[t]))];
    out << "samples " << cnn.samples << " timesteps " << cnn.timesteps << " features " << cnn.features << "\n";
  }
  for (FaultType t : kAllFaultTypes) {
    const auto it = census.find(std::string(fault_type_name(t)));
    out << "type " << fault_type_name(t) << ' ' << (it == census.end() ? 0 : it->second) << "\n";
  }
  out << "wrote " << o.out << "\n";
  return kOk;
}

struct SearchRun {
  PlacementConfig config;
  PlacementResult result;
  std::string fingerprint;
};

SearchRun run_search(const SearchOptions& o, std::ostream& err) {
  SearchRun run;
  PlacementConfig& cfg = run.config;
  const auto scorer = parse_scorer(o.scorer);
  if (!scorer) throw ValidationError("unknown scorer '" + o.scorer + "'");
  cfg.scorer = *scorer;
  cfg.target = *parse_score_target(o.target);
  cfg.budget = o.budget;
  cfg.refine = o.refine;
  cfg.svm.gamma = o.gamma;
  cfg.svm.c = o.c;
  cfg.svm.tolerance = o.tolerance;
  cfg.cv.folds = o.folds;
  cfg.cv.seed = o.seed;
  cfg.epsilon = o.epsilon;
  cfg.radius = o.radius;
  cfg.seed = o.seed;
  cfg.jobs = resolve_jobs(o.jobs);
  if (o.verbose)
    cfg.on_step = [&err](std::size_t count, const std::string& bus, double score) {
      err << "step " << count << " added " << bus << " score " << format_double(score) << std::endl;
    };
  cfg.validate();

  run.fingerprint = file_fingerprint(o.data);
  const PlacementDataset ds = read_placement_csv(fs::path(o.data));
  const FeatureMatrix& fm = ds.features;
  const std::vector<std::string> candidates = fm.layout.buses();
  const std::string substation = fm.layout.substation();

  std::optional<FeederModel> model;
  if (!o.feeder.empty()) model = load_feeder(o.feeder);
  if (!model && (cfg.refine || cfg.scorer == ScorerKind::AdmittanceSpectral))
    throw ValidationError("--feeder is required for refinement and the admittance scorer");

  BusGraph topology;
  std::optional<PositiveSequenceYbus> ybus;
  if (model) {
    if (model->substation() != substation)
      throw ValidationError("dataset substation " + substation + " differs from feeder source bus " +
                            model->substation());
    for (const auto& b : candidates)
      if (!model->bus_position(b)) throw ValidationError("dataset bus " + b + " is not in the feeder");
    topology = BusGraph::from_model(*model);
    ybus = positive_sequence_ybus(*model);
  }
  const auto scorer_impl = make_scorer(cfg, fm, ybus ? &*ybus : nullptr);
  run.result = fsnr(*scorer_impl, topology, substation, candidates, cfg);
  return run;
}

void print_result(const SearchRun& run, std::ostream& out) {
  out << "scorer " << scorer_name(run.config.scorer) << "\nselected";
  for (const auto& b : run.result.selected) out << ' ' << b;
  out << "\ntrajectory";
  for (double s : run.result.trajectory) out << ' ' << format_double(s);
  out << "\nrefinements " << run.result.refinements.size() << "\nrecommended_count " << run.result.recommended_count
      << "\n";
  if (run.result.budget_truncated) out << "budget exceeds candidate count; all candidates selected\n";
}

int cmd_place(const SearchOptions& o, std::ostream& out, std::ostream& err) {
  const SearchRun run = run_search(o, err);
  write_placement_report(fs::path(o.out), run.result, run.config, run.fingerprint);
  print_result(run, out);
  out << "wrote " << o.out << "\n";
  return kOk;
}

int cmd_curve(const SearchOptions& o, std::ostream& out, std::ostream& err) {
  const SearchRun run = run_search(o, err);
  {
    const fs::path p(o.out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p);
    if (!f) throw ValidationError("cannot write " + o.out);
    write_curve_csv(f, run.result, run.fingerprint, run.config.seed);
  }
  print_result(run, out);
  out << "wrote " << o.out << "\n";
  return kOk;
}

int cmd_export_cnn(const ExportOptions& o, std::ostream& out) {
  const PmudFile data = read_pmud(fs::path(o.data));
  const PlacementReport report = read_placement_report(fs::path(o.report));
  const PmudFile restricted = data.select_buses(report.selected);
  const std::string input_hash =
      hex64(fnv1a64("seed=" + std::to_string(o.seed), fnv1a64(read_file(o.report), fnv1a64(read_file(o.data)))));
  const auto parts = stratified_split(restricted.type, {0.70, 0.15, 0.15}, o.seed);
  const char* names[3] = {"train", "val", "test"};
  for (std::size_t s = 0; s < 3; ++s) {
    PmudFile part = restricted.subset(parts[s]);
    part.seed = o.seed;
    part.input_hash = input_hash;
    const fs::path p = fs::path(o.out_dir) / (o.prefix + names[s] + ".pmud");
    write_pmud(p, part);
    out << names[s] << ' ' << part.samples << " samples, " << part.timesteps << "x" << part.features << " -> "
        << p.string() << "\n";
  }
  return kOk;
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty()) return rest;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(config_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(config_path + ":" + std::to_string(e.byte), e.what());
  }
  if (!j.is_object()) throw ParseError(config_path, "config must be a JSON object");
  std::map<std::string, std::string> flat;
  flatten(j, flat);
  if (rest.empty()) throw ValidationError("a command must precede --config");
  std::vector<std::string> out{rest.front()};
  for (const auto& [key, value] : flat) {
    if (mentions(rest, key)) continue;
    if (key == "refine") {
      out.push_back(value == "false" ? "--no-refine" : "--refine");
    } else {
      out.push_back("--" + key + "=" + value);
    }
  }
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PMU placement toolkit: fault simulation, placement search and dataset export", "pmuopt"};
  app.require_subcommand(1);
  GenerateOptions gen;
  SearchOptions place, curve;
  curve.budget = 10;
  ExportOptions exp;
  auto* g = app.add_subcommand("generate", "Simulate faults and write a placement CSV or CNN tensor");
  add_generate_options(*g, gen);
  auto* p = app.add_subcommand("place", "Run the placement search and write a report");
  add_search_options(*p, place);
  auto* c = app.add_subcommand("curve", "Write the score-versus-count table of a placement search");
  add_search_options(*c, curve);
  auto* e = app.add_subcommand("export-cnn", "Restrict a CNN tensor to a placement and split it 70/15/15");
  add_export_options(*e, exp);
  for (auto* sub : {g, p, c, e}) sub->add_option("--config", "JSON config file with flag values");

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kConfigError;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return kConfigError;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, out);
    if (p->parsed()) return cmd_place(place, out, err);
    if (c->parsed()) return cmd_curve(curve, out, err);
    if (e->parsed()) return cmd_export_cnn(exp, out);
  } catch (const SimulationError& ex) {
    err << "simulation error: " << ex.what() << "\n";
    return kSimulationError;
  } catch (const ScoringError& ex) {
    err << "scoring error: " << ex.what() << "\n";
    return kScoringError;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << ex.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace pmuopt::cli
