#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmuopt/faultsim.hpp"
#include "pmuopt/features.hpp"
#include "pmuopt/placement.hpp"

namespace pmuopt {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);
std::string read_file(const std::filesystem::path& path);
/// Hex FNV-1a of a file's bytes.
std::string file_fingerprint(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double value);

/// Feature rows plus the scenario behind each row.
struct PlacementDataset {
  FeatureMatrix features;
  std::vector<FaultSpec> specs;
  std::uint64_t seed = 0;
  std::string input_hash;
};

PlacementDataset make_placement_dataset(std::span<const PhasorRecord> records, const FeatureLayout& layout);

/// CSV with a leading "# seed=... input_hash=..." line, then a header of
/// scenario,line,type,t,rf,rg,hour and the feature columns.
void write_placement_csv(std::ostream& out, const PlacementDataset& data);
void write_placement_csv(const std::filesystem::path& path, const PlacementDataset& data);
PlacementDataset read_placement_csv(std::istream& in);
PlacementDataset read_placement_csv(const std::filesystem::path& path);

inline constexpr std::array<char, 4> kPmudMagic{'P', 'M', 'U', 'D'};
inline constexpr std::uint32_t kPmudVersion = 1;

/// In-memory PMUD tensor plus the sidecar metadata kept next to it.
struct PmudFile {
  std::uint32_t samples = 0;
  std::uint32_t timesteps = 0;
  std::uint32_t features = 0;
  std::uint32_t locations = 0;
  std::vector<float> data;  // (samples, timesteps, features), row-major
  std::vector<std::uint16_t> location;
  std::vector<std::uint16_t> type;

  std::vector<std::string> buses;           // feature layout, substation first
  std::vector<std::string> location_names;  // index -> line id
  std::uint64_t seed = 0;
  std::string input_hash;

  void check() const;
  /// Keeps the feature columns of `selection` in its order; the substation must come first.
  PmudFile select_buses(std::span<const std::string> selection) const;
  PmudFile subset(std::span<const std::size_t> rows) const;
};

PmudFile to_pmud(const CnnDataset& dataset, std::uint64_t seed, std::string input_hash);

void write_pmud(std::ostream& out, const PmudFile& file);
PmudFile read_pmud(std::istream& in);
/// `path` gets the tensor; `path` + ".json" gets layout, location names, seed and input hash.
void write_pmud(const std::filesystem::path& path, const PmudFile& file);
PmudFile read_pmud(const std::filesystem::path& path);
std::filesystem::path pmud_sidecar(const std::filesystem::path& path);

/// Splits rows by fault type into parts of the given ratios. Each type is
/// shuffled with the seed and cut by floors; the leftover rows go to the
/// parts still furthest below their overall target.
std::array<std::vector<std::size_t>, 3> stratified_split(std::span<const std::uint16_t> type,
                                                         std::array<double, 3> ratios, std::uint64_t seed);

struct PlacementReport {
  std::vector<std::string> selected;
  std::vector<double> trajectory;
  std::vector<double> step_scores;
  std::vector<Refinement> refinements;
  std::size_t recommended_count = 0;
  std::string scorer;
  std::string dataset_fingerprint;
  std::uint64_t seed = 0;
  bool budget_truncated = false;
};

std::string placement_report_json(const PlacementResult& result, const PlacementConfig& config,
                                  const std::string& dataset_fingerprint);
void write_placement_report(const std::filesystem::path& path, const PlacementResult& result,
                            const PlacementConfig& config, const std::string& dataset_fingerprint);
PlacementReport read_placement_report(const std::filesystem::path& path);

/// "pmu_count,best_score,step_score,recommended" rows of a trajectory.
void write_curve_csv(std::ostream& out, const PlacementResult& result, const std::string& dataset_fingerprint,
                     std::uint64_t seed);

}  // namespace pmuopt
