#pragma once

#include <atomic>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "pmuopt/feeder.hpp"
#include "pmuopt/features.hpp"
#include "pmuopt/random.hpp"

namespace testsupport {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(PMUOPT_DATA_DIR) / name;
}

inline const pmuopt::FeederModel& feeder12() {
  static const pmuopt::FeederModel m = pmuopt::load_feeder(data_path("feeder12.json"));
  return m;
}

inline const pmuopt::FeederModel& feeder34() {
  static const pmuopt::FeederModel m = pmuopt::load_feeder(data_path("feeder34.json"));
  return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pmuopt_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Two-bus single-phase feeder: source 1 pu behind `zs`, one line `zl`,
/// optional load S at the far bus.
inline std::string two_bus_json(std::complex<double> zs, std::complex<double> zl, std::complex<double> load = {}) {
  std::ostringstream o;
  o.precision(17);
  o << R"({"name":"two","base":{"voltage_v":4160,"power_va":3000000},)"
    << R"("source":{"bus":"1","voltage_pu":1.0,"z":[)" << zs.real() << ',' << zs.imag() << "]},"
    << R"("buses":[{"id":"1","phases":"A"},{"id":"2","phases":"A"}],)"
    << R"("lines":[{"id":"L12","from":"1","to":"2","phases":"A","z":[[[)" << zl.real() << ',' << zl.imag()
    << "]]]}]";
  if (load != std::complex<double>{})
    o << R"(,"loads":[{"bus":"2","power":{"A":[)" << load.real() << ',' << load.imag() << "]}}]";
  o << "}";
  return o.str();
}

/// Random matrix with entries uniform in (-1, 1).
inline pmuopt::RowMatrix random_matrix(pmuopt::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  pmuopt::RowMatrix x(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) x(r, c) = rng.uniform(-1.0, 1.0);
  return x;
}

inline std::complex<double> random_complex(pmuopt::Rng& rng, double scale = 1.0) {
  return {rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
}

}  // namespace testsupport
