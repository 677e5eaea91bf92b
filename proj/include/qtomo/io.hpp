#pragma once

// Reproducible-experiment plumbing: the JSON experiment config and its
// lossless round trip, the histogram/diagnostic CSV schemas, result
// serialization, SHA-256 for output manifests, and atomic file writes.

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qtomo/fock.hpp"
#include "qtomo/maxlik.hpp"
#include "qtomo/measurement.hpp"
#include "qtomo/subspace.hpp"

namespace qtomo {

using nlohmann::json;

// Invalid configuration or usage; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent data files; the CLI maps this to exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Experiment configuration

enum class StateKind { Squeezed, Coherent, Fock };
enum class RunMode { Tomography, RandomPhase };

struct StateSpec {
  StateKind kind = StateKind::Squeezed;
  double r = 1.0;            // squeezed
  double phi = kPi / 2.0;    // squeezed
  Complex alpha{0.0, 0.0};   // coherent
  int fock_n = 0;            // fock

  friend bool operator==(const StateSpec&, const StateSpec&) = default;
};

struct GridSpec {
  std::optional<std::vector<double>> explicit_phases;  // overrides num_phases/span
  int num_phases = 12;
  PhaseSpan span = PhaseSpan::Half;
  double x_min = -7.0;
  double x_max = 7.0;
  int n_bins = 100;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct ExperimentConfig {
  StateSpec state;
  GridSpec grid;
  std::int64_t records_per_phase = 600;
  std::uint64_t seed = 1;
  int dim = 25;
  RunMode mode = RunMode::Tomography;
  SolverConfig solver;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  // The defaults reproduce the reference experiment: squeezed vacuum r = 1,
  // phi = pi/2, 12 phase cuts, 600 records per cut, 100 bins on (-7, 7),
  // reconstruction dim 25, ideal detection.
  static ExperimentConfig defaults() { return ExperimentConfig{}; }
};

inline BinGrid make_bin_grid(const GridSpec& g) {
  std::vector<double> phases =
      g.explicit_phases ? *g.explicit_phases : uniform_phases(g.num_phases, g.span);
  return make_bin_grid(std::move(phases), g.x_min, g.x_max, g.n_bins);
}

inline StateVector make_state(const StateSpec& s, FockDim d) {
  switch (s.kind) {
    case StateKind::Squeezed:
      return squeezed_vacuum(SqueezeParams(s.r, s.phi), d);
    case StateKind::Coherent:
      return coherent_state(s.alpha, d);
    case StateKind::Fock:
      return fock_state(s.fock_n, d);
  }
  throw ConfigError("unknown state kind");
}

// In random-phase mode the record budget equals the tomographic one:
// records_per_phase times the number of cuts, each with its own random
// local-oscillator phase.
inline std::int64_t total_records(const ExperimentConfig& c) {
  const int phases = c.grid.explicit_phases
                         ? static_cast<int>(c.grid.explicit_phases->size())
                         : c.grid.num_phases;
  return c.records_per_phase * phases;
}

// ---------------------------------------------------------------------------
// Strict JSON parsing helpers: unknown or missing keys name themselves.

namespace detail {

inline void expect_keys(const json& j, const std::set<std::string>& allowed,
                        const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

inline const json& require(const json& j, const std::string& key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing key '" + key + "' in " + where);
  return *it;
}

template <typename T>
T get_as(const json& j, const std::string& key, const std::string& where) {
  try {
    return require(j, key, where).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for key '" + key + "' in " + where);
  }
}

}  // namespace detail

inline json to_json(const StateSpec& s) {
  switch (s.kind) {
    case StateKind::Squeezed:
      return json{{"kind", "squeezed"}, {"r", s.r}, {"phi", s.phi}};
    case StateKind::Coherent:
      return json{{"kind", "coherent"}, {"alpha_re", s.alpha.real()}, {"alpha_im", s.alpha.imag()}};
    case StateKind::Fock:
      return json{{"kind", "fock"}, {"n", s.fock_n}};
  }
  throw ConfigError("unknown state kind");
}

inline StateSpec state_from_json(const json& j) {
  const std::string where = "config.state";
  const auto kind = detail::get_as<std::string>(j, "kind", where);
  StateSpec s;
  if (kind == "squeezed") {
    detail::expect_keys(j, {"kind", "r", "phi"}, where);
    s.kind = StateKind::Squeezed;
    s.r = detail::get_as<double>(j, "r", where);
    s.phi = detail::get_as<double>(j, "phi", where);
    if (!(s.r >= 0.0)) throw ConfigError("bad value for key 'r' in " + where + ": must be >= 0");
  } else if (kind == "coherent") {
    detail::expect_keys(j, {"kind", "alpha_re", "alpha_im"}, where);
    s.kind = StateKind::Coherent;
    s.alpha = Complex(detail::get_as<double>(j, "alpha_re", where),
                      detail::get_as<double>(j, "alpha_im", where));
  } else if (kind == "fock") {
    detail::expect_keys(j, {"kind", "n"}, where);
    s.kind = StateKind::Fock;
    s.fock_n = detail::get_as<int>(j, "n", where);
    if (s.fock_n < 0) throw ConfigError("bad value for key 'n' in " + where + ": must be >= 0");
  } else {
    throw ConfigError("bad value for key 'kind' in " + where + ": '" + kind + "'");
  }
  return s;
}

inline json to_json(const GridSpec& g) {
  json j{{"x_min", g.x_min}, {"x_max", g.x_max}, {"n_bins", g.n_bins}};
  if (g.explicit_phases)
    j["phases"] = *g.explicit_phases;
  else {
    j["num_phases"] = g.num_phases;
    j["phase_span"] = g.span == PhaseSpan::Half ? "half" : "full";
  }
  return j;
}

inline GridSpec grid_from_json(const json& j) {
  const std::string where = "config.grid";
  GridSpec g;
  if (j.contains("phases")) {
    detail::expect_keys(j, {"phases", "x_min", "x_max", "n_bins"}, where);
    g.explicit_phases = detail::get_as<std::vector<double>>(j, "phases", where);
  } else {
    detail::expect_keys(j, {"num_phases", "phase_span", "x_min", "x_max", "n_bins"}, where);
    g.num_phases = detail::get_as<int>(j, "num_phases", where);
    const auto span = detail::get_as<std::string>(j, "phase_span", where);
    if (span == "half")
      g.span = PhaseSpan::Half;
    else if (span == "full")
      g.span = PhaseSpan::Full;
    else
      throw ConfigError("bad value for key 'phase_span' in " + where + ": '" + span + "'");
  }
  g.x_min = detail::get_as<double>(j, "x_min", where);
  g.x_max = detail::get_as<double>(j, "x_max", where);
  g.n_bins = detail::get_as<int>(j, "n_bins", where);
  return g;
}

inline json to_json(const SolverConfig& s) {
  return json{{"max_iters", s.max_iters}, {"tol", s.tol},       {"dilution", s.dilution},
              {"restarts", s.restarts},   {"seed", s.seed}};
}

inline SolverConfig solver_from_json(const json& j) {
  const std::string where = "config.solver";
  detail::expect_keys(j, {"max_iters", "tol", "dilution", "restarts", "seed"}, where);
  SolverConfig s;
  if (j.contains("max_iters")) s.max_iters = detail::get_as<int>(j, "max_iters", where);
  if (j.contains("tol")) s.tol = detail::get_as<double>(j, "tol", where);
  if (j.contains("dilution")) s.dilution = detail::get_as<double>(j, "dilution", where);
  if (j.contains("restarts")) s.restarts = detail::get_as<int>(j, "restarts", where);
  if (j.contains("seed")) s.seed = detail::get_as<std::uint64_t>(j, "seed", where);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bad value in config.solver: ") + e.what());
  }
  return s;
}

inline json to_json(const ExperimentConfig& c) {
  return json{{"state", to_json(c.state)},
              {"grid", to_json(c.grid)},
              {"records_per_phase", c.records_per_phase},
              {"seed", c.seed},
              {"dim", c.dim},
              {"mode", c.mode == RunMode::Tomography ? "tomography" : "random-phase"},
              {"solver", to_json(c.solver)}};
}

inline ExperimentConfig config_from_json(const json& j) {
  const std::string where = "config";
  detail::expect_keys(
      j, {"state", "grid", "records_per_phase", "seed", "dim", "mode", "solver"}, where);
  ExperimentConfig c;
  if (j.contains("state")) c.state = state_from_json(j.at("state"));
  if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
  if (j.contains("records_per_phase"))
    c.records_per_phase = detail::get_as<std::int64_t>(j, "records_per_phase", where);
  if (j.contains("seed")) c.seed = detail::get_as<std::uint64_t>(j, "seed", where);
  if (j.contains("dim")) c.dim = detail::get_as<int>(j, "dim", where);
  if (j.contains("mode")) {
    const auto m = detail::get_as<std::string>(j, "mode", where);
    if (m == "tomography")
      c.mode = RunMode::Tomography;
    else if (m == "random-phase")
      c.mode = RunMode::RandomPhase;
    else
      throw ConfigError("bad value for key 'mode' in config: '" + m + "'");
  }
  if (j.contains("solver")) c.solver = solver_from_json(j.at("solver"));
  if (c.records_per_phase < 1) throw ConfigError("bad value for key 'records_per_phase' in config");
  if (c.dim < 2) throw ConfigError("bad value for key 'dim' in config: must be >= 2");
  try {
    (void)make_bin_grid(c.grid);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bad value in config.grid: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// SHA-256 (FIPS 180-4), for output manifests.

class Sha256 {
 public:
  Sha256() { reset(); }

  void reset() {
    h_ = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
          0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
    buf_len_ = 0;
    total_ = 0;
  }

  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    total_ += len;
    while (len > 0) {
      const std::size_t take = std::min(len, std::size_t(64) - buf_len_);
      std::copy(p, p + take, buf_.begin() + static_cast<std::ptrdiff_t>(buf_len_));
      buf_len_ += take;
      p += take;
      len -= take;
      if (buf_len_ == 64) {
        compress(buf_.data());
        buf_len_ = 0;
      }
    }
  }

  std::string hex_digest() {
    const std::uint64_t bits = total_ * 8;
    unsigned char pad[72] = {0x80};
    const std::size_t pad_len = (buf_len_ < 56) ? (56 - buf_len_) : (120 - buf_len_);
    update(pad, pad_len);
    unsigned char len_be[8];
    for (int i = 0; i < 8; ++i) len_be[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
    update(len_be, 8);
    std::string out;
    out.reserve(64);
    static const char* hexd = "0123456789abcdef";
    for (std::uint32_t w : h_)
      for (int i = 28; i >= 0; i -= 4) out.push_back(hexd[(w >> i) & 0xF]);
    reset();
    return out;
  }

 private:
  static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void compress(const unsigned char* p) {
    static const std::uint32_t k[64] = {
        0x428a2f98u, 0x71374491u, 0xb5c0fbcfu, 0xe9b5dba5u, 0x3956c25bu, 0x59f111f1u,
        0x923f82a4u, 0xab1c5ed5u, 0xd807aa98u, 0x12835b01u, 0x243185beu, 0x550c7dc3u,
        0x72be5d74u, 0x80deb1feu, 0x9bdc06a7u, 0xc19bf174u, 0xe49b69c1u, 0xefbe4786u,
        0x0fc19dc6u, 0x240ca1ccu, 0x2de92c6fu, 0x4a7484aau, 0x5cb0a9dcu, 0x76f988dau,
        0x983e5152u, 0xa831c66du, 0xb00327c8u, 0xbf597fc7u, 0xc6e00bf3u, 0xd5a79147u,
        0x06ca6351u, 0x14292967u, 0x27b70a85u, 0x2e1b2138u, 0x4d2c6dfcu, 0x53380d13u,
        0x650a7354u, 0x766a0abbu, 0x81c2c92eu, 0x92722c85u, 0xa2bfe8a1u, 0xa81a664bu,
        0xc24b8b70u, 0xc76c51a3u, 0xd192e819u, 0xd6990624u, 0xf40e3585u, 0x106aa070u,
        0x19a4c116u, 0x1e376c08u, 0x2748774cu, 0x34b0bcb5u, 0x391c0cb3u, 0x4ed8aa4au,
        0x5b9cca4fu, 0x682e6ff3u, 0x748f82eeu, 0x78a5636fu, 0x84c87814u, 0x8cc70208u,
        0x90befffau, 0xa4506cebu, 0xbef9a3f7u, 0xc67178f2u};
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
             (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3];
    std::uint32_t e = h_[4], f = h_[5], g = h_[6], h = h_[7];
    for (int i = 0; i < 64; ++i) {
      const std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const std::uint32_t ch = (e & f) ^ (~e & g);
      const std::uint32_t t1 = h + s1 + ch + k[i] + w[i];
      const std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const std::uint32_t t2 = s0 + maj;
      h = g;
      g = f;
      f = e;
      e = d + t1;
      d = c;
      c = b;
      b = a;
      a = t1 + t2;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
    h_[5] += f;
    h_[6] += g;
    h_[7] += h;
  }

  std::array<std::uint32_t, 8> h_{};
  std::array<unsigned char, 64> buf_{};
  std::size_t buf_len_ = 0;
  std::uint64_t total_ = 0;
};

inline std::string sha256_hex(const std::string& bytes) {
  Sha256 s;
  s.update(bytes.data(), bytes.size());
  return s.hex_digest();
}

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for hashing");
  Sha256 s;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    s.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return s.hex_digest();
}

// ---------------------------------------------------------------------------
// Atomic file output: write-then-rename so readers never see partial files.

inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline void write_json_atomic(const std::filesystem::path& path, const json& j) {
  atomic_write_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// CSV schemas

// Shortest representation that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline constexpr const char* kHistogramHeader = "phase_index,bin_index,bin_center,theta,count";

// Histogram rows cover the full grid, zero-count bins included; dropping
// happens at reconstruction time. Random-phase histograms use phase_index
// -1 and theta 0 on every row.
inline std::string histogram_csv(const BinGrid& grid, const std::vector<std::int64_t>& counts,
                                 RunMode mode) {
  std::ostringstream out;
  out << kHistogramHeader << "\n";
  if (mode == RunMode::Tomography) {
    if (counts.size() != static_cast<std::size_t>(grid.num_phases()) * grid.n_bins)
      throw DataError("histogram_csv: count vector does not match grid");
    for (int j = 0; j < grid.num_phases(); ++j)
      for (int i = 0; i < grid.n_bins; ++i)
        out << j << ',' << i << ',' << format_double(grid.bin_center(i)) << ','
            << format_double(grid.phases[j]) << ','
            << counts[static_cast<std::size_t>(j) * grid.n_bins + i] << "\n";
  } else {
    if (counts.size() != static_cast<std::size_t>(grid.n_bins))
      throw DataError("histogram_csv: count vector does not match grid");
    for (int i = 0; i < grid.n_bins; ++i)
      out << -1 << ',' << i << ',' << format_double(grid.bin_center(i)) << ",0,"
          << counts[static_cast<std::size_t>(i)] << "\n";
  }
  return out.str();
}

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline long long parse_int(const std::string& s, const std::string& what, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("histogram line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
}

inline double parse_real(const std::string& s, const std::string& what, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("histogram line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
}

}  // namespace detail

// Reads a histogram back and validates it against the grid: every
// (phase, bin) cell exactly once, centers and thetas matching, counts
// nonnegative. Returns counts in (phase * n_bins + bin) order.
inline std::vector<std::int64_t> read_histogram_csv(const std::filesystem::path& path,
                                                    const BinGrid& grid, RunMode mode) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open histogram '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || detail::split_csv_row(line) != detail::split_csv_row(kHistogramHeader))
    throw DataError("histogram '" + path.string() + "': missing or wrong header");

  const int phases = (mode == RunMode::Tomography) ? grid.num_phases() : 1;
  const std::size_t expect = static_cast<std::size_t>(phases) * grid.n_bins;
  std::vector<std::int64_t> counts(expect, 0);
  std::vector<bool> seen(expect, false);
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_row(line);
    if (f.size() != 5)
      throw DataError("histogram line " + std::to_string(line_no) + ": expected 5 fields, got " +
                      std::to_string(f.size()));
    const long long pj = detail::parse_int(f[0], "phase_index", line_no);
    const long long bi = detail::parse_int(f[1], "bin_index", line_no);
    const double center = detail::parse_real(f[2], "bin_center", line_no);
    const double theta = detail::parse_real(f[3], "theta", line_no);
    const long long count = detail::parse_int(f[4], "count", line_no);

    const long long pj_norm = (mode == RunMode::Tomography) ? pj : (pj == -1 ? 0 : -2);
    if (pj_norm < 0 || pj_norm >= phases)
      throw DataError("histogram line " + std::to_string(line_no) + ": phase_index " +
                      std::to_string(pj) + " out of range for this mode");
    if (bi < 0 || bi >= grid.n_bins)
      throw DataError("histogram line " + std::to_string(line_no) + ": bin_index out of range");
    if (count < 0)
      throw DataError("histogram line " + std::to_string(line_no) + ": negative count");
    if (std::abs(center - grid.bin_center(static_cast<int>(bi))) > 1e-9)
      throw DataError("histogram line " + std::to_string(line_no) +
                      ": bin_center does not match the configured grid");
    const double want_theta =
        (mode == RunMode::Tomography) ? grid.phases[static_cast<std::size_t>(pj)] : 0.0;
    if (std::abs(theta - want_theta) > 1e-9)
      throw DataError("histogram line " + std::to_string(line_no) +
                      ": theta does not match the configured grid");

    const std::size_t idx = static_cast<std::size_t>(pj_norm) * grid.n_bins + static_cast<std::size_t>(bi);
    if (seen[idx])
      throw DataError("histogram line " + std::to_string(line_no) + ": duplicate cell");
    seen[idx] = true;
    counts[idx] = count;
    ++rows;
  }
  if (rows != expect)
    throw DataError("histogram '" + path.string() + "': expected " + std::to_string(expect) +
                    " rows, got " + std::to_string(rows));
  return counts;
}

// ---------------------------------------------------------------------------
// Result and report serialization

inline json matrix_to_json(const Eigen::MatrixXcd& m) {
  json re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json rrow = json::array(), irow = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      rrow.push_back(m(i, j).real());
      irow.push_back(m(i, j).imag());
    }
    re.push_back(std::move(rrow));
    im.push_back(std::move(irow));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"re", std::move(re)}, {"im", std::move(im)}};
}

inline Eigen::MatrixXcd matrix_from_json(const json& j) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    Eigen::MatrixXcd m(rows, cols);
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index jj = 0; jj < cols; ++jj)
        m(i, jj) = Complex(re.at(i).at(jj).get<double>(), im.at(i).at(jj).get<double>());
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed matrix JSON: ") + e.what());
  }
}

inline json reconstruction_to_json(const ReconstructionResult& r, std::size_t retained_bins,
                                   std::int64_t total_records) {
  json j{{"method", r.method},
         {"converged", r.converged},
         {"iterations", r.iterations},
         {"log_likelihood_per_event", r.log_likelihood_per_event},
         {"entropy_S", r.entropy_S},
         {"rel_entropy_K", r.rel_entropy_K},
         {"K_over_S_percent", r.k_over_s_percent()},
         {"extremal_residual", r.extremal_residual},
         {"restart_spread", r.restart_spread},
         {"restart_likelihood_spread", r.restart_likelihood_spread},
         {"floor_hits", r.floor_hits},
         {"retained_bins", retained_bins},
         {"total_records", total_records},
         {"invariants",
          json{{"max_hermiticity_violation", r.max_hermiticity_violation},
               {"max_trace_error", r.max_trace_error},
               {"min_iterate_eigenvalue", r.min_iterate_eigenvalue},
               {"em_monotonicity_violation", r.em_monotonicity_violation}}},
         {"rho", matrix_to_json(r.rho.mat)}};
  if (r.amplitudes.size() > 0) {
    json re = json::array(), im = json::array();
    for (Eigen::Index n = 0; n < r.amplitudes.size(); ++n) {
      re.push_back(r.amplitudes[n].real());
      im.push_back(r.amplitudes[n].imag());
    }
    j["amplitudes"] = json{{"re", std::move(re)}, {"im", std::move(im)}};
  }
  if (r.populations.size() > 0) {
    json pops = json::array();
    for (Eigen::Index n = 0; n < r.populations.size(); ++n) pops.push_back(r.populations[n]);
    j["populations"] = std::move(pops);
  }
  return j;
}

inline json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline json subspace_report_to_json(const SubspaceReport& rep, bool with_vectors) {
  json ev = json::array();
  for (Eigen::Index k = 0; k < rep.eigenvalues.size(); ++k) ev.push_back(rep.eigenvalues[k]);
  json j{{"eigenvalues", std::move(ev)},
         {"recoverable_dim", rep.recoverable_dim},
         {"lambda_tolerance", rep.lambda_tolerance},
         {"residual_z", rep.residual_z}};
  if (with_vectors) j["eigenvectors"] = matrix_to_json(rep.eigenvectors);
  return j;
}

inline std::string eigenvalues_csv(const SubspaceReport& resolution, const SubspaceReport& fit) {
  std::ostringstream out;
  out << "index,lambda_resolution,lambda_fit_weighted\n";
  for (Eigen::Index k = 0; k < resolution.eigenvalues.size(); ++k)
    out << k << ',' << format_double(resolution.eigenvalues[k]) << ','
        << format_double(fit.eigenvalues[k]) << "\n";
  return out.str();
}

inline std::string r_diagonal_csv(const Eigen::VectorXd& diag) {
  std::ostringstream out;
  out << "n,r_xi\n";
  for (Eigen::Index n = 0; n < diag.size(); ++n)
    out << n << ',' << format_double(diag[n]) << "\n";
  return out.str();
}

// Factor surface over the retained (registered) bins only; bins that never
// fired are absent by construction.
inline std::string renorm_factors_csv(const RenormalizedProjectorSet& rp, const BinGrid& grid) {
  std::ostringstream out;
  out << "phase_index,bin_index,bin_center,theta,factor\n";
  for (std::size_t i = 0; i < rp.factors.size(); ++i) {
    const BinLabel& lbl = rp.labels[i];
    const double theta = lbl.phase_index >= 0 ? grid.phases[static_cast<std::size_t>(lbl.phase_index)] : 0.0;
    out << lbl.phase_index << ',' << lbl.bin_index << ','
        << format_double(grid.bin_center(lbl.bin_index)) << ',' << format_double(theta) << ','
        << format_double(rp.factors[i]) << "\n";
  }
  return out.str();
}

}  // namespace qtomo
