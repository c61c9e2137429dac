#pragma once

// On-disk run artifacts: sample banks, rule labels, cost traces, ROC tables
// and the run manifest. Numbers are written in shortest round-trip form so a
// file read back reproduces the in-memory doubles exactly.

#include "ddf/detector.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ddf {

class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kToolVersion = "1.0.0";

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int k = 15; k >= 0; --k, v >>= 4) s[static_cast<std::size_t>(k)] = digits[v & 15];
  return s;
}

inline void append_number(std::string& out, double v) {
  std::array<char, 32> buf;
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), p);
}

inline void append_number(std::string& out, std::uint64_t v) {
  std::array<char, 24> buf;
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), p);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError(path.string() + ": cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError(path.string() + ": cannot write file");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArtifactError(path.string() + ": write failed");
}

namespace csv {

inline std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto p = line.find(',', start);
    out.push_back(line.substr(start, p == std::string_view::npos ? line.npos : p - start));
    if (p == std::string_view::npos) return out;
    start = p + 1;
  }
}

inline std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto p = text.find('\n', start);
    if (p == std::string_view::npos) p = text.size();
    std::string_view l = text.substr(start, p - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (!l.empty()) out.push_back(l);
    start = p + 1;
  }
  return out;
}

template <class T>
T parse(std::string_view s, const std::string& where) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw ArtifactError(where + ": cannot parse '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace csv

// ---------------------------------------------------------------- bank

/// Header y1..yD,g,lhat; one row per sample.
inline std::string bank_csv(const SampleBank& bank) {
  std::string out;
  for (int r = 0; r < bank.dim(); ++r) {
    out += 'y';
    append_number(out, static_cast<std::uint64_t>(r + 1));
    out += ',';
  }
  out += "g,lhat\n";
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto y = bank.sample(i);
    for (int r = 0; r < bank.dim(); ++r) {
      append_number(out, y[r]);
      out += ',';
    }
    append_number(out, bank.g_values()[i]);
    out += ',';
    append_number(out, bank.lhat_values()[i]);
    out += '\n';
  }
  return out;
}

inline SampleBank parse_bank_csv(std::string_view text, std::vector<int> sensor_dims,
                                 const std::string& where = "bank") {
  const auto rows = csv::lines(text);
  if (rows.size() < 2) throw ArtifactError(where + ": no samples");
  const auto header = csv::fields(rows[0]);
  if (header.size() < 3 || header[header.size() - 2] != "g" || header.back() != "lhat") {
    throw ArtifactError(where + ": header must be y1,...,yD,g,lhat");
  }
  const auto d = static_cast<Eigen::Index>(header.size() - 2);
  const std::size_t n = rows.size() - 1;
  Matrix samples(d, static_cast<Eigen::Index>(n));
  std::vector<double> g(n), lhat(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string at = where + ":" + std::to_string(i + 2);
    const auto f = csv::fields(rows[i + 1]);
    if (f.size() != header.size()) throw ArtifactError(at + ": wrong number of fields");
    for (Eigen::Index r = 0; r < d; ++r) {
      samples(r, static_cast<Eigen::Index>(i)) = csv::parse<double>(f[static_cast<std::size_t>(r)], at);
    }
    g[i] = csv::parse<double>(f[f.size() - 2], at);
    lhat[i] = csv::parse<double>(f.back(), at);
  }
  return SampleBank::from_values(std::move(samples), std::move(sensor_dims), std::move(g),
                                 std::move(lhat));
}

// -------------------------------------------------------------- labels

/// Rule file: one row per (sensor, sample) with the sensor's reference
/// coordinates and learned bit. Header sensor,sample,bit,x1..xK where K is the
/// largest sensor dimension; shorter blocks leave trailing fields empty.
inline std::string labels_csv(const SampleBank& bank, const RuleLabels& labels) {
  int width = 0;
  for (int d : bank.sensor_dims()) width = std::max(width, d);
  std::string out = "sensor,sample,bit";
  for (int k = 0; k < width; ++k) {
    out += ",x";
    append_number(out, static_cast<std::uint64_t>(k + 1));
  }
  out += '\n';
  for (int j = 0; j < bank.num_sensors(); ++j) {
    const int d = bank.sensor_dims()[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < bank.size(); ++i) {
      append_number(out, static_cast<std::uint64_t>(j));
      out += ',';
      append_number(out, static_cast<std::uint64_t>(i));
      out += labels.get(static_cast<std::size_t>(j), i) ? ",1" : ",0";
      const auto y = bank.sensor_block(j, i);
      for (int k = 0; k < width; ++k) {
        out += ',';
        if (k < d) append_number(out, y[k]);
      }
      out += '\n';
    }
  }
  return out;
}

/// Learned rule read back from a rule file: reference points and bits.
struct LoadedRule {
  Matrix samples;            // one sample per column, sensor blocks stacked
  std::vector<int> sensor_dims;
  RuleLabels labels;

  DeployedRule deploy() const { return DeployedRule(samples, sensor_dims, labels); }
};

inline LoadedRule parse_labels_csv(std::string_view text, const std::string& where = "labels") {
  const auto rows = csv::lines(text);
  if (rows.size() < 2) throw ArtifactError(where + ": no rows");
  const auto header = csv::fields(rows[0]);
  if (header.size() < 4 || header[0] != "sensor" || header[1] != "sample" || header[2] != "bit") {
    throw ArtifactError(where + ": header must be sensor,sample,bit,x1,...");
  }
  struct Row {
    std::size_t j, i;
    bool bit;
    std::vector<double> x;
  };
  std::vector<Row> parsed;
  parsed.reserve(rows.size() - 1);
  std::size_t sensors = 0, n = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string at = where + ":" + std::to_string(r + 1);
    const auto f = csv::fields(rows[r]);
    if (f.size() != header.size()) throw ArtifactError(at + ": wrong number of fields");
    Row row{csv::parse<std::size_t>(f[0], at), csv::parse<std::size_t>(f[1], at), false, {}};
    const auto bit = csv::parse<int>(f[2], at);
    if (bit != 0 && bit != 1) throw ArtifactError(at + ": bit must be 0 or 1");
    row.bit = bit == 1;
    for (std::size_t k = 3; k < f.size() && !f[k].empty(); ++k) row.x.push_back(csv::parse<double>(f[k], at));
    if (row.x.empty()) throw ArtifactError(at + ": missing coordinates");
    sensors = std::max(sensors, row.j + 1);
    n = std::max(n, row.i + 1);
    parsed.push_back(std::move(row));
  }
  if (parsed.size() != sensors * n) throw ArtifactError(where + ": expected one row per (sensor, sample)");
  LoadedRule out;
  out.sensor_dims.assign(sensors, 0);
  for (const auto& row : parsed) {
    int& d = out.sensor_dims[row.j];
    if (d == 0) d = static_cast<int>(row.x.size());
    if (d != static_cast<int>(row.x.size())) {
      throw ArtifactError(where + ": sensor " + std::to_string(row.j) + " has inconsistent dimension");
    }
  }
  std::vector<int> offsets(sensors, 0);
  int total = 0;
  for (std::size_t j = 0; j < sensors; ++j) {
    offsets[j] = total;
    total += out.sensor_dims[j];
  }
  out.samples.setZero(total, static_cast<Eigen::Index>(n));
  out.labels = RuleLabels(sensors, n);
  std::vector<char> seen(sensors * n, 0);
  for (const auto& row : parsed) {
    char& s = seen[row.j * n + row.i];
    if (s) throw ArtifactError(where + ": duplicate row for sensor " + std::to_string(row.j) + ", sample " +
                               std::to_string(row.i));
    s = 1;
    for (std::size_t k = 0; k < row.x.size(); ++k) {
      out.samples(offsets[row.j] + static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(row.i)) = row.x[k];
    }
    out.labels.set(row.j, row.i, row.bit);
  }
  return out;
}

// --------------------------------------------------------------- trace

/// One row per sensor update: sweep (0 = initial labels), sensor, cost.
/// `r` is the sweep parameter, written when the trace belongs to a ROC point.
inline void append_trace_rows(std::string& out, const OptimizeTrace& t, std::size_t sensors,
                              const double* r = nullptr) {
  auto row = [&](std::size_t sweep, long sensor, double cost) {
    if (r != nullptr) {
      append_number(out, *r);
      out += ',';
    }
    append_number(out, static_cast<std::uint64_t>(sweep));
    out += ',';
    if (sensor >= 0) append_number(out, static_cast<std::uint64_t>(sensor));
    out += ',';
    append_number(out, cost);
    out += '\n';
  };
  row(0, -1, t.initial_cost);
  for (std::size_t k = 0; k < t.block_costs.size(); ++k) {
    row(k / sensors + 1, static_cast<long>(k % sensors), t.block_costs[k]);
  }
}

inline std::string trace_csv(const OptimizeTrace& t, std::size_t sensors) {
  std::string out = "sweep,sensor,cost\n";
  append_trace_rows(out, t, sensors);
  return out;
}

// ----------------------------------------------------------------- ROC

inline constexpr std::string_view kRocHeader =
    "sweep_parameter,pf,pd,bayes_cost,stderr_pf,stderr_pd,curve_id\n";

inline void append_roc_rows(std::string& out, const RocCurve& c) {
  for (const auto& p : c.points) {
    for (double v : {p.sweep_parameter, p.pf, p.pd, p.bayes_cost, p.stderr_pf, p.stderr_pd}) {
      append_number(out, v);
      out += ',';
    }
    out += c.id;
    out += '\n';
  }
}

inline std::string roc_csv(const RocCurve& c) {
  std::string out(kRocHeader);
  append_roc_rows(out, c);
  return out;
}

inline std::string roc_csv(const std::vector<RocCurve>& curves) {
  std::string out(kRocHeader);
  for (const auto& c : curves) append_roc_rows(out, c);
  return out;
}

/// Curves in file order, points in row order.
inline std::vector<RocCurve> parse_roc_csv(std::string_view text, const std::string& where = "roc") {
  const auto rows = csv::lines(text);
  if (rows.empty() || std::string(rows[0]) + "\n" != kRocHeader) {
    throw ArtifactError(where + ": unexpected ROC header");
  }
  std::vector<RocCurve> curves;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string at = where + ":" + std::to_string(r + 1);
    const auto f = csv::fields(rows[r]);
    if (f.size() != 7) throw ArtifactError(at + ": expected 7 fields");
    OperatingPoint p;
    p.sweep_parameter = csv::parse<double>(f[0], at);
    p.pf = csv::parse<double>(f[1], at);
    p.pd = csv::parse<double>(f[2], at);
    p.bayes_cost = csv::parse<double>(f[3], at);
    p.stderr_pf = csv::parse<double>(f[4], at);
    p.stderr_pd = csv::parse<double>(f[5], at);
    const std::string id(f[6]);
    if (curves.empty() || curves.back().id != id) curves.push_back({id, {}, {}});
    curves.back().points.push_back(p);
  }
  return curves;
}

// ------------------------------------------------------------ manifest

/// Collects written files and their hashes; the manifest lists them in
/// write order.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) {
      throw ArtifactError(dir_.string() + ": cannot create output directory");
    }
  }

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path write(const std::string& name, std::string_view bytes) {
    const auto path = dir_ / name;
    write_file(path, bytes);
    files_.push_back({name, {{"fnv1a64", hex64(fnv1a(bytes))}, {"bytes", bytes.size()}}});
    return path;
  }

  /// Writes manifest.json last; its own hash is not recorded.
  void finish(nlohmann::ordered_json manifest) {
    nlohmann::ordered_json files = nlohmann::ordered_json::object();
    for (const auto& [name, info] : files_) files[name] = info;
    manifest["files"] = std::move(files);
    write_file(dir_ / "manifest.json", manifest.dump(2) + "\n");
  }

  const std::vector<std::pair<std::string, nlohmann::ordered_json>>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, nlohmann::ordered_json>> files_;
};

}  // namespace ddf
