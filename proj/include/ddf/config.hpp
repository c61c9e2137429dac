#pragma once

// Scenario files: an INI-style document with sections
//   [scenario] [priors] [costs] [h0] [h1] [h1.K] [fusion] [sampling]
//   [evaluation] [sweep]
// Every key is checked against the schema; errors carry the file and line.

#include "ddf/detector.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ddf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One `key = value` entry with its source line.
struct ConfigEntry {
  std::string value;
  int line = 0;
};

/// Raw sections in file order, keys per section.
class IniDocument {
 public:
  struct Section {
    std::string name;
    int line = 0;
    std::map<std::string, ConfigEntry> entries;
  };

  static IniDocument parse(std::string_view text, std::string source = "<config>") {
    IniDocument doc;
    doc.source_ = std::move(source);
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    Section* current = nullptr;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string line = trim(strip_comment(raw));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') doc.fail(line_no, "unterminated section header");
        std::string name = trim(line.substr(1, line.size() - 2));
        if (name.empty()) doc.fail(line_no, "empty section name");
        if (doc.find(name) != nullptr) doc.fail(line_no, "duplicate section [" + name + "]");
        doc.sections_.push_back({name, line_no, {}});
        current = &doc.sections_.back();
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) doc.fail(line_no, "expected 'key = value'");
      if (current == nullptr) doc.fail(line_no, "key outside of any section");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) doc.fail(line_no, "empty key");
      if (current->entries.count(key) != 0) {
        doc.fail(line_no, "duplicate key '" + key + "' in [" + current->name + "]");
      }
      current->entries[key] = {value, line_no};
    }
    return doc;
  }

  const std::string& source() const { return source_; }
  const std::vector<Section>& sections() const { return sections_; }

  const Section* find(std::string_view name) const {
    for (const auto& s : sections_) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + msg);
  }

  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
  }

 private:
  static std::string strip_comment(const std::string& s) {
    const auto p = s.find_first_of("#;");
    // ';' separates matrix rows, so only a leading ';' starts a comment.
    if (p == std::string::npos) return s;
    if (s[p] == ';' && trim(s.substr(0, p)).size() > 0) {
      const auto h = s.find('#');
      return h == std::string::npos ? s : s.substr(0, h);
    }
    return s.substr(0, p);
  }

  std::string source_;
  std::vector<Section> sections_;
};

/// Everything a run needs besides the output location.
struct RunConfig {
  std::string name = "scenario";
  std::optional<Scenario> scenario;
  std::vector<std::string> fusion_rules;
  std::vector<TrialKind> trials{TrialKind::HypothesisMixture};
  std::size_t n = 1000;
  std::uint64_t sampling_seed = 1;
  InitSpec init;
  std::size_t max_sweeps = 100;
  std::size_t m = 10000;
  std::uint64_t eval_seed = 2;
  std::vector<double> grid = log_grid(0.01, 100.0, 21);
  bool has_sweep = false;

  const Scenario& model() const { return *scenario; }
  std::vector<FusionRule> rules() const {
    std::vector<FusionRule> out;
    for (const auto& r : fusion_rules) {
      out.push_back(FusionRule::parse(r, static_cast<std::size_t>(scenario->num_sensors())));
    }
    return out;
  }
};

namespace config_detail {

using Section = IniDocument::Section;

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(sep, start);
    out.push_back(IniDocument::trim(s.substr(start, p == std::string_view::npos ? s.npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

class Reader {
 public:
  Reader(const IniDocument& doc, const Section& sec) : doc_(doc), sec_(sec) {}

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [k, e] : sec_.entries) {
      bool ok = false;
      for (auto a : keys) ok = ok || k == a;
      if (!ok) doc_.fail(e.line, "unknown key '" + k + "' in [" + sec_.name + "]");
    }
  }

  bool has(const std::string& key) const { return sec_.entries.count(key) != 0; }

  const ConfigEntry& entry(const std::string& key) const {
    const auto it = sec_.entries.find(key);
    if (it == sec_.entries.end()) doc_.fail(sec_.line, "[" + sec_.name + "] is missing key '" + key + "'");
    return it->second;
  }

  std::string text(const std::string& key) const { return entry(key).value; }
  std::string text(const std::string& key, std::string fallback) const {
    return has(key) ? text(key) : fallback;
  }

  double number(const std::string& key) const {
    const auto& e = entry(key);
    return to_number(e.value, e.line, key);
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::uint64_t integer(const std::string& key) const {
    const auto& e = entry(key);
    return to_integer(e.value, e.line, key);
  }
  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::vector<double> numbers(const std::string& value, int line, const std::string& what) const {
    std::vector<double> out;
    for (const auto& part : split(value, ',')) out.push_back(to_number(part, line, what));
    return out;
  }

  double to_number(const std::string& s, int line, const std::string& what) const {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || p != end) {
      doc_.fail(line, "[" + sec_.name + "] " + what + ": '" + s + "' is not a number");
    }
    return v;
  }

  std::uint64_t to_integer(const std::string& s, int line, const std::string& what) const {
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || p != end) {
      doc_.fail(line, "[" + sec_.name + "] " + what + ": '" + s + "' is not a nonnegative integer");
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const int line = has(key) ? entry(key).line : sec_.line;
    doc_.fail(line, "[" + sec_.name + "] " + key + ": " + msg);
  }

  const Section& section() const { return sec_; }

 private:
  const IniDocument& doc_;
  const Section& sec_;
};

inline Vector parse_mean(const Reader& r, int d) {
  const auto& e = r.entry("mean");
  const auto v = r.numbers(e.value, e.line, "mean");
  if (v.size() == 1) return Vector::Constant(d, v[0]);
  if (static_cast<int>(v.size()) != d) {
    r.fail("mean", "has " + std::to_string(v.size()) + " entries, expected 1 or " + std::to_string(d));
  }
  return Eigen::Map<const Vector>(v.data(), d);
}

/// "diagonal: v" | "diagonal: v1, ..., vd" | "equicorrelated: var, cov" |
/// "full: r11, r12, ...; r21, ...; ..."
inline Matrix parse_covariance(const Reader& r, int d) {
  const auto& e = r.entry("cov");
  const auto colon = e.value.find(':');
  if (colon == std::string::npos) r.fail("cov", "expected 'diagonal:', 'equicorrelated:' or 'full:'");
  const std::string kind = IniDocument::trim(e.value.substr(0, colon));
  const std::string body = e.value.substr(colon + 1);
  if (kind == "diagonal") {
    const auto v = r.numbers(body, e.line, "cov");
    if (v.size() == 1) return diagonal_covariance(d, v[0]);
    if (static_cast<int>(v.size()) != d) r.fail("cov", "diagonal needs 1 or " + std::to_string(d) + " entries");
    return Eigen::Map<const Vector>(v.data(), d).asDiagonal();
  }
  if (kind == "equicorrelated") {
    const auto v = r.numbers(body, e.line, "cov");
    if (v.size() != 2) r.fail("cov", "equicorrelated needs 'variance, covariance'");
    return equicorrelated_covariance(d, v[0], v[1]);
  }
  if (kind == "full") {
    const auto rows = split(body, ';');
    if (static_cast<int>(rows.size()) != d) {
      r.fail("cov", "full matrix has " + std::to_string(rows.size()) + " rows, expected " + std::to_string(d));
    }
    Matrix m(d, d);
    for (int i = 0; i < d; ++i) {
      const auto v = r.numbers(rows[static_cast<std::size_t>(i)], e.line, "cov");
      if (static_cast<int>(v.size()) != d) {
        r.fail("cov", "row " + std::to_string(i + 1) + " has " + std::to_string(v.size()) +
                          " entries, expected " + std::to_string(d));
      }
      for (int j = 0; j < d; ++j) m(i, j) = v[static_cast<std::size_t>(j)];
    }
    return m;
  }
  r.fail("cov", "unknown covariance form '" + kind + "'");
}

inline Gaussian parse_gaussian(const Reader& r, int d) {
  Vector mean = parse_mean(r, d);
  Matrix cov = parse_covariance(r, d);
  try {
    return Gaussian(std::move(mean), std::move(cov));
  } catch (const ModelError& err) {
    r.fail("cov", err.what());
  }
}

inline Density parse_density(const IniDocument& doc, const std::string& name, int d) {
  const Section* sec = doc.find(name);
  if (sec == nullptr) throw ConfigError(doc.source() + ": missing section [" + name + "]");
  Reader r(doc, *sec);
  const std::string type = r.text("type");
  if (type == "gaussian") {
    r.allow({"type", "mean", "cov"});
    return parse_gaussian(r, d);
  }
  if (type == "mixture") {
    r.allow({"type", "weights"});
    const auto& e = r.entry("weights");
    const auto weights = r.numbers(e.value, e.line, "weights");
    std::vector<Gaussian> comps;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const std::string sub = name + "." + std::to_string(k + 1);
      const Section* cs = doc.find(sub);
      if (cs == nullptr) r.fail("weights", "missing component section [" + sub + "]");
      Reader cr(doc, *cs);
      cr.allow({"mean", "cov"});
      comps.push_back(parse_gaussian(cr, d));
    }
    try {
      return Mixture(weights, std::move(comps));
    } catch (const ModelError& err) {
      r.fail("weights", err.what());
    }
  }
  if (type == "path-signal") {
    r.allow({"type", "paths", "per_path", "signal_mean", "signal_var", "noise_var"});
    const auto paths = static_cast<int>(r.integer("paths"));
    const auto per_path = static_cast<int>(r.integer("per_path", 2));
    if (paths * per_path != d) {
      r.fail("paths", "paths x per_path = " + std::to_string(paths * per_path) +
                          " does not match the scenario dimension " + std::to_string(d));
    }
    try {
      return path_signal_mixture(paths, per_path, r.number("signal_mean"), r.number("signal_var"),
                                 r.number("noise_var"));
    } catch (const ModelError& err) {
      r.fail("type", err.what());
    }
  }
  r.fail("type", "unknown density type '" + type + "' (expected gaussian, mixture, path-signal)");
}

inline std::vector<double> parse_grid(const Reader& r) {
  const auto& e = r.entry("grid");
  const auto colon = e.value.find(':');
  if (colon == std::string::npos) r.fail("grid", "expected 'log: lo, hi, points' or 'list: r1, r2, ...'");
  const std::string kind = IniDocument::trim(e.value.substr(0, colon));
  const auto v = r.numbers(e.value.substr(colon + 1), e.line, "grid");
  std::vector<double> grid;
  if (kind == "log") {
    if (v.size() != 3 || v[2] < 1 || v[2] != static_cast<double>(static_cast<std::size_t>(v[2]))) {
      r.fail("grid", "log grid needs 'lo, hi, points'");
    }
    try {
      grid = log_grid(v[0], v[1], static_cast<std::size_t>(v[2]));
    } catch (const ModelError& err) {
      r.fail("grid", err.what());
    }
  } else if (kind == "list") {
    grid = v;
  } else {
    r.fail("grid", "unknown grid form '" + kind + "'");
  }
  for (double g : grid) {
    if (!(g > 0.0)) r.fail("grid", "entries must be positive");
  }
  return grid;
}

inline InitSpec parse_init(const Reader& r) {
  InitSpec spec;
  const std::string v = r.text("init", "lhat");
  if (v == "lhat") return spec;
  if (v.starts_with("affine:")) {
    const auto nums = r.numbers(v.substr(7), r.entry("init").line, "init");
    if (nums.size() != 2) r.fail("init", "affine needs 'slope, intercept'");
    spec.kind = InitKind::Affine;
    spec.slope = nums[0];
    spec.intercept = nums[1];
    return spec;
  }
  if (v.starts_with("random:")) {
    spec.kind = InitKind::Random;
    spec.seed = r.to_integer(IniDocument::trim(v.substr(7)), r.entry("init").line, "init");
    return spec;
  }
  r.fail("init", "expected 'lhat', 'affine: slope, intercept' or 'random: seed'");
}

}  // namespace config_detail

/// Parse and validate a scenario file. Throws ConfigError on any problem.
inline RunConfig parse_config(std::string_view text, const std::string& source = "<config>") {
  using config_detail::Reader;
  const IniDocument doc = IniDocument::parse(text, source);
  static const std::vector<std::string> known = {"scenario", "priors",   "costs",      "h0",   "h1",
                                                 "fusion",   "sampling", "evaluation", "sweep"};
  for (const auto& s : doc.sections()) {
    bool ok = false;
    for (const auto& k : known) ok = ok || s.name == k;
    for (const char* h : {"h0.", "h1."}) ok = ok || s.name.starts_with(h);
    if (!ok) doc.fail(s.line, "unknown section [" + s.name + "]");
  }
  auto need = [&](const char* name) -> const IniDocument::Section& {
    const auto* s = doc.find(name);
    if (s == nullptr) throw ConfigError(source + ": missing section [" + std::string(name) + "]");
    return *s;
  };

  RunConfig cfg;
  Reader sc(doc, need("scenario"));
  sc.allow({"name", "sensors", "dims"});
  cfg.name = sc.text("name", "scenario");
  const auto sensors = static_cast<int>(sc.integer("sensors"));
  if (sensors < 1) sc.fail("sensors", "must be positive");
  std::vector<int> dims(static_cast<std::size_t>(sensors), 1);
  if (sc.has("dims")) {
    const auto& e = sc.entry("dims");
    const auto v = sc.numbers(e.value, e.line, "dims");
    if (static_cast<int>(v.size()) != sensors) sc.fail("dims", "needs one entry per sensor");
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (!(v[j] >= 1) || v[j] != static_cast<double>(static_cast<int>(v[j]))) {
        sc.fail("dims", "entries must be positive integers");
      }
      dims[j] = static_cast<int>(v[j]);
    }
  }
  int total = 0;
  for (int d : dims) total += d;

  Reader pr(doc, need("priors"));
  pr.allow({"p0", "p1"});
  const double p0 = pr.number("p0");
  const double p1 = pr.number("p1");
  if (!(p0 >= 0.0 && p0 <= 1.0 && p1 >= 0.0 && p1 <= 1.0)) pr.fail("p0", "priors must lie in [0,1]");
  if (std::abs(p0 + p1 - 1.0) > 1e-12) pr.fail("p1", "priors must sum to 1");

  Reader cr(doc, need("costs"));
  cr.allow({"c00", "c01", "c10", "c11"});
  const Costs costs{cr.number("c00"), cr.number("c01"), cr.number("c10"), cr.number("c11")};
  if (!(costs.c01 > costs.c11)) cr.fail("c01", "costs must satisfy C01 > C11");
  if (!(costs.c10 > costs.c00)) cr.fail("c10", "costs must satisfy C10 > C00");

  Density h0 = config_detail::parse_density(doc, "h0", total);
  Density h1 = config_detail::parse_density(doc, "h1", total);
  try {
    cfg.scenario.emplace(dims, p0, p1, costs, std::move(h0), std::move(h1));
  } catch (const ModelError& err) {
    doc.fail(need("scenario").line, err.what());
  }
  for (const auto& s : doc.sections()) {
    for (const char* h : {"h0.", "h1."}) {
      if (s.name.starts_with(h) && !doc.find(std::string(h, 2))->entries.count("weights")) {
        doc.fail(s.line, "component section [" + s.name + "] without a mixture");
      }
    }
  }

  Reader fr(doc, need("fusion"));
  fr.allow({"rules"});
  for (const auto& r : config_detail::split(fr.text("rules"), ',')) {
    try {
      FusionRule::parse(r, static_cast<std::size_t>(sensors));
    } catch (const FusionError& err) {
      fr.fail("rules", err.what());
    }
    cfg.fusion_rules.push_back(r);
  }

  if (const auto* s = doc.find("sampling")) {
    Reader r(doc, *s);
    r.allow({"trial", "n", "seed", "init", "max_sweeps"});
    if (r.has("trial")) {
      cfg.trials.clear();
      for (const auto& t : config_detail::split(r.text("trial"), ',')) {
        try {
          cfg.trials.push_back(parse_trial_kind(t));
        } catch (const ModelError& err) {
          r.fail("trial", err.what());
        }
      }
    }
    cfg.n = r.integer("n", cfg.n);
    if (cfg.n < 1) r.fail("n", "must be at least 1");
    cfg.sampling_seed = r.integer("seed", cfg.sampling_seed);
    cfg.init = config_detail::parse_init(r);
    cfg.max_sweeps = r.integer("max_sweeps", cfg.max_sweeps);
    if (cfg.max_sweeps < 1) r.fail("max_sweeps", "must be at least 1");
  }
  if (const auto* s = doc.find("evaluation")) {
    Reader r(doc, *s);
    r.allow({"m", "seed"});
    cfg.m = r.integer("m", cfg.m);
    if (cfg.m < 1) r.fail("m", "must be at least 1");
    cfg.eval_seed = r.integer("seed", cfg.eval_seed);
  }
  if (const auto* s = doc.find("sweep")) {
    Reader r(doc, *s);
    r.allow({"grid"});
    cfg.grid = config_detail::parse_grid(r);
    cfg.has_sweep = true;
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str(), path);
}

}  // namespace ddf
