#pragma once

// Fusion rules F: {0,1}^L -> {0,1} over packed sensor votes.
//
// Bit j of a vote is sensor j's decision (sensor 0 is the least significant
// bit of word 0). Truth tables are indexed by the vote read as an integer.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ddf {

class FusionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::size_t words_for(std::size_t bits) { return (bits + 63) / 64; }

/// Read-only view of L packed bits.
class VoteView {
 public:
  VoteView(std::span<const std::uint64_t> words, std::size_t size) : words_(words), size_(size) {}

  std::size_t size() const { return size_; }
  std::span<const std::uint64_t> words() const { return words_; }
  bool operator[](std::size_t j) const { return (words_[j >> 6] >> (j & 63)) & 1u; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

 private:
  std::span<const std::uint64_t> words_;
  std::size_t size_;
};

/// Owning vote u = (u_0, ..., u_{L-1}).
class Vote {
 public:
  explicit Vote(std::size_t size = 0) : words_(words_for(size), 0), size_(size) {}
  Vote(std::initializer_list<int> bits) : Vote(bits.size()) {
    std::size_t j = 0;
    for (int b : bits) set(j++, b != 0);
  }
  static Vote from_integer(std::size_t size, std::uint64_t value) {
    Vote v(size);
    if (size > 0) v.words_[0] = size >= 64 ? value : value & ((std::uint64_t{1} << size) - 1);
    return v;
  }

  std::size_t size() const { return size_; }
  bool operator[](std::size_t j) const { return view()[j]; }
  void set(std::size_t j, bool bit) {
    const std::uint64_t mask = std::uint64_t{1} << (j & 63);
    if (bit) {
      words_[j >> 6] |= mask;
    } else {
      words_[j >> 6] &= ~mask;
    }
  }
  void flip(std::size_t j) { words_[j >> 6] ^= std::uint64_t{1} << (j & 63); }

  VoteView view() const { return {words_, size_}; }
  operator VoteView() const { return view(); }  // NOLINT
  std::span<std::uint64_t> words() { return words_; }
  std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const Vote&, const Vote&) = default;

 private:
  std::vector<std::uint64_t> words_;
  std::size_t size_;
};

/// Counts fusion evaluations when attached to a rule.
using EvalCounter = std::atomic<std::uint64_t>;

class FusionRule {
 public:
  enum class Kind { And, Or, KOfL, TruthTable, Paths, Constant, Predicate };
  using PredicateFn = std::function<bool(VoteView)>;

  static FusionRule all(std::size_t sensors) { return FusionRule(Kind::And, sensors, sensors); }
  static FusionRule any(std::size_t sensors) { return FusionRule(Kind::Or, sensors, 1); }

  static FusionRule k_of_l(std::size_t sensors, std::size_t k) {
    if (k < 1 || k > sensors) {
      throw FusionError("k-of-l rule requires 1 <= k <= L (k=" + std::to_string(k) +
                        ", L=" + std::to_string(sensors) + ")");
    }
    return FusionRule(Kind::KOfL, sensors, k);
  }

  /// `table[k]` is F(s_k), where bit j of k is sensor j's vote.
  static FusionRule truth_table(std::size_t sensors, std::vector<bool> table) {
    if (sensors < 1 || sensors > 20) throw FusionError("truth-table rules support 1 <= L <= 20");
    if (table.size() != (std::size_t{1} << sensors)) {
      throw FusionError("truth table needs exactly 2^L = " +
                        std::to_string(std::size_t{1} << sensors) + " entries, got " +
                        std::to_string(table.size()));
    }
    FusionRule r(Kind::TruthTable, sensors, 0);
    r.table_ = std::make_shared<const std::vector<bool>>(std::move(table));
    return r;
  }

  /// Sensors (2p, 2p+1) watch path p. Decides 1 iff exactly one path has both
  /// of its sensors voting 1.
  static FusionRule paths(std::size_t pair_count) {
    if (pair_count < 1) throw FusionError("paths rule needs at least one path");
    return FusionRule(Kind::Paths, 2 * pair_count, pair_count);
  }

  static FusionRule constant(std::size_t sensors, bool value) {
    return FusionRule(Kind::Constant, sensors, value ? 1 : 0);
  }

  static FusionRule predicate(std::string name, std::size_t sensors, PredicateFn fn) {
    FusionRule r(Kind::Predicate, sensors, 0);
    r.name_ = std::move(name);
    r.fn_ = std::make_shared<const PredicateFn>(std::move(fn));
    return r;
  }

  /// "and", "or", "k-of-l:K", "truth-table:<hex>", "paths:P".
  static FusionRule parse(std::string_view text, std::size_t sensors);

  Kind kind() const { return kind_; }
  std::size_t sensors() const { return sensors_; }
  std::size_t k() const { return param_; }

  /// Canonical text form; parse(id(), L) reproduces the rule (predicates excepted).
  std::string id() const;

  /// File-name friendly id.
  std::string slug() const {
    std::string s = id();
    if (kind_ == Kind::TruthTable) s = "truth-table";
    std::replace(s.begin(), s.end(), ':', '-');
    return s;
  }

  /// Copy of this rule that increments `counter` on every evaluation.
  FusionRule counted(EvalCounter& counter) const {
    FusionRule r = *this;
    r.counter_ = &counter;
    return r;
  }

  bool evaluate(VoteView u) const {
    if (u.size() != sensors_) {
      throw FusionError("vote has " + std::to_string(u.size()) + " bits, rule expects " +
                        std::to_string(sensors_));
    }
    return evaluate_unchecked(u);
  }

  bool evaluate_unchecked(VoteView u) const {
    if (counter_ != nullptr) counter_->fetch_add(1, std::memory_order_relaxed);
    switch (kind_) {
      case Kind::And: return u.count() == sensors_;
      case Kind::Or: return u.count() >= 1;
      case Kind::KOfL: return u.count() >= param_;
      case Kind::TruthTable: return (*table_)[static_cast<std::size_t>(u.words()[0])];
      case Kind::Paths: {
        std::size_t both = 0;
        for (auto w : u.words()) {
          both += static_cast<std::size_t>(std::popcount(w & (w >> 1) & 0x5555555555555555ULL));
          if (both > 1) return false;
        }
        return both == 1;
      }
      case Kind::Constant: return param_ != 0;
      case Kind::Predicate: return (*fn_)(u);
    }
    return false;
  }

  /// F(u | u_j = 1) - F(u | u_j = 0) with exactly two evaluations. `words`
  /// is modified during the call and restored before returning.
  int pj1_inplace(std::span<std::uint64_t> words, std::size_t j) const {
    std::uint64_t& w = words[j >> 6];
    const std::uint64_t mask = std::uint64_t{1} << (j & 63);
    const std::uint64_t saved = w;
    w |= mask;
    const int hi = evaluate_unchecked(VoteView(words, sensors_)) ? 1 : 0;
    w &= ~mask;
    const int lo = evaluate_unchecked(VoteView(words, sensors_)) ? 1 : 0;
    w = saved;
    return hi - lo;
  }

 private:
  FusionRule(Kind kind, std::size_t sensors, std::size_t param)
      : kind_(kind), sensors_(sensors), param_(param) {
    if (sensors_ < 1) throw FusionError("fusion rule needs at least one sensor");
  }

  Kind kind_;
  std::size_t sensors_;
  std::size_t param_;
  std::shared_ptr<const std::vector<bool>> table_;
  std::shared_ptr<const PredicateFn> fn_;
  std::string name_;
  EvalCounter* counter_ = nullptr;
};

inline bool evaluate(const FusionRule& f, VoteView u) { return f.evaluate(u); }

/// P_{j1} at the other sensors' bits; independent of u_j.
inline int pj1(const FusionRule& f, VoteView u, std::size_t j) {
  if (u.size() != f.sensors()) throw FusionError("pj1: vote length does not match the rule");
  if (j >= u.size()) throw FusionError("pj1: sensor index out of range");
  std::vector<std::uint64_t> words(u.words().begin(), u.words().end());
  return f.pj1_inplace(words, j);
}

/// I_{Omega0}(u) = 1 - F(u).
inline bool indicator_omega0(const FusionRule& f, VoteView u) { return !f.evaluate(u); }

namespace detail {

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

inline std::size_t parse_count(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty()) {
    throw FusionError("invalid " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

inline FusionRule FusionRule::parse(std::string_view text, std::size_t sensors) {
  auto arg_of = [&](std::string_view prefix) { return text.substr(prefix.size()); };
  if (text == "and") return all(sensors);
  if (text == "or") return any(sensors);
  if (text.starts_with("k-of-l:")) {
    return k_of_l(sensors, detail::parse_count(arg_of("k-of-l:"), "k"));
  }
  if (text.starts_with("paths:")) {
    const auto pairs = detail::parse_count(arg_of("paths:"), "path count");
    if (2 * pairs != sensors) {
      throw FusionError("paths:" + std::to_string(pairs) + " needs " + std::to_string(2 * pairs) +
                        " sensors, scenario has " + std::to_string(sensors));
    }
    return paths(pairs);
  }
  if (text.starts_with("truth-table:")) {
    std::string_view hex = arg_of("truth-table:");
    if (hex.starts_with("0x")) hex.remove_prefix(2);
    if (sensors < 1 || sensors > 20) throw FusionError("truth-table rules support 1 <= L <= 20");
    const std::size_t entries = std::size_t{1} << sensors;
    const std::size_t digits = (entries + 3) / 4;
    if (hex.size() != digits) {
      throw FusionError("truth table for L=" + std::to_string(sensors) + " needs " +
                        std::to_string(digits) + " hex digits, got " + std::to_string(hex.size()));
    }
    std::vector<bool> table(entries, false);
    // Least significant hex digit holds entries 0..3.
    for (std::size_t d = 0; d < digits; ++d) {
      const int v = detail::hex_value(hex[hex.size() - 1 - d]);
      if (v < 0) throw FusionError("invalid hex digit in truth table");
      for (int b = 0; b < 4; ++b) {
        const std::size_t k = 4 * d + static_cast<std::size_t>(b);
        const bool bit = (v >> b) & 1;
        if (k >= entries) {
          if (bit) throw FusionError("truth table has bits beyond 2^L entries");
          continue;
        }
        table[k] = bit;
      }
    }
    return truth_table(sensors, std::move(table));
  }
  throw FusionError("unknown fusion rule '" + std::string(text) +
                    "' (expected and, or, k-of-l:K, truth-table:HEX, paths:P)");
}

inline std::string FusionRule::id() const {
  switch (kind_) {
    case Kind::And: return "and";
    case Kind::Or: return "or";
    case Kind::KOfL: return "k-of-l:" + std::to_string(param_);
    case Kind::Paths: return "paths:" + std::to_string(param_);
    case Kind::Constant: return param_ ? "const:1" : "const:0";
    case Kind::Predicate: return name_;
    case Kind::TruthTable: {
      static constexpr char kHex[] = "0123456789abcdef";
      const std::size_t entries = table_->size();
      const std::size_t digits = (entries + 3) / 4;
      std::string hex(digits, '0');
      for (std::size_t d = 0; d < digits; ++d) {
        int v = 0;
        for (int b = 0; b < 4; ++b) {
          const std::size_t k = 4 * d + static_cast<std::size_t>(b);
          if (k < entries && (*table_)[k]) v |= 1 << b;
        }
        hex[digits - 1 - d] = kHex[v];
      }
      return "truth-table:" + hex;
    }
  }
  return {};
}

}  // namespace ddf
