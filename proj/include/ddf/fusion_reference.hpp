#pragma once

// Direct 2^L-term evaluation of the decomposition polynomials P_{j1}, P_{j2}
// of the H0-region indicator. Exponential in L; used as a test oracle for the
// two-evaluation difference form in fusion.hpp.

#include "ddf/fusion.hpp"

#include <cstdint>

namespace ddf::reference {

namespace detail {

// sum_k w(s_k) * prod_{m != j} [s_k(m) u_m + (1 - s_k(m)) (1 - u_m)]
template <class Weight>
int decomposition_sum(const FusionRule& f, VoteView u, std::size_t j, Weight weight) {
  const std::size_t sensors = f.sensors();
  if (sensors > 20) throw FusionError("reference decomposition supports L <= 20");
  if (u.size() != sensors) throw FusionError("reference decomposition: vote length mismatch");
  if (j >= sensors) throw FusionError("reference decomposition: sensor index out of range");
  int total = 0;
  for (std::uint64_t k = 0; k < (std::uint64_t{1} << sensors); ++k) {
    const Vote s = Vote::from_integer(sensors, k);
    int product = 1;
    for (std::size_t m = 0; m < sensors && product != 0; ++m) {
      if (m == j) continue;
      const int sm = s[m] ? 1 : 0;
      const int um = u[m] ? 1 : 0;
      product *= sm * um + (1 - sm) * (1 - um);
    }
    if (product == 0) continue;
    total += weight(s) * product;
  }
  return total;
}

}  // namespace detail

inline int pj1_reference(const FusionRule& f, VoteView u, std::size_t j) {
  return detail::decomposition_sum(f, u, j, [&](const Vote& s) {
    return (1 - (f.evaluate(s) ? 1 : 0)) * (1 - 2 * (s[j] ? 1 : 0));
  });
}

inline int pj2_reference(const FusionRule& f, VoteView u, std::size_t j) {
  return detail::decomposition_sum(f, u, j, [&](const Vote& s) {
    return (1 - (f.evaluate(s) ? 1 : 0)) * (s[j] ? 1 : 0);
  });
}

}  // namespace ddf::reference
