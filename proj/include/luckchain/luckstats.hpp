#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <vector>

#include "luckchain/trace.hpp"

namespace luckchain {

// Fork race between a majority of M participants and a minority of m: per
// block, each side's luck is the maximum of its members' uniform draws, and
// the minority persists while its running total stays at least the
// majority's.
struct PersistenceQuery {
  int majority = 0;  // M
  int minority = 0;  // m
  int horizon = 1;   // blocks since the fork
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError unless M > m >= 1, horizon/trials >= 1
};

struct PersistenceResult {
  double p_hat = 0.0;          // empirical Pr(minority total >= majority total)
  double ci_halfwidth = 0.0;   // 3-sigma binomial half-width
  double chernoff_rho = 0.0;   // per-block bound factor
  double chernoff_bound = 0.0; // rho^horizon
  double s_star = 0.0;         // minimizing exponent
};

// Monte Carlo estimate plus the matching Chernoff bound. Trials use seeds
// derived from the trial index alone, so any thread count gives identical
// results.
PersistenceResult mc_persistence(const PersistenceQuery& q, int threads = 1);

// E[e^{s X}] for X the maximum of n independent uniforms on [0,1), by
// adaptive quadrature of n * integral x^{n-1} e^{s x} dx to relative error
// below 1e-10.
double mgf_max_uniform(int n, double s);

// Series form n * sum_k s^k / (k! (n+k)); the independent oracle for the
// quadrature (accurate for moderate |s|).
double mgf_max_uniform_series(int n, double s);

struct RhoResult {
  double rho = 0.0;
  double s_star = 0.0;
};

// Minimizes E[e^{-s max_M}] * E[e^{s max_m}] over s > 0 by ternary search on
// the log-convex product (tolerance 1e-9 in s); rho < 1 whenever M > m.
RhoResult chernoff_rho(int majority, int minority);

struct ShareResult {
  double share = 0.0;
  double expected = 0.0;
  double z = 0.0;  // normalized binomial deviation
};

// Fraction of consensus blocks won by the given participants, against the
// uniform expectation |group| / participants.
ShareResult proportional_share(const EventTrace& trace, const std::set<int>& group,
                               int participants);

struct PersistenceRow {
  PersistenceQuery query;
  PersistenceResult result;
};

void write_persistence_csv(std::ostream& out,
                           const std::vector<PersistenceRow>& rows);

}  // namespace luckchain
