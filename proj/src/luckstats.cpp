#include "luckchain/luckstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "luckchain/errors.hpp"
#include "luckchain/rng.hpp"

namespace luckchain {

void PersistenceQuery::validate() const {
  if (minority < 1) raise(Err::ConfigError, "minority must be at least 1");
  if (majority <= minority) {
    raise(Err::ConfigError, "majority must exceed minority");
  }
  if (horizon < 1) raise(Err::ConfigError, "horizon must be at least 1");
  if (trials < 1) raise(Err::ConfigError, "trials must be at least 1");
}

namespace {

// Inverse-CDF sample of max of n uniforms: F(x) = x^n.
double max_of_uniforms(CounterRng& rng, int n) {
  return std::pow(rng.next_unit(), 1.0 / static_cast<double>(n));
}

// One fork race; true when the minority's total luck never trails.
bool minority_persists(std::uint64_t seed, const PersistenceQuery& q) {
  CounterRng rng(seed);
  double relative = 0.0;
  for (int t = 0; t < q.horizon; ++t) {
    relative += max_of_uniforms(rng, q.majority);
    relative -= max_of_uniforms(rng, q.minority);
  }
  return relative <= 0.0;
}

double integrand(int n, double s, double x) {
  double poly = static_cast<double>(n);
  for (int i = 0; i < n - 1; ++i) poly *= x;
  return poly * std::exp(s * x);
}

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(int n, double s, double a, double b, double fa, double fm,
             double fb, double whole, double eps, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m);
  double rm = 0.5 * (m + b);
  double flm = integrand(n, s, lm);
  double frm = integrand(n, s, rm);
  double left = simpson(a, m, fa, flm, fm);
  double right = simpson(m, b, fm, frm, fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * eps) {
    return left + right + delta / 15.0;
  }
  return adapt(n, s, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
         adapt(n, s, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

}  // namespace

double mgf_max_uniform(int n, double s) {
  if (n < 1) raise(Err::ConfigError, "n must be at least 1");
  if (s == 0.0) return 1.0;
  double fa = integrand(n, s, 0.0);
  double fb = integrand(n, s, 1.0);
  double fm = integrand(n, s, 0.5);
  double whole = simpson(0.0, 1.0, fa, fm, fb);
  // The integral is bounded below by e^min(s,0) > 0, so a magnitude-scaled
  // absolute tolerance yields the relative target.
  double scale = std::max(std::abs(whole), std::exp(std::min(s, 0.0)));
  double eps = scale * 1e-11;
  return adapt(n, s, 0.0, 1.0, fa, fm, fb, whole, eps, 60);
}

double mgf_max_uniform_series(int n, double s) {
  if (n < 1) raise(Err::ConfigError, "n must be at least 1");
  double nn = static_cast<double>(n);
  double term = 1.0;  // s^k / k!
  double sum = nn * term / nn;
  for (int k = 1; k < 512; ++k) {
    term *= s / static_cast<double>(k);
    double add = nn * term / (nn + static_cast<double>(k));
    sum += add;
    if (std::abs(add) < std::abs(sum) * 1e-17 && k > std::abs(s)) break;
  }
  return sum;
}

RhoResult chernoff_rho(int majority, int minority) {
  if (minority < 1) raise(Err::ConfigError, "minority must be at least 1");
  if (majority <= minority) {
    raise(Err::ConfigError, "majority must exceed minority");
  }
  auto g = [&](double s) {
    double v = mgf_max_uniform(majority, -s) * mgf_max_uniform(minority, s);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  // g(0) = 1 with negative slope when M > m; expand until the product turns
  // back above 1 so the minimum is bracketed.
  double hi = 1.0;
  while (g(hi) < 1.0 && hi < 512.0) hi *= 2.0;
  double lo = 0.0;
  while (hi - lo > 1e-9) {
    double m1 = lo + (hi - lo) / 3.0;
    double m2 = hi - (hi - lo) / 3.0;
    if (g(m1) < g(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  RhoResult out;
  out.s_star = 0.5 * (lo + hi);
  out.rho = g(out.s_star);
  return out;
}

PersistenceResult mc_persistence(const PersistenceQuery& q, int threads) {
  q.validate();
  if (threads < 1) threads = 1;
  std::uint64_t n = q.trials;
  if (static_cast<std::uint64_t>(threads) > n) {
    threads = static_cast<int>(n);
  }

  std::vector<std::uint64_t> hits(static_cast<std::size_t>(threads), 0);
  auto worker = [&](int w) {
    std::uint64_t begin = n * static_cast<std::uint64_t>(w) /
                          static_cast<std::uint64_t>(threads);
    std::uint64_t end = n * static_cast<std::uint64_t>(w + 1) /
                        static_cast<std::uint64_t>(threads);
    std::uint64_t local = 0;
    for (std::uint64_t i = begin; i < end; ++i) {
      std::uint64_t trial_seed = derive_seed(q.seed, "persistence-trial", i);
      if (minority_persists(trial_seed, q)) ++local;
    }
    hits[static_cast<std::size_t>(w)] = local;
  };

  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (std::thread& t : pool) t.join();
  }

  std::uint64_t total = 0;
  for (std::uint64_t h : hits) total += h;

  PersistenceResult out;
  out.p_hat = static_cast<double>(total) / static_cast<double>(n);
  out.ci_halfwidth =
      3.0 * std::sqrt(out.p_hat * (1.0 - out.p_hat) / static_cast<double>(n));
  RhoResult rho = chernoff_rho(q.majority, q.minority);
  out.chernoff_rho = rho.rho;
  out.s_star = rho.s_star;
  out.chernoff_bound = std::pow(rho.rho, static_cast<double>(q.horizon));
  return out;
}

ShareResult proportional_share(const EventTrace& trace, const std::set<int>& group,
                               int participants) {
  ShareResult out;
  if (participants <= 0 || trace.rounds.empty()) return out;
  std::uint64_t wins = 0;
  for (const RoundRow& r : trace.rounds) {
    if (group.count(r.winner) != 0) ++wins;
  }
  double total = static_cast<double>(trace.rounds.size());
  out.share = static_cast<double>(wins) / total;
  out.expected =
      static_cast<double>(group.size()) / static_cast<double>(participants);
  double var = out.expected * (1.0 - out.expected) / total;
  out.z = var > 0.0 ? (out.share - out.expected) / std::sqrt(var) : 0.0;
  return out;
}

void write_persistence_csv(std::ostream& out,
                           const std::vector<PersistenceRow>& rows) {
  out << "M,m,h,trials,p_hat,ci,rho,bound,s_star\n";
  for (const PersistenceRow& r : rows) {
    out << r.query.majority << ',' << r.query.minority << ',' << r.query.horizon
        << ',' << r.query.trials << ',' << fmt_double(r.result.p_hat) << ','
        << fmt_double(r.result.ci_halfwidth) << ','
        << fmt_double(r.result.chernoff_rho) << ','
        << fmt_double(r.result.chernoff_bound) << ','
        << fmt_double(r.result.s_star) << '\n';
  }
}

}  // namespace luckchain
