#pragma once

// Test-only oracles, written directly from the rate formulas with plain
// loops. Deliberately independent of the production rate path: no shared
// helpers beyond the raw channel/decision containers.

#include <complex>
#include <limits>
#include <vector>

#include "cfnoma/channel.hpp"
#include "cfnoma/rates.hpp"
#include "cfnoma/rng.hpp"

namespace oracle {

using cfnoma::ChannelSet;
using cfnoma::SchedulingDecision;

inline double power_of(const ChannelSet& ch, const SchedulingDecision& d,
                       int m, int i, int n, int u) {
  std::complex<double> acc(0.0, 0.0);
  for (int t = 0; t < ch.num_antennas(); ++t)
    acc += ch.h[m][n][i](t) * d.w[n](t, u);
  return acc.real() * acc.real() + acc.imag() * acc.imag();
}

inline double ici(const ChannelSet& ch, const SchedulingDecision& d, int m,
                  int i) {
  double total = 0.0;
  for (int n = 0; n < ch.num_bs(); ++n) {
    if (n == m) continue;
    for (int u = 0; u < ch.users_per_bs(); ++u)
      total += power_of(ch, d, m, i, n, u);
  }
  return total;
}

// interference for decoder i on user k's signal, i != k
inline double intf_decode(const ChannelSet& ch, const SchedulingDecision& d,
                          int m, int i, int k) {
  const Eigen::MatrixXd& b = d.beta[m];
  double weaker = 0.0;
  for (int u = 0; u < k; ++u)
    weaker += (1.0 - b(i, u) + b(i, u) * b(u, k)) * power_of(ch, d, m, i, m, u);
  double stronger = 0.0;
  for (int u = k + 1; u < ch.users_per_bs(); ++u)
    stronger += (1.0 - b(i, u) * b(k, u)) * power_of(ch, d, m, i, m, u);
  return weaker + stronger + ici(ch, d, m, i);
}

// interference for user k decoding its own signal
inline double intf_self(const ChannelSet& ch, const SchedulingDecision& d,
                        int m, int k) {
  const Eigen::MatrixXd& b = d.beta[m];
  double intra = 0.0;
  for (int u = 0; u < ch.users_per_bs(); ++u) {
    if (u == k) continue;
    intra += (1.0 - b(k, u)) * power_of(ch, d, m, k, m, u);
  }
  return intra + ici(ch, d, m, k);
}

inline double decode_rate(const ChannelSet& ch, const SchedulingDecision& d,
                          int m, int i, int k, double sigma2) {
  const double intf =
      (i == k) ? intf_self(ch, d, m, k) : intf_decode(ch, d, m, i, k);
  return std::log2(1.0 + power_of(ch, d, m, i, m, k) / (intf + sigma2));
}

// continuous-form effective rate
inline double effective_rate_min_form(const ChannelSet& ch,
                                      const SchedulingDecision& d, int m,
                                      int k, double sigma2) {
  double best = std::numeric_limits<double>::infinity();
  const double r_kk = decode_rate(ch, d, m, k, k, sigma2);
  for (int i = 0; i < ch.users_per_bs(); ++i) {
    const double term =
        (i == k) ? r_kk
                 : d.beta[m](i, k) * decode_rate(ch, d, m, i, k, sigma2) +
                       (1.0 - d.beta[m](i, k)) * r_kk;
    best = std::min(best, term);
  }
  return best;
}

// division-form effective rate (binary beta only): min over the decoders
// actually selected, own decoding always included
inline double effective_rate_division_form(const ChannelSet& ch,
                                           const SchedulingDecision& d, int m,
                                           int k, double sigma2) {
  double best = decode_rate(ch, d, m, k, k, sigma2);
  for (int i = 0; i < ch.users_per_bs(); ++i) {
    if (i == k) continue;
    if (d.beta[m](i, k) == 1.0)
      best = std::min(best, decode_rate(ch, d, m, i, k, sigma2));
  }
  return best;
}

inline double sum_rate(const ChannelSet& ch, const SchedulingDecision& d,
                       double sigma2) {
  double total = 0.0;
  for (int m = 0; m < ch.num_bs(); ++m)
    for (int k = 0; k < ch.users_per_bs(); ++k)
      total += effective_rate_min_form(ch, d, m, k, sigma2);
  return total;
}

// random decision helpers shared by several suites
inline SchedulingDecision random_decision(const ChannelSet& ch, double p_max,
                                          cfnoma::Rng& rng, bool binary_beta) {
  const int m_bs = ch.num_bs();
  const int k_users = ch.users_per_bs();
  const int n_t = ch.num_antennas();
  SchedulingDecision d = SchedulingDecision::zeros(m_bs, n_t, k_users);
  for (int m = 0; m < m_bs; ++m) {
    for (int t = 0; t < n_t; ++t)
      for (int k = 0; k < k_users; ++k) d.w[m](t, k) = rng.cnormal();
    const double p = d.w[m].squaredNorm();
    if (p > p_max) d.w[m] *= std::sqrt(p_max / p);
    for (int i = 0; i < k_users; ++i)
      for (int k = i + 1; k < k_users; ++k) {
        if (binary_beta) {
          const double u = rng.uniform();
          if (u < 1.0 / 3) d.beta[m](i, k) = 1.0;
          else if (u < 2.0 / 3) d.beta[m](k, i) = 1.0;
        } else {
          const double a = rng.uniform();
          const double b = rng.uniform() * (1.0 - a);
          d.beta[m](i, k) = a;
          d.beta[m](k, i) = b;
        }
        d.zeta[m](i, k) = 1.0 - d.beta[m](i, k) - d.beta[m](k, i);
        d.zeta[m](k, i) = d.zeta[m](i, k);
      }
  }
  return d;
}

}  // namespace oracle
