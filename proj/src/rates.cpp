#include "cfnoma/rates.hpp"

#include <cmath>

namespace cfnoma {

SchedulingDecision SchedulingDecision::zeros(int m_bs, int n_t, int k_users) {
  SchedulingDecision d;
  d.w.assign(m_bs, Eigen::MatrixXcd::Zero(n_t, k_users));
  d.beta.assign(m_bs, Eigen::MatrixXd::Zero(k_users, k_users));
  d.zeta.assign(m_bs, Eigen::MatrixXd::Zero(k_users, k_users));
  return d;
}

nlohmann::json to_json(const RateReport& report) {
  nlohmann::json j;
  j["sum_rate"] = report.sum_rate;
  j["sic_complexity"] = report.sic_complexity;
  auto& eff = j["effective_rates"] = nlohmann::json::array();
  for (const auto& v : report.effective) {
    std::vector<double> row(v.data(), v.data() + v.size());
    eff.push_back(row);
  }
  auto& fr = j["feasibility"];
  fr["power_ok"] = report.feasibility.power_ok;
  fr["power_violation"] = report.feasibility.power_violation;
  fr["min_rate_ok"] = report.feasibility.min_rate_ok;
  fr["min_rate_violation"] = report.feasibility.min_rate_violation;
  fr["mutual_sic_ok"] = report.feasibility.mutual_sic_ok;
  fr["mutual_sic_violation"] = report.feasibility.mutual_sic_violation;
  fr["binary_ok"] = report.feasibility.binary_ok;
  fr["binary_violation"] = report.feasibility.binary_violation;
  return j;
}

namespace rates {

std::complex<double> hw(const Eigen::RowVectorXcd& h,
                        const Eigen::Ref<const Eigen::VectorXcd>& w) {
  std::complex<double> s = 0.0;
  for (int t = 0; t < h.size(); ++t) s += h(t) * w(t);
  return s;
}

namespace {

// |h_{mi}^{n} w_u^{n}|^2
inline double beam_power(const ChannelSet& ch, const SchedulingDecision& d,
                         int m, int i, int n, int u) {
  return std::norm(hw(ch.h[m][n][i], d.w[n].col(u)));
}

}  // namespace

double ici(const SchedulingDecision& d, const ChannelSet& ch, int m, int i) {
  const int m_bs = ch.num_bs();
  const int k_users = ch.users_per_bs();
  double total = 0.0;
  for (int n = 0; n < m_bs; ++n) {
    if (n == m) continue;
    for (int u = 0; u < k_users; ++u) total += beam_power(ch, d, m, i, n, u);
  }
  return total;
}

double intf_decode(const Eigen::MatrixXd& beta_m, const SchedulingDecision& d,
                   const ChannelSet& ch, int m, int i, int k) {
  if (i == k) return intf_self(beta_m, d, ch, m, k);
  const int k_users = ch.users_per_bs();
  double total = 0.0;
  for (int u = 0; u < k_users; ++u) {
    if (u == k) continue;
    const double p = beam_power(ch, d, m, i, m, u);
    if (u < k) {
      total += (1.0 - beta_m(i, u) + beta_m(i, u) * beta_m(u, k)) * p;
    } else {
      total += (1.0 - beta_m(i, u) * beta_m(k, u)) * p;
    }
  }
  return total + ici(d, ch, m, i);
}

double intf_self(const Eigen::MatrixXd& beta_m, const SchedulingDecision& d,
                 const ChannelSet& ch, int m, int k) {
  const int k_users = ch.users_per_bs();
  double total = 0.0;
  for (int u = 0; u < k_users; ++u) {
    if (u == k) continue;
    total += (1.0 - beta_m(k, u)) * beam_power(ch, d, m, k, m, u);
  }
  return total + ici(d, ch, m, k);
}

double decode_rate(const Eigen::MatrixXd& beta_m, const SchedulingDecision& d,
                   const ChannelSet& ch, int m, int i, int k, double sigma2) {
  const double signal = beam_power(ch, d, m, i, m, k);
  const double intf = intf_decode(beta_m, d, ch, m, i, k);
  return std::log2(1.0 + signal / (intf + sigma2));
}

double effective_rate(const Eigen::MatrixXd& beta_m, const Eigen::MatrixXd& r_m,
                      int k) {
  const int k_users = static_cast<int>(r_m.rows());
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k_users; ++i) {
    const double term = (i == k)
                            ? r_m(k, k)
                            : beta_m(i, k) * r_m(i, k) +
                                  (1.0 - beta_m(i, k)) * r_m(k, k);
    if (term < best) best = term;
  }
  return best;
}

RateReport sum_rate(const SchedulingDecision& d, const ChannelSet& ch,
                    double sigma2) {
  const int m_bs = ch.num_bs();
  const int k_users = ch.users_per_bs();
  RateReport rep;
  rep.r.resize(m_bs);
  rep.effective.resize(m_bs);
  for (int m = 0; m < m_bs; ++m) {
    rep.r[m].resize(k_users, k_users);
    for (int i = 0; i < k_users; ++i)
      for (int k = 0; k < k_users; ++k)
        rep.r[m](i, k) = decode_rate(d.beta[m], d, ch, m, i, k, sigma2);
    rep.effective[m].resize(k_users);
    for (int k = 0; k < k_users; ++k) {
      rep.effective[m](k) = effective_rate(d.beta[m], rep.r[m], k);
      rep.sum_rate += rep.effective[m](k);
    }
    for (int i = 0; i < k_users; ++i)
      for (int k = 0; k < k_users; ++k)
        if (i != k) rep.sic_complexity += d.beta[m](i, k);
  }
  return rep;
}

FeasibilityReport check_feasibility(const SchedulingDecision& d,
                                    const ChannelSet& ch,
                                    const NetworkConfig& cfg) {
  FeasibilityReport f;
  const double p_max = ch.p_max > 0.0 ? ch.p_max : cfg.power_budget();
  for (const auto& w : d.w) {
    const double p = w.squaredNorm();
    if (p > p_max * (1.0 + 1e-9)) {
      f.power_ok = false;
      f.power_violation = std::max(f.power_violation, p - p_max);
    }
  }
  const int k_users = ch.users_per_bs();
  for (const auto& b : d.beta) {
    for (int i = 0; i < k_users; ++i) {
      for (int k = 0; k < k_users; ++k) {
        if (i == k) continue;
        const double rounded = std::abs(b(i, k) - std::round(b(i, k)));
        if (rounded > 1e-9) {
          f.binary_ok = false;
          f.binary_violation = std::max(f.binary_violation, rounded);
        }
        if (k > i) {
          const double s = b(i, k) + b(k, i);
          if (s > 1.0 + 1e-9) {
            f.mutual_sic_ok = false;
            f.mutual_sic_violation = std::max(f.mutual_sic_violation, s - 1.0);
          }
        }
      }
    }
  }
  const RateReport rep = sum_rate(d, ch, cfg.sigma2);
  for (const auto& eff : rep.effective) {
    for (int k = 0; k < eff.size(); ++k) {
      if (eff(k) < cfg.min_rate - 1e-9) {
        f.min_rate_ok = false;
        f.min_rate_violation =
            std::max(f.min_rate_violation, cfg.min_rate - eff(k));
      }
    }
  }
  return f;
}

RateReport evaluate(const SchedulingDecision& d, const ChannelSet& ch,
                    const NetworkConfig& cfg) {
  RateReport rep = sum_rate(d, ch, cfg.sigma2);
  rep.feasibility = check_feasibility(d, ch, cfg);
  return rep;
}

}  // namespace rates
}  // namespace cfnoma
