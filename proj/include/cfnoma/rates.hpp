#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cfnoma/channel.hpp"
#include "cfnoma/config.hpp"
#include "json.hpp"

namespace cfnoma {

// Output of any scheduler: per-BS beamformers, SIC indicators and slacks.
// beta(i, k) = 1 means user i decodes user k's signal before its own;
// the diagonal is fixed to 0 (a user does not SIC-decode itself).
struct SchedulingDecision {
  std::vector<Eigen::MatrixXcd> w;     // per BS, N_T x K, columns w_k
  std::vector<Eigen::MatrixXd> beta;   // per BS, K x K in [0, 1]
  std::vector<Eigen::MatrixXd> zeta;   // per BS, K x K slack

  int num_bs() const { return static_cast<int>(w.size()); }
  static SchedulingDecision zeros(int m_bs, int n_t, int k_users);
};

struct FeasibilityReport {
  bool power_ok = true;
  double power_violation = 0.0;   // max over BSs of (power - P_max)
  bool min_rate_ok = true;
  double min_rate_violation = 0.0;
  bool mutual_sic_ok = true;
  double mutual_sic_violation = 0.0;  // max over pairs of (b_ik + b_ki - 1)
  bool binary_ok = true;
  double binary_violation = 0.0;  // max distance of any beta entry from {0,1}
  bool all_ok() const { return power_ok && min_rate_ok && mutual_sic_ok && binary_ok; }
};

struct RateReport {
  std::vector<Eigen::MatrixXd> r;  // per BS, K x K decode rates r_ik (diag = r_kk)
  std::vector<Eigen::VectorXd> effective;  // per BS, per-user rate R_k
  double sum_rate = 0.0;
  double sic_complexity = 0.0;     // sum of off-diagonal beta entries
  FeasibilityReport feasibility;
};

nlohmann::json to_json(const RateReport& report);

namespace rates {

// plain h * w (row times column, no conjugation)
std::complex<double> hw(const Eigen::RowVectorXcd& h,
                        const Eigen::Ref<const Eigen::VectorXcd>& w);

// Inter-cell interference at user i of cell m (Eq. 2 side term).
double ici(const SchedulingDecision& d, const ChannelSet& ch, int m, int i);

// Interference for user i decoding user k (i != k routes through the
// weaker/stronger split, i == k through the after-SIC form).
double intf_decode(const Eigen::MatrixXd& beta_m, const SchedulingDecision& d,
                   const ChannelSet& ch, int m, int i, int k);
double intf_self(const Eigen::MatrixXd& beta_m, const SchedulingDecision& d,
                 const ChannelSet& ch, int m, int k);

// log2(1 + SINR) of user i decoding user k's signal.
double decode_rate(const Eigen::MatrixXd& beta_m, const SchedulingDecision& d,
                   const ChannelSet& ch, int m, int i, int k, double sigma2);

// min_i { b_ik r_ik + (1 - b_ik) r_kk }
double effective_rate(const Eigen::MatrixXd& beta_m, const Eigen::MatrixXd& r_m,
                      int k);

RateReport sum_rate(const SchedulingDecision& d, const ChannelSet& ch,
                    double sigma2);

FeasibilityReport check_feasibility(const SchedulingDecision& d,
                                    const ChannelSet& ch,
                                    const NetworkConfig& cfg);

// sum_rate + feasibility in one report
RateReport evaluate(const SchedulingDecision& d, const ChannelSet& ch,
                    const NetworkConfig& cfg);

}  // namespace rates
}  // namespace cfnoma
