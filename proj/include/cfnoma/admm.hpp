#pragma once

#include <functional>
#include <vector>

#include "cfnoma/channel.hpp"
#include "cfnoma/rates.hpp"
#include "json.hpp"

namespace cfnoma::admm {

struct AdmmConfig {
  double rho = 1.0;         // the paper's penalty parameter (terms scale 1/rho)
  int max_iters = 300;
  double consensus_tol = 1e-3;
  double binary_tol = 1e-2;
  // iterate-change threshold that must also clear before stopping, so a run
  // cannot end while the block updates are still moving
  double dual_tol = 1e-3;
  int pgd_max_steps = 200;
  double pgd_tol = 1e-6;
  double hinge_weight = 200.0;  // quadratic penalty on the rate/ICI constraints
  bool adapt_rho = false;
  // mixed-integer relaxations are sensitive to the starting point: run this
  // many seeded starts and keep the best rounded solution
  int num_starts = 5;
  std::uint64_t seed = 1;
};

// Everything BS m can touch locally.
struct AdmmLocalState {
  Eigen::VectorXd gamma;     // K slack rates
  Eigen::MatrixXcd w;        // N_T x K
  Eigen::MatrixXd beta;      // K x K in [0,1], diagonal 0
  Eigen::MatrixXd beta_c;    // complementary variable, diagonal 1
  Eigen::MatrixXd xi_out;    // M x K: bound on ICI this BS causes cell n (row m zero)
  Eigen::MatrixXd xi_in;     // M x K: local copy of ICI caused by BS n to this cell
  Eigen::MatrixXd mmse_a;    // K x K, >= 1
  Eigen::MatrixXcd mmse_c;   // K x K
};

struct AdmmSharedState {
  // xi_hat[m](n, k): agreed bound on ICI from BS m to user k of cell n
  std::vector<Eigen::MatrixXd> xi_hat;
  std::vector<Eigen::MatrixXd> lambda;    // per BS, K x K (beta + beta_c - 1)
  std::vector<Eigen::MatrixXd> lambda_t;  // per BS, K x K (beta .* beta_c)
  std::vector<Eigen::MatrixXd> nu_out;    // per BS, M x K
  std::vector<Eigen::MatrixXd> nu_in;     // per BS, M x K
  double rho = 1.0;
};

struct AdmmReport {
  int iterations = 0;
  std::vector<double> consensus_residual;
  std::vector<double> binary_sum_residual;   // ||beta + beta_c - 1||
  std::vector<double> binary_prod_residual;  // ||beta .* beta_c||
  std::vector<double> objective;             // sum of local slack rates
  bool rounded_feasible = false;
  long long exchanged_bits = 0;
  double sum_rate = 0.0;
};

void save_report(const AdmmReport& report, const std::string& csv_path,
                 const std::string& json_path);

// MMSE auxiliaries at the current point; intf must be the same interference
// the caller will use in the rate bracket.
void mmse_pair(double signal, std::complex<double> z, double intf,
               double sigma2, double* a, std::complex<double>* c);

// Rate bracket log2(a) - a*mse/ln2 + 1/ln2 at the given interference.
double rate_bracket(double a, std::complex<double> c, std::complex<double> z,
                    double signal, double intf, double sigma2);

// Convexified interference (the complementary-variable form); powers(u) =
// |h_mi w_u|^2 and ici is added as given.
double convex_intf(const Eigen::MatrixXd& beta_c,
                   const Eigen::VectorXd& powers, int i, int k, double ici);

// Consensus update for one ordered pair: 0.5 [xi_m + xi_n + rho (nu_m + nu_n)].
Eigen::VectorXd update_global(const Eigen::VectorXd& xi_m,
                              const Eigen::VectorXd& xi_n,
                              const Eigen::VectorXd& nu_m,
                              const Eigen::VectorXd& nu_n, double rho);

// lambda += (beta + beta_c - 1)/rho, lambda_t += beta .* beta_c / rho,
// nu += (xi - xi_hat)/rho for both copy directions.
void update_duals(const std::vector<AdmmLocalState>& locals,
                  AdmmSharedState& shared);

// The two block minimizations of the local augmented Lagrangian
// (block 1: {xi, beta}; block 2: {gamma, w, beta_c}) for BS m; exact
// feasibility restoration runs after each block.
void update_local(AdmmLocalState& local, const AdmmSharedState& shared,
                  const ChannelSet& ch, const NetworkConfig& cfg,
                  const AdmmConfig& acfg, int m);

struct AdmmResult {
  SchedulingDecision decision;
  AdmmReport report;
};

AdmmResult run_distributed(const ChannelSet& ch, const NetworkConfig& cfg,
                           const AdmmConfig& acfg);

AdmmResult run_centralized(const ChannelSet& ch, const NetworkConfig& cfg,
                           const AdmmConfig& acfg);

// Beamforming for a frozen binary SIC matrix (the block-2 machinery with
// beta fixed and exact ICI); shared by the brute-force and cluster oracles.
struct FrozenBetaOptions {
  int rounds = 80;
  int pgd_max_steps = 120;
  double pgd_tol = 1e-7;
  double hinge_weight = 200.0;
};

SchedulingDecision solve_frozen_beta(const ChannelSet& ch,
                                     const NetworkConfig& cfg,
                                     const std::vector<Eigen::MatrixXd>& beta,
                                     const FrozenBetaOptions& opt);

// Projected gradient descent with backtracking line search (shared driver).
struct PgdProblem {
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)> eval;
  std::function<void(Eigen::VectorXd&)> project;
};
Eigen::VectorXd pgd_minimize(const PgdProblem& p, Eigen::VectorXd x,
                             int max_steps, double tol);

}  // namespace cfnoma::admm
