#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cfnoma/channel.hpp"
#include "cfnoma/gnn.hpp"
#include "json.hpp"

namespace cfnoma::bilevel {

struct SpectralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int inner_steps = 4;       // T
  double inner_lr = 1e-3;    // kappa, also the Neumann recurrence rate
  double outer_lr = 3e-3;    // decays as outer_lr / (1 + decay * u)
  double outer_lr_decay = 0.01;
  int neumann_terms = 20;    // N_G
  double fd_eps = 0.0;       // 0 -> 1e-4 * (1 + ||theta||)
  int epochs = 30;
  double rate_penalty = 10.0;
  std::uint64_t seed = 1;
  bool anneal_temp = false;
  double s_temp_final = 0.1;
};

struct TrainLogEntry {
  int epoch = 0;
  int outer_iter = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double hypergrad_norm = 0.0;
  int active_layers = 0;
  int active_neurons = 0;
  long long bits = 0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  void save_csv(const std::string& path) const;
  nlohmann::json summary() const;
};

// Stochastic bi-level problem: inner loss L(theta, alpha) and outer
// (validation) loss L_v, both exposed through per-minibatch gradient oracles.
class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;
  virtual int theta_dim() const = 0;
  virtual int alpha_dim() const = 0;
  virtual int num_train_batches() const = 0;
  virtual int num_val_batches() const = 0;
  virtual double train_loss(const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& alpha, int batch) = 0;
  virtual double val_loss(const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& alpha, int batch) = 0;
  virtual Eigen::VectorXd grad_theta_train(const Eigen::VectorXd& theta,
                                           const Eigen::VectorXd& alpha,
                                           int batch) = 0;
  virtual Eigen::VectorXd grad_alpha_train(const Eigen::VectorXd& theta,
                                           const Eigen::VectorXd& alpha,
                                           int batch) = 0;
  virtual Eigen::VectorXd grad_theta_val(const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& alpha,
                                         int batch) = 0;
  virtual Eigen::VectorXd grad_alpha_val(const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& alpha,
                                         int batch) = 0;
};

// T steps of theta <- theta - kappa * grad L(theta, alpha) over the given
// minibatch schedule. Throws ad::NumericError if a loss turns non-finite.
Eigen::VectorXd inner_train(BilevelProblem& problem, Eigen::VectorXd theta,
                            const Eigen::VectorXd& alpha,
                            const std::vector<int>& schedule, double kappa);

// Stochastic Neumann-series hypergradient at the inner optimum:
// direct term minus kappa * (mixed vjp of the summed Neumann recurrence).
// Throws SpectralError if the recurrence diverges.
Eigen::VectorXd neumann_hypergradient(BilevelProblem& problem,
                                      const Eigen::VectorXd& theta_star,
                                      const Eigen::VectorXd& alpha,
                                      int train_batch, int val_batch,
                                      int n_terms, double kappa, double eps);

// Full reverse-mode differentiation through the recorded inner trajectory;
// validation oracle for the Neumann estimator. The memory guard bounds the
// stored trajectory (T+1) * |theta|.
Eigen::VectorXd unrolled_hypergradient(BilevelProblem& problem,
                                       const Eigen::VectorXd& theta0,
                                       const Eigen::VectorXd& alpha, int steps,
                                       double kappa,
                                       const std::vector<int>& schedule,
                                       int val_batch, double eps);

// Same, but only the last tau steps are back-propagated.
Eigen::VectorXd truncated_hypergradient(BilevelProblem& problem,
                                        const Eigen::VectorXd& theta0,
                                        const Eigen::VectorXd& alpha, int steps,
                                        double kappa,
                                        const std::vector<int>& schedule,
                                        int val_batch, int tau, double eps);

// kappa * sum_{n=0}^{terms} (I - kappa G)^n; throws SpectralError when the
// terms blow up (||I - kappa G|| >= 1 territory).
Eigen::MatrixXd neumann_inverse(const Eigen::MatrixXd& g, double kappa,
                                int terms);

struct TrainResult {
  gnn::GnnModel model;
  TrainLog log;
};

// Bi-level AutoGNN training (mode kAuto) or plain inner-loop SGD training of
// the fixed architecture (mode kFixed). Datasets are renewed every epoch.
TrainResult train(const NetworkConfig& net, const gnn::GnnConfig& gnn_cfg,
                  const TrainConfig& cfg, gnn::Mode mode, Dataset train_data,
                  Dataset val_data);

}  // namespace cfnoma::bilevel
