#include "cfnoma/bilevel.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace cfnoma::bilevel {

void TrainLog::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write train log: " + path);
  out << "epoch,outer_iter,train_loss,val_loss,hypergrad_norm,active_layers,"
         "active_neurons,bits\n";
  for (const auto& e : entries) {
    out << e.epoch << ',' << e.outer_iter << ',' << e.train_loss << ','
        << e.val_loss << ',' << e.hypergrad_norm << ',' << e.active_layers
        << ',' << e.active_neurons << ',' << e.bits << '\n';
  }
}

nlohmann::json TrainLog::summary() const {
  nlohmann::json j;
  j["outer_iterations"] = entries.size();
  if (!entries.empty()) {
    j["final_train_loss"] = entries.back().train_loss;
    j["final_val_loss"] = entries.back().val_loss;
    j["final_active_layers"] = entries.back().active_layers;
    j["final_bits"] = entries.back().bits;
  }
  return j;
}

Eigen::VectorXd inner_train(BilevelProblem& problem, Eigen::VectorXd theta,
                            const Eigen::VectorXd& alpha,
                            const std::vector<int>& schedule, double kappa) {
  for (int batch : schedule) {
    const Eigen::VectorXd g = problem.grad_theta_train(theta, alpha, batch);
    if (!g.allFinite())
      throw ad::NumericError("inner_train: non-finite gradient on batch " +
                             std::to_string(batch));
    theta -= kappa * g;
  }
  return theta;
}

Eigen::VectorXd neumann_hypergradient(BilevelProblem& problem,
                                      const Eigen::VectorXd& theta_star,
                                      const Eigen::VectorXd& alpha,
                                      int train_batch, int val_batch,
                                      int n_terms, double kappa, double eps) {
  if (eps <= 0.0) eps = ad::fd_default_eps(theta_star);
  const Eigen::VectorXd direct =
      problem.grad_alpha_val(theta_star, alpha, val_batch);
  Eigen::VectorXd v = problem.grad_theta_val(theta_star, alpha, val_batch);
  const double v0_norm = v.norm();
  Eigen::VectorXd s = v;
  const ad::GradFn grad_theta = [&](const Eigen::VectorXd& th) {
    return problem.grad_theta_train(th, alpha, train_batch);
  };
  for (int n = 1; n <= n_terms; ++n) {
    v -= kappa * ad::fd_hvp(grad_theta, theta_star, v, eps);
    if (v.norm() > 1e6 * (v0_norm + 1e-12))
      throw SpectralError("spectral condition violated");
    s += v;
  }
  const ad::GradFn grad_alpha = [&](const Eigen::VectorXd& th) {
    return problem.grad_alpha_train(th, alpha, train_batch);
  };
  return direct - kappa * ad::fd_mixed_vjp(grad_alpha, theta_star, s, eps);
}

namespace {

Eigen::VectorXd reverse_hypergradient(BilevelProblem& problem,
                                      const Eigen::VectorXd& theta0,
                                      const Eigen::VectorXd& alpha, int steps,
                                      double kappa,
                                      const std::vector<int>& schedule,
                                      int val_batch, int tau, double eps) {
  if (steps < 0 || tau < 0 || tau > steps)
    throw ad::NumericError("reverse hypergradient: bad steps/tau");
  if (static_cast<long long>(steps + 1) * problem.theta_dim() > 50'000'000LL)
    throw ad::NumericError(
        "reverse hypergradient: trajectory exceeds the memory budget");
  std::vector<Eigen::VectorXd> traj;
  traj.reserve(steps + 1);
  traj.push_back(theta0);
  Eigen::VectorXd theta = theta0;
  for (int t = 1; t <= steps; ++t) {
    const int batch = schedule[(t - 1) % schedule.size()];
    theta -= kappa * problem.grad_theta_train(theta, alpha, batch);
    traj.push_back(theta);
  }
  if (eps <= 0.0) eps = ad::fd_default_eps(theta);
  Eigen::VectorXd g = problem.grad_alpha_val(theta, alpha, val_batch);
  Eigen::VectorXd p = problem.grad_theta_val(theta, alpha, val_batch);
  for (int t = steps; t >= steps - tau + 1; --t) {
    const int batch = schedule[(t - 1) % schedule.size()];
    const Eigen::VectorXd& theta_prev = traj[t - 1];
    const ad::GradFn grad_alpha = [&](const Eigen::VectorXd& th) {
      return problem.grad_alpha_train(th, alpha, batch);
    };
    g -= kappa * ad::fd_mixed_vjp(grad_alpha, theta_prev, p, eps);
    const ad::GradFn grad_theta = [&](const Eigen::VectorXd& th) {
      return problem.grad_theta_train(th, alpha, batch);
    };
    p -= kappa * ad::fd_hvp(grad_theta, theta_prev, p, eps);
  }
  return g;
}

}  // namespace

Eigen::VectorXd unrolled_hypergradient(BilevelProblem& problem,
                                       const Eigen::VectorXd& theta0,
                                       const Eigen::VectorXd& alpha, int steps,
                                       double kappa,
                                       const std::vector<int>& schedule,
                                       int val_batch, double eps) {
  return reverse_hypergradient(problem, theta0, alpha, steps, kappa, schedule,
                               val_batch, steps, eps);
}

Eigen::VectorXd truncated_hypergradient(BilevelProblem& problem,
                                        const Eigen::VectorXd& theta0,
                                        const Eigen::VectorXd& alpha, int steps,
                                        double kappa,
                                        const std::vector<int>& schedule,
                                        int val_batch, int tau, double eps) {
  return reverse_hypergradient(problem, theta0, alpha, steps, kappa, schedule,
                               val_batch, tau, eps);
}

Eigen::MatrixXd neumann_inverse(const Eigen::MatrixXd& g, double kappa,
                                int terms) {
  const int n = static_cast<int>(g.rows());
  const Eigen::MatrixXd step = Eigen::MatrixXd::Identity(n, n) - kappa * g;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd total = term;
  for (int i = 1; i <= terms; ++i) {
    term = term * step;
    if (term.norm() > 1e6 * n)
      throw SpectralError("spectral condition violated");
    total += term;
  }
  return kappa * total;
}

// ---- GNN bi-level problem ----

namespace {

// Minibatch losses for the GNN scheduler. Gumbel noise is cached per batch so
// every oracle call at shifted parameters differentiates the same realization;
// the trainer controls when it is redrawn.
class GnnProblem : public BilevelProblem {
 public:
  GnnProblem(const NetworkConfig& net, gnn::GnnModel& model, gnn::Mode mode,
             double rate_penalty, std::uint64_t noise_seed)
      : net_(net),
        model_(model),
        mode_(mode),
        noise_rng_(noise_seed) {
    opt_.min_rate = net.min_rate;
    opt_.penalty_weight = rate_penalty;
  }

  void set_data(const Dataset* train, const Dataset* val) {
    train_ = train;
    val_ = val;
    train_noise_.assign(train_->num_batches(), {});
    val_noise_.assign(val_->num_batches(), {});
    for (int b = 0; b < train_->num_batches(); ++b) resample_noise(b, false);
    for (int b = 0; b < val_->num_batches(); ++b) resample_noise(b, true);
  }

  void resample_noise(int batch, bool val) {
    const Dataset& ds = val ? *val_ : *train_;
    auto& store = val ? val_noise_ : train_noise_;
    store[batch].clear();
    for (std::size_t s = 0; s < ds.batches[batch].size(); ++s)
      store[batch].push_back(gnn::NoisePack::sample(
          ds.batches[batch][s].num_bs(), ds.batches[batch][s].users_per_bs(),
          model_.cfg, gnn::NoiseMode::kPerBs, noise_rng_));
  }

  int theta_dim() const override { return model_.theta_shape.dim(); }
  int alpha_dim() const override { return model_.alpha_shape.dim(); }
  int num_train_batches() const override { return train_->num_batches(); }
  int num_val_batches() const override { return val_->num_batches(); }

  double train_loss(const Eigen::VectorXd& th, const Eigen::VectorXd& al,
                    int b) override {
    return eval(th, al, b, false, nullptr, nullptr);
  }
  double val_loss(const Eigen::VectorXd& th, const Eigen::VectorXd& al,
                  int b) override {
    return eval(th, al, b, true, nullptr, nullptr);
  }
  Eigen::VectorXd grad_theta_train(const Eigen::VectorXd& th,
                                   const Eigen::VectorXd& al, int b) override {
    Eigen::VectorXd g;
    eval(th, al, b, false, &g, nullptr);
    return g;
  }
  Eigen::VectorXd grad_alpha_train(const Eigen::VectorXd& th,
                                   const Eigen::VectorXd& al, int b) override {
    Eigen::VectorXd g;
    eval(th, al, b, false, nullptr, &g);
    return g;
  }
  Eigen::VectorXd grad_theta_val(const Eigen::VectorXd& th,
                                 const Eigen::VectorXd& al, int b) override {
    Eigen::VectorXd g;
    eval(th, al, b, true, &g, nullptr);
    return g;
  }
  Eigen::VectorXd grad_alpha_val(const Eigen::VectorXd& th,
                                 const Eigen::VectorXd& al, int b) override {
    Eigen::VectorXd g;
    eval(th, al, b, true, nullptr, &g);
    return g;
  }

  double eval_with_grads(const Eigen::VectorXd& th, const Eigen::VectorXd& al,
                         int b, bool val, Eigen::VectorXd* g_theta) {
    return eval(th, al, b, val, g_theta, nullptr);
  }

 private:
  double eval(const Eigen::VectorXd& th, const Eigen::VectorXd& al, int b,
              bool val, Eigen::VectorXd* g_theta, Eigen::VectorXd* g_alpha) {
    const Dataset& ds = val ? *val_ : *train_;
    const auto& noise = val ? val_noise_[b] : train_noise_[b];
    ad::Tape tape;
    std::vector<ad::Value> theta_leaves = model_.theta_shape.bind(tape, th);
    std::vector<ad::Value> alpha_leaves = model_.alpha_shape.bind(tape, al);
    const auto& batch = ds.batches[b];
    ad::Value total = tape.constant(0.0);
    for (std::size_t s = 0; s < batch.size(); ++s) {
      gnn::TracedForward fwd = gnn::build_forward(
          tape, batch[s], model_, theta_leaves, alpha_leaves, mode_,
          gnn::SampleMode::kSoft, noise[s]);
      total = total + rates_ad::build_training_loss(
                          tape, fwd.decision, batch[s], batch[s].sigma2, opt_);
    }
    ad::Value loss = ad::scale(total, 1.0 / batch.size());
    if (g_theta || g_alpha) {
      tape.backward(loss);
      if (g_theta) *g_theta = model_.theta_shape.collect_grad(tape, theta_leaves);
      if (g_alpha) *g_alpha = model_.alpha_shape.collect_grad(tape, alpha_leaves);
    }
    return loss.scalar();
  }

  const NetworkConfig& net_;
  gnn::GnnModel& model_;
  gnn::Mode mode_;
  rates_ad::LossOptions opt_;
  Rng noise_rng_;
  const Dataset* train_ = nullptr;
  const Dataset* val_ = nullptr;
  std::vector<std::vector<gnn::NoisePack>> train_noise_;
  std::vector<std::vector<gnn::NoisePack>> val_noise_;
};

int count_active_layers(const gnn::GnnModel& model) {
  int n = 0;
  for (int l = 0; l < model.cfg.layers; ++l)
    if (model.outer_logit(l) > 0.0) ++n;
  return n;
}

int count_active_neurons(const gnn::GnnModel& model) {
  int n = 0;
  for (int l = 0; l < model.cfg.layers; ++l) {
    if (model.outer_logit(l) <= 0.0) continue;
    if (l == 0) {
      n += model.cfg.embed_dim;
      continue;
    }
    for (int j = 0; j < model.cfg.embed_dim; ++j)
      if (model.inner_logit(l, j) > 0.0) ++n;
  }
  return n;
}

}  // namespace

TrainResult train(const NetworkConfig& net, const gnn::GnnConfig& gnn_cfg,
                  const TrainConfig& cfg, gnn::Mode mode, Dataset train_data,
                  Dataset val_data) {
  gnn::GnnModel model =
      gnn::GnnModel::init(gnn_cfg, net.num_antennas, net.users_per_bs, cfg.seed);
  GnnProblem problem(net, model, mode, cfg.rate_penalty,
                     Rng::mix(cfg.seed, 0xA11CE));
  problem.set_data(&train_data, &val_data);

  Rng loop_rng(Rng::mix(cfg.seed, 0xB0B));
  Eigen::VectorXd theta = model.theta;
  Eigen::VectorXd alpha = model.alpha;
  Eigen::VectorXd theta_good = theta, alpha_good = alpha;
  TrainLog log;
  const double s_temp0 = gnn_cfg.s_temp;
  int u = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0) {
      train_data = renew(train_data, loop_rng);
      val_data = renew(val_data, loop_rng);
      problem.set_data(&train_data, &val_data);
    }
    if (cfg.anneal_temp && cfg.epochs > 1) {
      const double frac = static_cast<double>(epoch) / (cfg.epochs - 1);
      model.cfg.s_temp = s_temp0 + frac * (cfg.s_temp_final - s_temp0);
    }
    std::vector<int> order(train_data.num_batches());
    std::iota(order.begin(), order.end(), 0);
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[loop_rng.next_u64() % (i + 1)]);

    try {
      for (int outer = 0; outer < train_data.num_batches(); ++outer) {
        int last_batch = order[outer];
        for (int t = 0; t < cfg.inner_steps; ++t) {
          last_batch = order[(outer + t) % order.size()];
          problem.resample_noise(last_batch, false);
          const Eigen::VectorXd g =
              problem.grad_theta_train(theta, alpha, last_batch);
          theta -= cfg.inner_lr * g;
        }

        TrainLogEntry e;
        e.epoch = epoch;
        e.outer_iter = u;
        const int j = static_cast<int>(loop_rng.next_u64() %
                                       val_data.num_batches());
        if (mode == gnn::Mode::kAuto && cfg.outer_lr > 0.0) {
          problem.resample_noise(j, true);
          const Eigen::VectorXd h = neumann_hypergradient(
              problem, theta, alpha, last_batch, j, cfg.neumann_terms,
              cfg.inner_lr, cfg.fd_eps);
          const double lr = cfg.outer_lr / (1.0 + cfg.outer_lr_decay * u);
          alpha -= lr * h;
          e.hypergrad_norm = h.norm();
        }
        e.train_loss = problem.train_loss(theta, alpha, last_batch);
        e.val_loss = problem.val_loss(theta, alpha, j);
        model.theta = theta;
        model.alpha = alpha;
        e.active_layers = count_active_layers(model);
        e.active_neurons = count_active_neurons(model);
        Rng bits_rng(Rng::mix(cfg.seed, 0xB175 + u));
        e.bits = gnn::forward(val_data.batches[j][0], model,
                              mode == gnn::Mode::kAuto ? gnn::Mode::kAuto
                                                       : gnn::Mode::kFixed,
                              gnn::SampleMode::kHard, gnn::NoiseMode::kPerBs,
                              bits_rng)
                     .trace.bits;
        log.entries.push_back(e);
        ++u;
      }
      theta_good = theta;
      alpha_good = alpha;
    } catch (const ad::NumericError&) {
      // non-finite loss: restore the last epoch-end checkpoint and stop
      theta = theta_good;
      alpha = alpha_good;
      break;
    }
  }
  model.theta = theta;
  model.alpha = alpha;
  model.cfg.s_temp = s_temp0;
  return {std::move(model), std::move(log)};
}

}  // namespace cfnoma::bilevel
