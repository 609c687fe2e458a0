#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cfnoma/autodiff.hpp"
#include "cfnoma/channel.hpp"
#include "cfnoma/rates_traced.hpp"
#include "cfnoma/rng.hpp"

namespace cfnoma::gnn {

enum class Mode { kFixed, kAuto };
enum class SampleMode { kSoft, kHard };

// How architecture/SIC sampling noise is drawn. kPerBs is the production
// behaviour; kSharedAcrossBs fixes the noise per position so BS permutations
// commute with the forward pass; kNone disables it.
enum class NoiseMode { kPerBs, kSharedAcrossBs, kNone };

struct GnnConfig {
  int layers = 3;      // L
  int embed_dim = 16;  // D^E, also the hidden-state width
  int hidden = 64;     // encoder/combiner MLP hidden width (2 hidden layers)
  double s_temp = 1.0;
  double w_scale = 1.0;  // gain on the raw beamformer head outputs
};

// Per-layer weight slots into the flat theta vector.
struct LayerSlots {
  int enc_w1, enc_b1, enc_w2, enc_b2, enc_w3, enc_b3;
  int comb_w1, comb_b1, comb_w2, comb_b2, comb_w3, comb_b3;
};

struct Slots {
  int in_proj_w, in_proj_b;
  std::vector<LayerSlots> layer;
  int head_w, head_b;
};

// Shared GNN weights theta and architecture logits alpha behind flat vectors.
// The parameter shapes depend on (N_T, K) only, so one model serves any
// number of cells.
struct GnnModel {
  GnnConfig cfg;
  int num_antennas = 0;
  int users_per_bs = 0;
  ad::ParamVector theta_shape;
  ad::ParamVector alpha_shape;  // [outer logits (L); inner logits (L-1) x D^E]
  Eigen::VectorXd theta;
  Eigen::VectorXd alpha;
  Slots slots;

  int feature_dim() const { return 2 * num_antennas * users_per_bs; }
  int head_out_dim() const {
    return 2 * num_antennas * users_per_bs +
           2 * users_per_bs * users_per_bs;
  }
  double outer_logit(int l) const { return alpha(l); }
  double inner_logit(int l, int d) const {
    return alpha(cfg.layers + (l - 1) * cfg.embed_dim + d);
  }

  static GnnModel init(const GnnConfig& cfg, int num_antennas, int users_per_bs,
                       std::uint64_t seed);

  void save(const std::string& path) const;
  static GnnModel load(const std::string& path);
  std::string config_hash() const;
};

// Sampling noise for one forward pass. Masks are drawn once per pass and
// shared by all BSs; the beta/zeta Gumbel triples are per BS and user pair.
struct NoisePack {
  Eigen::VectorXd outer;  // L logistic draws
  Eigen::MatrixXd inner;  // D^E x (L-1) logistic draws, column l-1 = layer l
  std::vector<std::vector<Eigen::Vector3d>> triple;  // [m][pair(i<k)] Gumbels

  static NoisePack sample(int m_bs, int k_users, const GnnConfig& cfg,
                          NoiseMode mode, Rng& rng);
};

struct ForwardTrace {
  long long bits = 0;
  int active_layers = 0;
  std::vector<Eigen::VectorXd> inner_masks;  // sampled mask per layer (soft or hard)
  Eigen::VectorXd outer_gates;
};

struct TracedForward {
  rates_ad::TracedDecision decision;
  ForwardTrace trace;
};

// Full distributed pass: message passing with pruning/skipping, output head,
// Gumbel sampling, SIC-triple softmax, power projection. theta_leaves /
// alpha_leaves must come from the model's shape registries on this tape;
// alpha_leaves is ignored in fixed mode.
TracedForward build_forward(ad::Tape& tape, const ChannelSet& ch,
                            const GnnModel& model,
                            const std::vector<ad::Value>& theta_leaves,
                            const std::vector<ad::Value>& alpha_leaves,
                            Mode mode, SampleMode sample_mode,
                            const NoisePack& noise);

struct ForwardResult {
  SchedulingDecision decision;
  ForwardTrace trace;
};

// Convenience wrapper on a throwaway tape.
ForwardResult forward(const ChannelSet& ch, const GnnModel& model, Mode mode,
                      SampleMode sample_mode, NoiseMode noise_mode, Rng& rng);

// Closed form for the fixed architecture: M(M-1) * L * D^E * 32
long long fixed_gnn_bits(int m_bs, int layers, int embed_dim);

// ---- standalone pieces (unit-testable plain forms) ----

// Gumbel-sigmoid reparameterized binary sample, in (0, 1). The deterministic
// overload takes the logistic noise (log U - log(1-U)) directly.
double gumbel(double logit, Rng& rng, double s_temp);
double gumbel(double logit, double logistic_noise, double s_temp);

// Softmax over the three SIC logits of one unordered pair.
Eigen::Vector3d sic_softmax(double b_ik, double b_ki, double z_ik);

// Rescale onto the power ball iff the budget is exceeded; idempotent.
Eigen::MatrixXcd project_power(const Eigen::MatrixXcd& w, double p_max);

}  // namespace cfnoma::gnn
