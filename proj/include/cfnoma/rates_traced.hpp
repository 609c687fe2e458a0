#pragma once

#include "cfnoma/autodiff.hpp"
#include "cfnoma/channel.hpp"
#include "cfnoma/rates.hpp"

namespace cfnoma::rates_ad {

// Per-BS decision recorded on a tape; complex beamformers as real pairs.
// beta[m](i, k) are 1x1 nodes, the diagonal stays untracked (fixed 0).
struct TracedDecision {
  std::vector<ad::Value> w_re;  // per BS, N_T x K
  std::vector<ad::Value> w_im;
  std::vector<std::vector<std::vector<ad::Value>>> beta;  // [m][i][k], i != k
  std::vector<std::vector<std::vector<ad::Value>>> zeta;  // [m][i][k], i < k

  int num_bs() const { return static_cast<int>(w_re.size()); }
};

struct TracedRates {
  std::vector<std::vector<ad::Value>> effective;  // [m][k]
  ad::Value sum_rate;
};

// Eqs. (2)-(6) on the tape; mirrors rates::sum_rate term for term.
TracedRates build_rates(ad::Tape& tape, const TracedDecision& dec,
                        const ChannelSet& ch, double sigma2);

struct LossOptions {
  double min_rate = 0.0;
  double penalty_weight = 0.0;  // 0 recovers loss = -sum_rate
};

// loss = -sum_rate + weight * sum_k max(0, min_rate - R_k)^2
ad::Value build_training_loss(ad::Tape& tape, const TracedDecision& dec,
                              const ChannelSet& ch, double sigma2,
                              const LossOptions& opt);

// Record an existing plain decision as tape leaves (W and off-diagonal beta
// become differentiable).
TracedDecision trace_decision(ad::Tape& tape, const SchedulingDecision& d);

// Read current values back into a plain decision.
SchedulingDecision extract_decision(const TracedDecision& dec);

}  // namespace cfnoma::rates_ad
