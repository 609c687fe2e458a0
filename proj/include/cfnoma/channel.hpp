#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cfnoma/config.hpp"
#include "cfnoma/rng.hpp"

namespace cfnoma {

// All channel vectors of one network realization.
// h[m][n][k] is the 1 x N_T channel from BS n to the k-th user served by
// BS m. Per cell, users are ordered by ascending data-channel gain
// ||h[m][m][k]||.
struct ChannelSet {
  std::vector<std::vector<std::vector<Eigen::RowVectorXcd>>> h;
  double sigma2 = 1.0;
  double p_max = 0.0;

  int num_bs() const { return static_cast<int>(h.size()); }
  int users_per_bs() const {
    return h.empty() ? 0 : static_cast<int>(h[0][0].size());
  }
  int num_antennas() const {
    return h.empty() ? 0 : static_cast<int>(h[0][0][0].size());
  }
};

struct Dataset {
  std::vector<std::vector<ChannelSet>> batches;
  std::string split;  // "train" | "val" | "test"
  std::uint64_t seed = 0;

  int num_batches() const { return static_cast<int>(batches.size()); }
  int batch_size() const {
    return batches.empty() ? 0 : static_cast<int>(batches[0].size());
  }
  int num_samples() const { return num_batches() * batch_size(); }
};

// (corr * e^{j phi})^{k-i} on and above the diagonal, conjugate symmetric
// below; phi is drawn once per matrix.
Eigen::MatrixXcd correlation_matrix(int k_users, double corr, Rng& rng);
Eigen::MatrixXcd correlation_matrix(int k_users, double corr, double phi);

// Hermitian square root with eigenvalues clipped at zero. clip_magnitude
// (optional) receives the largest clipped |eigenvalue|.
Eigen::MatrixXcd correlation_sqrt(const Eigen::MatrixXcd& corr,
                                  double* clip_magnitude = nullptr);

// (1 + d/d0)^(-alpha)
double pathloss(double distance, const NetworkConfig& cfg);

ChannelSet sample_channels(const NetworkConfig& cfg, Rng& rng);

Dataset make_dataset(const NetworkConfig& cfg, int n_batches, int batch_size,
                     std::uint64_t seed, const std::string& split = "train");

// Fresh channel draws for every sample; shape and split are kept.
Dataset renew(const Dataset& dataset, Rng& rng);

void save_dataset(const std::string& path, const Dataset& dataset,
                  const NetworkConfig& cfg);
Dataset load_dataset(const std::string& path, NetworkConfig* cfg_out = nullptr);

}  // namespace cfnoma
