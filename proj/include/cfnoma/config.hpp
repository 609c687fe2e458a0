#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace cfnoma {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Multi-cell network scenario. Power budget is derived from the SNR unless
// p_max is set explicitly; with all distances zero (the default geometry) the
// channels carry no path loss and the SNR is realized as
// P_max = K * 10^(snr_db/10) * sigma2 split across the K served users.
struct NetworkConfig {
  int num_bs = 3;         // M
  int users_per_bs = 6;   // K
  int num_antennas = 4;   // N_T
  double snr_db = 20.0;
  double sigma2 = 1.0;
  double p_max = 0.0;     // <= 0 means derive from snr_db
  double corr_data = 0.6;     // data-channel correlation, in [0, 1)
  double corr_interf = 0.5;   // interference-channel correlation, in [0, 1)
  double pathloss_exp = 3.0;
  double ref_distance = 1.0;  // d0
  double min_rate = 0.3;      // per-user minimum rate (bps/Hz)
  Eigen::MatrixXd distances;  // M x M BS->cell distances; empty means zeros

  double power_budget() const {
    if (p_max > 0.0) return p_max;
    return users_per_bs * std::pow(10.0, snr_db / 10.0) * sigma2;
  }

  Eigen::MatrixXd distance_matrix() const {
    if (distances.size() == 0) return Eigen::MatrixXd::Zero(num_bs, num_bs);
    return distances;
  }

  void validate() const {
    if (num_bs < 1) throw ConfigError("num_bs must be >= 1");
    if (users_per_bs < 1) throw ConfigError("users_per_bs must be >= 1");
    if (num_antennas < 1) throw ConfigError("num_antennas must be >= 1");
    if (sigma2 <= 0.0) throw ConfigError("sigma2 must be > 0");
    if (power_budget() <= 0.0) throw ConfigError("power budget must be > 0");
    if (corr_data < 0.0 || corr_data >= 1.0)
      throw ConfigError("corr_data must be in [0, 1)");
    if (corr_interf < 0.0 || corr_interf >= 1.0)
      throw ConfigError("corr_interf must be in [0, 1)");
    if (ref_distance <= 0.0) throw ConfigError("ref_distance must be > 0");
    if (distances.size() != 0 &&
        (distances.rows() != num_bs || distances.cols() != num_bs))
      throw ConfigError("distances must be M x M");
    if (distances.size() != 0 && (distances.array() < 0.0).any())
      throw ConfigError("distances must be nonnegative");
  }
};

nlohmann::json to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j);

// BS positions on a hexagonal grid with the given inter-site distance;
// returns the M x M matrix of BS->cell distances (cells located at their BS).
Eigen::MatrixXd hex_layout_distances(int num_bs, double site_distance);

}  // namespace cfnoma
