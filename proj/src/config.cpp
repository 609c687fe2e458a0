#include "cfnoma/config.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cfnoma {

nlohmann::json to_json(const NetworkConfig& cfg) {
  nlohmann::json j;
  j["num_bs"] = cfg.num_bs;
  j["users_per_bs"] = cfg.users_per_bs;
  j["num_antennas"] = cfg.num_antennas;
  j["snr_db"] = cfg.snr_db;
  j["sigma2"] = cfg.sigma2;
  j["p_max"] = cfg.p_max;
  j["corr_data"] = cfg.corr_data;
  j["corr_interf"] = cfg.corr_interf;
  j["pathloss_exp"] = cfg.pathloss_exp;
  j["ref_distance"] = cfg.ref_distance;
  j["min_rate"] = cfg.min_rate;
  if (cfg.distances.size() != 0) {
    auto& d = j["distances"] = nlohmann::json::array();
    for (int r = 0; r < cfg.distances.rows(); ++r) {
      std::vector<double> row(cfg.distances.cols());
      for (int c = 0; c < cfg.distances.cols(); ++c) row[c] = cfg.distances(r, c);
      d.push_back(row);
    }
  }
  return j;
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig cfg;
  cfg.num_bs = j.value("num_bs", cfg.num_bs);
  cfg.users_per_bs = j.value("users_per_bs", cfg.users_per_bs);
  cfg.num_antennas = j.value("num_antennas", cfg.num_antennas);
  cfg.snr_db = j.value("snr_db", cfg.snr_db);
  cfg.sigma2 = j.value("sigma2", cfg.sigma2);
  cfg.p_max = j.value("p_max", cfg.p_max);
  cfg.corr_data = j.value("corr_data", cfg.corr_data);
  cfg.corr_interf = j.value("corr_interf", cfg.corr_interf);
  cfg.pathloss_exp = j.value("pathloss_exp", cfg.pathloss_exp);
  cfg.ref_distance = j.value("ref_distance", cfg.ref_distance);
  cfg.min_rate = j.value("min_rate", cfg.min_rate);
  if (j.contains("distances")) {
    const auto& d = j.at("distances");
    cfg.distances.resize(d.size(), d.empty() ? 0 : d[0].size());
    for (std::size_t r = 0; r < d.size(); ++r)
      for (std::size_t c = 0; c < d[r].size(); ++c)
        cfg.distances(static_cast<int>(r), static_cast<int>(c)) = d[r][c];
  }
  cfg.validate();
  return cfg;
}

Eigen::MatrixXd hex_layout_distances(int num_bs, double site_distance) {
  // hex lattice points sorted outward from the center; the first ring sits
  // at exactly one site distance
  struct P {
    double x, y, r;
  };
  std::vector<P> lattice;
  const int span = static_cast<int>(std::ceil(std::sqrt(num_bs))) + 2;
  for (int a = -span; a <= span; ++a)
    for (int b = -span; b <= span; ++b) {
      const double x = site_distance * (a + 0.5 * b);
      const double y = site_distance * (std::sqrt(3.0) / 2.0 * b);
      lattice.push_back({x, y, std::hypot(x, y)});
    }
  std::sort(lattice.begin(), lattice.end(), [](const P& u, const P& v) {
    if (u.r != v.r) return u.r < v.r;
    const double au = std::atan2(u.y, u.x), av = std::atan2(v.y, v.x);
    return au < av;
  });
  Eigen::MatrixXd d(num_bs, num_bs);
  for (int a = 0; a < num_bs; ++a)
    for (int b = 0; b < num_bs; ++b)
      d(a, b) = std::hypot(lattice[a].x - lattice[b].x,
                           lattice[a].y - lattice[b].y);
  return d;
}

}  // namespace cfnoma
