#include "cfnoma/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace cfnoma {

Eigen::MatrixXcd correlation_matrix(int k_users, double corr, double phi) {
  if (corr < 0.0 || corr >= 1.0)
    throw ConfigError("correlation must be in [0, 1)");
  const std::complex<double> base = corr * std::exp(std::complex<double>(0.0, phi));
  Eigen::MatrixXcd r(k_users, k_users);
  for (int i = 0; i < k_users; ++i) {
    for (int k = i; k < k_users; ++k) {
      // pow with integer exponent; (.)^0 = 1 covers the diagonal
      std::complex<double> v = 1.0;
      for (int p = 0; p < k - i; ++p) v *= base;
      r(i, k) = v;
      r(k, i) = std::conj(v);
    }
  }
  return r;
}

Eigen::MatrixXcd correlation_matrix(int k_users, double corr, Rng& rng) {
  return correlation_matrix(k_users, corr, rng.uniform(0.0, 2.0 * M_PI));
}

Eigen::MatrixXcd correlation_sqrt(const Eigen::MatrixXcd& corr,
                                  double* clip_magnitude) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(corr);
  Eigen::VectorXd ev = es.eigenvalues();
  double clipped = 0.0;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < 0.0) {
      clipped = std::max(clipped, -ev(i));
      ev(i) = 0.0;
    }
  }
  if (clip_magnitude) *clip_magnitude = clipped;
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
         es.eigenvectors().adjoint();
}

double pathloss(double distance, const NetworkConfig& cfg) {
  if (distance < 0.0) throw ConfigError("distance must be nonnegative");
  return std::pow(1.0 + distance / cfg.ref_distance, -cfg.pathloss_exp);
}

ChannelSet sample_channels(const NetworkConfig& cfg, Rng& rng) {
  cfg.validate();
  const int m_bs = cfg.num_bs;
  const int k_users = cfg.users_per_bs;
  const int n_t = cfg.num_antennas;
  const Eigen::MatrixXd dist = cfg.distance_matrix();

  ChannelSet cs;
  cs.sigma2 = cfg.sigma2;
  cs.p_max = cfg.power_budget();
  cs.h.assign(m_bs, std::vector<std::vector<Eigen::RowVectorXcd>>(
                        m_bs, std::vector<Eigen::RowVectorXcd>(k_users)));

  for (int m = 0; m < m_bs; ++m) {      // serving cell
    for (int n = 0; n < m_bs; ++n) {    // transmitting BS
      const double corr = (n == m) ? cfg.corr_data : cfg.corr_interf;
      const Eigen::MatrixXcd sqrt_r =
          correlation_sqrt(correlation_matrix(k_users, corr, rng));
      Eigen::MatrixXcd raw(n_t, k_users);
      for (int t = 0; t < n_t; ++t)
        for (int k = 0; k < k_users; ++k) raw(t, k) = rng.cnormal();
      const double gain = std::sqrt(pathloss(dist(n, m), cfg));
      const Eigen::MatrixXcd ch = gain * (raw * sqrt_r);  // N_T x K
      for (int k = 0; k < k_users; ++k)
        cs.h[m][n][k] = ch.col(k).transpose();
    }
    // ascending data-channel gain; the permutation follows the user across
    // every transmitting BS
    std::vector<int> order(k_users);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> gains(k_users);
    for (int k = 0; k < k_users; ++k) gains[k] = cs.h[m][m][k].norm();
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return gains[a] < gains[b]; });
    for (int n = 0; n < m_bs; ++n) {
      std::vector<Eigen::RowVectorXcd> tmp(k_users);
      for (int k = 0; k < k_users; ++k) tmp[k] = cs.h[m][n][order[k]];
      cs.h[m][n] = std::move(tmp);
    }
  }
  return cs;
}

Dataset make_dataset(const NetworkConfig& cfg, int n_batches, int batch_size,
                     std::uint64_t seed, const std::string& split) {
  Dataset ds;
  ds.split = split;
  ds.seed = seed;
  ds.batches.resize(n_batches);
  Rng base(seed);
  for (int b = 0; b < n_batches; ++b) {
    ds.batches[b].reserve(batch_size);
    for (int s = 0; s < batch_size; ++s) {
      Rng sub = base.substream(static_cast<std::uint64_t>(b) * batch_size + s);
      ds.batches[b].push_back(sample_channels(cfg, sub));
    }
  }
  return ds;
}

Dataset renew(const Dataset& dataset, Rng& rng) {
  Dataset out;
  out.split = dataset.split;
  out.seed = rng.next_u64();
  out.batches.resize(dataset.num_batches());
  Rng base(out.seed);
  // shapes are taken from the existing samples, draws are all fresh
  for (int b = 0; b < dataset.num_batches(); ++b) {
    const auto& batch = dataset.batches[b];
    out.batches[b].reserve(batch.size());
    for (std::size_t s = 0; s < batch.size(); ++s) {
      NetworkConfig cfg;
      cfg.num_bs = batch[s].num_bs();
      cfg.users_per_bs = batch[s].users_per_bs();
      cfg.num_antennas = batch[s].num_antennas();
      cfg.sigma2 = batch[s].sigma2;
      cfg.p_max = batch[s].p_max;
      Rng sub = base.substream(static_cast<std::uint64_t>(b) * batch.size() + s);
      out.batches[b].push_back(sample_channels(cfg, sub));
    }
  }
  return out;
}

namespace {

nlohmann::json channel_to_json(const ChannelSet& cs) {
  nlohmann::json j;
  j["sigma2"] = cs.sigma2;
  j["p_max"] = cs.p_max;
  auto& arr = j["h"] = nlohmann::json::array();
  for (int m = 0; m < cs.num_bs(); ++m) {
    nlohmann::json jm = nlohmann::json::array();
    for (int n = 0; n < cs.num_bs(); ++n) {
      nlohmann::json jn = nlohmann::json::array();
      for (int k = 0; k < cs.users_per_bs(); ++k) {
        std::vector<double> flat;
        flat.reserve(2 * cs.num_antennas());
        for (int t = 0; t < cs.num_antennas(); ++t) {
          flat.push_back(cs.h[m][n][k](t).real());
          flat.push_back(cs.h[m][n][k](t).imag());
        }
        jn.push_back(flat);
      }
      jm.push_back(jn);
    }
    arr.push_back(jm);
  }
  return j;
}

ChannelSet channel_from_json(const nlohmann::json& j) {
  ChannelSet cs;
  cs.sigma2 = j.at("sigma2").get<double>();
  cs.p_max = j.at("p_max").get<double>();
  const auto& arr = j.at("h");
  const int m_bs = static_cast<int>(arr.size());
  cs.h.resize(m_bs);
  for (int m = 0; m < m_bs; ++m) {
    cs.h[m].resize(m_bs);
    for (int n = 0; n < m_bs; ++n) {
      const auto& jn = arr[m][n];
      cs.h[m][n].resize(jn.size());
      for (std::size_t k = 0; k < jn.size(); ++k) {
        const auto flat = jn[k].get<std::vector<double>>();
        Eigen::RowVectorXcd row(flat.size() / 2);
        for (std::size_t t = 0; t + 1 < flat.size(); t += 2)
          row(static_cast<int>(t / 2)) = {flat[t], flat[t + 1]};
        cs.h[m][n][k] = row;
      }
    }
  }
  return cs;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& dataset,
                  const NetworkConfig& cfg) {
  nlohmann::json j;
  j["header"] = {{"M", cfg.num_bs},       {"K", cfg.users_per_bs},
                 {"N_T", cfg.num_antennas}, {"seed", dataset.seed},
                 {"corr_D", cfg.corr_data}, {"corr_I", cfg.corr_interf},
                 {"sigma2", cfg.sigma2},    {"p_max", cfg.power_budget()},
                 {"split", dataset.split}};
  auto& batches = j["batches"] = nlohmann::json::array();
  for (const auto& batch : dataset.batches) {
    nlohmann::json jb = nlohmann::json::array();
    for (const auto& cs : batch) jb.push_back(channel_to_json(cs));
    batches.push_back(jb);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  out << j.dump();
}

Dataset load_dataset(const std::string& path, NetworkConfig* cfg_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset: " + path);
  nlohmann::json j;
  in >> j;
  Dataset ds;
  const auto& hdr = j.at("header");
  ds.seed = hdr.at("seed").get<std::uint64_t>();
  ds.split = hdr.value("split", "train");
  if (cfg_out) {
    cfg_out->num_bs = hdr.at("M").get<int>();
    cfg_out->users_per_bs = hdr.at("K").get<int>();
    cfg_out->num_antennas = hdr.at("N_T").get<int>();
    cfg_out->corr_data = hdr.at("corr_D").get<double>();
    cfg_out->corr_interf = hdr.at("corr_I").get<double>();
    cfg_out->sigma2 = hdr.at("sigma2").get<double>();
    cfg_out->p_max = hdr.at("p_max").get<double>();
  }
  for (const auto& jb : j.at("batches")) {
    std::vector<ChannelSet> batch;
    for (const auto& jc : jb) batch.push_back(channel_from_json(jc));
    ds.batches.push_back(std::move(batch));
  }
  return ds;
}

}  // namespace cfnoma
