#include "cfnoma/gnn.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace cfnoma::gnn {

using ad::Value;

namespace {

Eigen::VectorXd flatten_channel(const Eigen::RowVectorXcd& h) {
  Eigen::VectorXd v(2 * h.size());
  for (int t = 0; t < h.size(); ++t) {
    v(2 * t) = h(t).real();
    v(2 * t + 1) = h(t).imag();
  }
  return v;
}

// data channels H_mm of BS m, users stacked
Eigen::VectorXd node_feature(const ChannelSet& ch, int m) {
  const int k_users = ch.users_per_bs();
  const int n_t = ch.num_antennas();
  Eigen::VectorXd v(2 * n_t * k_users);
  for (int k = 0; k < k_users; ++k)
    v.segment(2 * n_t * k, 2 * n_t) = flatten_channel(ch.h[m][m][k]);
  return v;
}

// interference channels H_mn from BS m to the users served by BS n
Eigen::VectorXd edge_feature(const ChannelSet& ch, int m, int n) {
  const int k_users = ch.users_per_bs();
  const int n_t = ch.num_antennas();
  Eigen::VectorXd v(2 * n_t * k_users);
  for (int k = 0; k < k_users; ++k)
    v.segment(2 * n_t * k, 2 * n_t) = flatten_channel(ch.h[n][m][k]);
  return v;
}

Value mlp3(Value x, Value w1, Value b1, Value w2, Value b2, Value w3, Value b3,
           bool tanh_out) {
  Value h1 = ad::tanh_(ad::matmul(w1, x) + b1);
  Value h2 = ad::tanh_(ad::matmul(w2, h1) + b2);
  Value out = ad::matmul(w3, h2) + b3;
  return tanh_out ? ad::tanh_(out) : out;
}

Eigen::MatrixXd xavier(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-limit, limit);
  return m;
}

}  // namespace

GnnModel GnnModel::init(const GnnConfig& cfg, int num_antennas,
                        int users_per_bs, std::uint64_t seed) {
  if (cfg.layers < 1) throw ConfigError("gnn: layers must be >= 1");
  if (cfg.embed_dim < 1) throw ConfigError("gnn: embed_dim must be >= 1");
  if (cfg.s_temp <= 0.0) throw ConfigError("gnn: s_temp must be > 0");
  GnnModel m;
  m.cfg = cfg;
  m.num_antennas = num_antennas;
  m.users_per_bs = users_per_bs;
  const int f = m.feature_dim();
  const int d = cfg.embed_dim;
  const int h = cfg.hidden;

  m.slots.in_proj_w = m.theta_shape.add("in_proj_w", d, f);
  m.slots.in_proj_b = m.theta_shape.add("in_proj_b", d, 1);
  for (int l = 0; l < cfg.layers; ++l) {
    const int enc_in = (l == 0) ? 2 * f : d + f;
    LayerSlots s;
    const std::string p = "l" + std::to_string(l) + "_";
    s.enc_w1 = m.theta_shape.add(p + "enc_w1", h, enc_in);
    s.enc_b1 = m.theta_shape.add(p + "enc_b1", h, 1);
    s.enc_w2 = m.theta_shape.add(p + "enc_w2", h, h);
    s.enc_b2 = m.theta_shape.add(p + "enc_b2", h, 1);
    s.enc_w3 = m.theta_shape.add(p + "enc_w3", d, h);
    s.enc_b3 = m.theta_shape.add(p + "enc_b3", d, 1);
    s.comb_w1 = m.theta_shape.add(p + "comb_w1", h, 2 * d);
    s.comb_b1 = m.theta_shape.add(p + "comb_b1", h, 1);
    s.comb_w2 = m.theta_shape.add(p + "comb_w2", h, h);
    s.comb_b2 = m.theta_shape.add(p + "comb_b2", h, 1);
    s.comb_w3 = m.theta_shape.add(p + "comb_w3", d, h);
    s.comb_b3 = m.theta_shape.add(p + "comb_b3", d, 1);
    m.slots.layer.push_back(s);
  }
  m.slots.head_w = m.theta_shape.add("head_w", m.head_out_dim(), f + d);
  m.slots.head_b = m.theta_shape.add("head_b", m.head_out_dim(), 1);

  m.alpha_shape.add("alpha_outer", cfg.layers, 1);
  m.alpha_shape.add("alpha_inner", d, cfg.layers - 1);

  // biases stay zero, weight matrices get Xavier draws
  Rng wrng = Rng(seed).substream(1);
  std::vector<ad::Mat> shaped =
      m.theta_shape.unflatten(Eigen::VectorXd::Zero(m.theta_shape.dim()));
  for (int slot = 0; slot < m.theta_shape.count(); ++slot) {
    const bool is_weight =
        m.theta_shape.name(slot).find("_w") != std::string::npos;
    if (is_weight)
      shaped[slot] = xavier(static_cast<int>(shaped[slot].rows()),
                            static_cast<int>(shaped[slot].cols()), wrng);
  }
  m.theta = m.theta_shape.flatten(shaped);

  // architecture logits start mildly positive: keep-probability ~ 0.73
  m.alpha = Eigen::VectorXd::Constant(m.alpha_shape.dim(), 1.0);
  return m;
}

NoisePack NoisePack::sample(int m_bs, int k_users, const GnnConfig& cfg,
                            NoiseMode mode, Rng& rng) {
  NoisePack np;
  const int l = cfg.layers;
  const int d = cfg.embed_dim;
  np.outer = Eigen::VectorXd::Zero(l);
  np.inner = Eigen::MatrixXd::Zero(d, std::max(0, l - 1));
  const int n_pairs = k_users * (k_users - 1) / 2;
  np.triple.assign(m_bs, std::vector<Eigen::Vector3d>(n_pairs,
                                                      Eigen::Vector3d::Zero()));
  if (mode == NoiseMode::kNone) return np;
  for (int i = 0; i < l; ++i) np.outer(i) = rng.logistic();
  for (int c = 0; c < np.inner.cols(); ++c)
    for (int r = 0; r < d; ++r) np.inner(r, c) = rng.logistic();
  for (int p = 0; p < n_pairs; ++p)
    for (int j = 0; j < 3; ++j) np.triple[0][p](j) = rng.gumbel_noise();
  for (int m = 1; m < m_bs; ++m) {
    if (mode == NoiseMode::kSharedAcrossBs) {
      np.triple[m] = np.triple[0];
    } else {
      for (int p = 0; p < n_pairs; ++p)
        for (int j = 0; j < 3; ++j) np.triple[m][p](j) = rng.gumbel_noise();
    }
  }
  return np;
}

long long fixed_gnn_bits(int m_bs, int layers, int embed_dim) {
  return static_cast<long long>(m_bs) * (m_bs - 1) * layers * embed_dim * 32;
}

double gumbel(double logit, Rng& rng, double s_temp) {
  return gumbel(logit, rng.logistic(), s_temp);
}

double gumbel(double logit, double logistic_noise, double s_temp) {
  if (s_temp <= 0.0) throw ConfigError("gumbel: s_temp must be > 0");
  return 1.0 / (1.0 + std::exp(-(logit + logistic_noise) / s_temp));
}

Eigen::Vector3d sic_softmax(double b_ik, double b_ki, double z_ik) {
  const double mx = std::max({b_ik, b_ki, z_ik});
  Eigen::Vector3d e{std::exp(b_ik - mx), std::exp(b_ki - mx),
                    std::exp(z_ik - mx)};
  return e / e.sum();
}

Eigen::MatrixXcd project_power(const Eigen::MatrixXcd& w, double p_max) {
  const double p = w.squaredNorm();
  if (p <= p_max) return w;
  return w * std::sqrt(p_max / p);
}

TracedForward build_forward(ad::Tape& tape, const ChannelSet& ch,
                            const GnnModel& model,
                            const std::vector<ad::Value>& theta_leaves,
                            const std::vector<ad::Value>& alpha_leaves,
                            Mode mode, SampleMode sample_mode,
                            const NoisePack& noise) {
  const int m_bs = ch.num_bs();
  const int k_users = ch.users_per_bs();
  const int n_t = ch.num_antennas();
  if (n_t != model.num_antennas || k_users != model.users_per_bs)
    throw ConfigError("gnn: channel shape does not match the model");
  const GnnConfig& cfg = model.cfg;
  const int d = cfg.embed_dim;
  const int f = model.feature_dim();
  const Slots& sl = model.slots;
  const double inv_temp = 1.0 / cfg.s_temp;
  const bool hard = sample_mode == SampleMode::kHard;

  TracedForward out;
  out.trace.outer_gates = Eigen::VectorXd::Ones(cfg.layers);
  out.trace.inner_masks.assign(cfg.layers, Eigen::VectorXd::Ones(d));

  // gates and masks, sampled once per pass (shared across BSs)
  std::vector<bool> executed(cfg.layers, true);
  std::vector<Value> gate_soft(cfg.layers);      // auto + soft only
  std::vector<Value> mask_soft(cfg.layers);      // auto + soft, layers >= 2
  std::vector<Eigen::VectorXd> mask_hard(cfg.layers, Eigen::VectorXd::Ones(d));
  if (mode == Mode::kAuto) {
    Value a_outer = alpha_leaves[0];
    Value a_inner = alpha_leaves[1];
    for (int l = 0; l < cfg.layers; ++l) {
      const double gate_arg = model.outer_logit(l) + noise.outer(l);
      if (hard) {
        const bool on = gate_arg > 0.0;
        executed[l] = on;
        out.trace.outer_gates(l) = on ? 1.0 : 0.0;
      } else {
        gate_soft[l] =
            ad::sigmoid((ad::entry(a_outer, l, 0) + noise.outer(l)) * inv_temp);
        out.trace.outer_gates(l) = gate_soft[l].scalar();
        executed[l] = out.trace.outer_gates(l) > 0.5;
      }
      if (l >= 1) {
        if (hard) {
          for (int j = 0; j < d; ++j)
            mask_hard[l](j) =
                (model.inner_logit(l, j) + noise.inner(j, l - 1)) > 0.0 ? 1.0
                                                                        : 0.0;
          out.trace.inner_masks[l] = mask_hard[l];
        } else {
          Value col = ad::segment(ad::reshape(a_inner, d * (cfg.layers - 1), 1),
                                  (l - 1) * d, d);
          Value noise_col = tape.constant(noise.inner.col(l - 1));
          mask_soft[l] = ad::sigmoid((col + noise_col) * inv_temp);
          out.trace.inner_masks[l] =
              Eigen::Map<const Eigen::VectorXd>(mask_soft[l].mat().data(), d);
        }
      }
    }
  }

  // constant features
  std::vector<Value> feat(m_bs);
  std::vector<std::vector<Value>> efeat(m_bs, std::vector<Value>(m_bs));
  for (int m = 0; m < m_bs; ++m) {
    feat[m] = tape.constant(node_feature(ch, m));
    for (int n = 0; n < m_bs; ++n)
      if (n != m) efeat[m][n] = tape.constant(edge_feature(ch, m, n));
  }

  // X^(0): learned input projection of the node feature
  std::vector<Value> x(m_bs);
  for (int m = 0; m < m_bs; ++m)
    x[m] = ad::tanh_(ad::matmul(theta_leaves[sl.in_proj_w], feat[m]) +
                     theta_leaves[sl.in_proj_b]);

  const long long edges = static_cast<long long>(m_bs) * (m_bs - 1);
  for (int l = 0; l < cfg.layers; ++l) {
    const bool run_layer =
        (mode == Mode::kFixed) || !hard || executed[l];
    if (!run_layer) continue;  // hard skip: no messages, no bits, X unchanged
    const LayerSlots& ls = sl.layer[l];
    std::vector<Value> x_new(m_bs);
    for (int m = 0; m < m_bs; ++m) {
      // inbound messages from every neighbour n -> m, computed on X^(l-1)
      Value agg;
      if (m_bs > 1) {
        bool first = true;
        for (int n = 0; n < m_bs; ++n) {
          if (n == m) continue;
          Value in = ad::vstack({l == 0 ? feat[n] : x[n], efeat[n][m]});
          Value msg = mlp3(in, theta_leaves[ls.enc_w1], theta_leaves[ls.enc_b1],
                           theta_leaves[ls.enc_w2], theta_leaves[ls.enc_b2],
                           theta_leaves[ls.enc_w3], theta_leaves[ls.enc_b3],
                           false);
          if (mode == Mode::kAuto && l >= 1) {
            msg = hard ? ad::mul(msg, tape.constant(mask_hard[l]))
                       : ad::mul(msg, mask_soft[l]);
          }
          agg = first ? msg : agg + msg;
          first = false;
        }
        agg = ad::scale(agg, 1.0 / (m_bs - 1));
      } else {
        agg = tape.constant(Eigen::VectorXd::Zero(d));
      }
      Value psi = mlp3(ad::vstack({x[m], agg}), theta_leaves[ls.comb_w1],
                       theta_leaves[ls.comb_b1], theta_leaves[ls.comb_w2],
                       theta_leaves[ls.comb_b2], theta_leaves[ls.comb_w3],
                       theta_leaves[ls.comb_b3], true);
      if (mode == Mode::kAuto && !hard) {
        x_new[m] = ad::scalar_mul(psi, gate_soft[l]) +
                   ad::scalar_mul(x[m], 1.0 - gate_soft[l]);
      } else {
        x_new[m] = psi;
      }
    }
    x = std::move(x_new);
    if (executed[l]) {
      int active = d;
      if (mode == Mode::kAuto && l >= 1) {
        active = 0;
        for (int j = 0; j < d; ++j)
          if (out.trace.inner_masks[l](j) > 0.5) ++active;
      }
      out.trace.bits += edges * active * 32;
      ++out.trace.active_layers;
    }
  }

  // output head + constraint transforms
  const double p_max = ch.p_max;
  const int ntk = n_t * k_users;
  out.decision.beta.assign(
      m_bs, std::vector<std::vector<Value>>(k_users,
                                            std::vector<Value>(k_users)));
  out.decision.zeta = out.decision.beta;
  for (int m = 0; m < m_bs; ++m) {
    Value raw = ad::matmul(theta_leaves[sl.head_w], ad::vstack({feat[m], x[m]})) +
                theta_leaves[sl.head_b];
    Value w_re = ad::scale(ad::reshape(ad::segment(raw, 0, ntk), n_t, k_users),
                           cfg.w_scale);
    Value w_im = ad::scale(
        ad::reshape(ad::segment(raw, ntk, ntk), n_t, k_users), cfg.w_scale);
    // project onto the power ball iff exceeded (Frobenius rescale)
    Value power = ad::sum(ad::mul(w_re, w_re)) + ad::sum(ad::mul(w_im, w_im));
    if (power.scalar() > p_max) {
      Value factor = ad::div(tape.constant(std::sqrt(p_max)), ad::sqrt_(power));
      w_re = ad::scalar_mul(w_re, factor);
      w_im = ad::scalar_mul(w_im, factor);
    }
    out.decision.w_re.push_back(w_re);
    out.decision.w_im.push_back(w_im);

    // SIC triples per unordered pair
    int pair = 0;
    for (int i = 0; i < k_users; ++i) {
      out.decision.beta[m][i][i] = tape.constant(0.0);
      out.decision.zeta[m][i][i] = tape.constant(0.0);
    }
    const int ob = 2 * ntk;
    const int oz = 2 * ntk + k_users * k_users;
    for (int i = 0; i < k_users; ++i) {
      for (int k = i + 1; k < k_users; ++k, ++pair) {
        Value l_ik = ad::entry(raw, ob + i * k_users + k, 0);
        Value l_ki = ad::entry(raw, ob + k * k_users + i, 0);
        Value l_z = ad::entry(raw, oz + i * k_users + k, 0);
        const Eigen::Vector3d& g = noise.triple[m][pair];
        if (hard) {
          const Eigen::Vector3d perturbed{l_ik.scalar() + g(0),
                                          l_ki.scalar() + g(1),
                                          l_z.scalar() + g(2)};
          int best = 0;
          for (int j = 1; j < 3; ++j)
            if (perturbed(j) > perturbed(best)) best = j;
          out.decision.beta[m][i][k] = tape.constant(best == 0 ? 1.0 : 0.0);
          out.decision.beta[m][k][i] = tape.constant(best == 1 ? 1.0 : 0.0);
          out.decision.zeta[m][i][k] = tape.constant(best == 2 ? 1.0 : 0.0);
          out.decision.zeta[m][k][i] = out.decision.zeta[m][i][k];
        } else {
          Value v = ad::vstack({(l_ik + g(0)) * inv_temp,
                                (l_ki + g(1)) * inv_temp,
                                (l_z + g(2)) * inv_temp});
          Value y = ad::softmax(v);
          out.decision.beta[m][i][k] = ad::entry(y, 0, 0);
          out.decision.beta[m][k][i] = ad::entry(y, 1, 0);
          out.decision.zeta[m][i][k] = ad::entry(y, 2, 0);
          out.decision.zeta[m][k][i] = out.decision.zeta[m][i][k];
        }
      }
    }
  }
  return out;
}

ForwardResult forward(const ChannelSet& ch, const GnnModel& model, Mode mode,
                      SampleMode sample_mode, NoiseMode noise_mode, Rng& rng) {
  ad::Tape tape;
  NoisePack noise = NoisePack::sample(ch.num_bs(), ch.users_per_bs(), model.cfg,
                                      noise_mode, rng);
  std::vector<Value> theta_leaves = model.theta_shape.bind(tape, model.theta);
  std::vector<Value> alpha_leaves = model.alpha_shape.bind(tape, model.alpha);
  TracedForward traced = build_forward(tape, ch, model, theta_leaves,
                                       alpha_leaves, mode, sample_mode, noise);
  ForwardResult res;
  res.decision = rates_ad::extract_decision(traced.decision);
  res.trace = traced.trace;
  return res;
}

void GnnModel::save(const std::string& path) const {
  nlohmann::json j;
  j["format"] = "cfnoma-gnn-checkpoint-v1";
  j["layers"] = cfg.layers;
  j["embed_dim"] = cfg.embed_dim;
  j["hidden"] = cfg.hidden;
  j["s_temp"] = cfg.s_temp;
  j["w_scale"] = cfg.w_scale;
  j["num_antennas"] = num_antennas;
  j["users_per_bs"] = users_per_bs;
  j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  j["alpha"] = std::vector<double>(alpha.data(), alpha.data() + alpha.size());
  j["config_hash"] = config_hash();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump();
}

GnnModel GnnModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  GnnConfig cfg;
  cfg.layers = j.at("layers").get<int>();
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.s_temp = j.at("s_temp").get<double>();
  cfg.w_scale = j.at("w_scale").get<double>();
  GnnModel m = GnnModel::init(cfg, j.at("num_antennas").get<int>(),
                              j.at("users_per_bs").get<int>(), 0);
  const auto th = j.at("theta").get<std::vector<double>>();
  const auto al = j.at("alpha").get<std::vector<double>>();
  if (static_cast<int>(th.size()) != m.theta.size() ||
      static_cast<int>(al.size()) != m.alpha.size())
    throw std::runtime_error("checkpoint does not match the model shape");
  m.theta = Eigen::Map<const Eigen::VectorXd>(th.data(), th.size());
  m.alpha = Eigen::Map<const Eigen::VectorXd>(al.data(), al.size());
  return m;
}

std::string GnnModel::config_hash() const {
  nlohmann::json j;
  j["layers"] = cfg.layers;
  j["embed_dim"] = cfg.embed_dim;
  j["hidden"] = cfg.hidden;
  j["s_temp"] = cfg.s_temp;
  j["w_scale"] = cfg.w_scale;
  j["num_antennas"] = num_antennas;
  j["users_per_bs"] = users_per_bs;
  const std::string dump = j.dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cfnoma::gnn
