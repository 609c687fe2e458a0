#include "cfnoma/rates_traced.hpp"

namespace cfnoma::rates_ad {

using ad::Value;

namespace {

// |h_{mi}^{n} w_u^{n}|^2 for all u at once: 1 x K row of beam powers
Value beam_powers_row(ad::Tape& tape, const ChannelSet& ch,
                      const TracedDecision& dec, int m, int i, int n) {
  const Eigen::RowVectorXcd& h = ch.h[m][n][i];
  Eigen::MatrixXd hr = h.real();
  Eigen::MatrixXd hi = h.imag();
  Value chr = tape.constant(hr);
  Value chi = tape.constant(hi);
  Value re = ad::matmul(chr, dec.w_re[n]) - ad::matmul(chi, dec.w_im[n]);
  Value im = ad::matmul(chr, dec.w_im[n]) + ad::matmul(chi, dec.w_re[n]);
  return ad::cabs2(re, im);
}

}  // namespace

TracedRates build_rates(ad::Tape& tape, const TracedDecision& dec,
                        const ChannelSet& ch, double sigma2) {
  const int m_bs = ch.num_bs();
  const int k_users = ch.users_per_bs();

  // q[m][i][n](0, u) = |h_{mi}^{n} w_u^{n}|^2
  std::vector<std::vector<std::vector<Value>>> q(
      m_bs, std::vector<std::vector<Value>>(k_users));
  for (int m = 0; m < m_bs; ++m)
    for (int i = 0; i < k_users; ++i) {
      q[m][i].reserve(m_bs);
      for (int n = 0; n < m_bs; ++n)
        q[m][i].push_back(beam_powers_row(tape, ch, dec, m, i, n));
    }

  // inter-cell interference per (m, i)
  std::vector<std::vector<Value>> ici(m_bs, std::vector<Value>(k_users));
  for (int m = 0; m < m_bs; ++m)
    for (int i = 0; i < k_users; ++i) {
      Value acc = tape.constant(0.0);
      for (int n = 0; n < m_bs; ++n) {
        if (n == m) continue;
        acc = acc + ad::sum(q[m][i][n]);
      }
      ici[m][i] = acc;
    }

  TracedRates out;
  out.effective.assign(m_bs, std::vector<Value>(k_users));
  Value total = tape.constant(0.0);
  for (int m = 0; m < m_bs; ++m) {
    // decode rates r(i, k)
    std::vector<std::vector<Value>> r(k_users, std::vector<Value>(k_users));
    for (int i = 0; i < k_users; ++i) {
      for (int k = 0; k < k_users; ++k) {
        Value intf = tape.constant(0.0);
        for (int u = 0; u < k_users; ++u) {
          if (u == k) continue;
          Value p = ad::entry(q[m][i][m], 0, u);
          Value coeff;
          if (i == k) {
            coeff = 1.0 - dec.beta[m][k][u];
          } else if (u < k) {
            coeff = 1.0 - dec.beta[m][i][u] + dec.beta[m][i][u] * dec.beta[m][u][k];
          } else {
            coeff = 1.0 - dec.beta[m][i][u] * dec.beta[m][k][u];
          }
          intf = intf + coeff * p;
        }
        intf = intf + ici[m][i];
        Value signal = ad::entry(q[m][i][m], 0, k);
        r[i][k] = ad::log2_(ad::div(signal, intf + sigma2) + 1.0);
      }
    }
    for (int k = 0; k < k_users; ++k) {
      std::vector<Value> terms;
      terms.reserve(k_users);
      for (int i = 0; i < k_users; ++i) {
        if (i == k) {
          terms.push_back(r[k][k]);
        } else {
          terms.push_back(dec.beta[m][i][k] * r[i][k] +
                          (1.0 - dec.beta[m][i][k]) * r[k][k]);
        }
      }
      out.effective[m][k] = ad::min_reduce(ad::vstack(terms));
      total = total + out.effective[m][k];
    }
  }
  out.sum_rate = total;
  return out;
}

ad::Value build_training_loss(ad::Tape& tape, const TracedDecision& dec,
                              const ChannelSet& ch, double sigma2,
                              const LossOptions& opt) {
  TracedRates rates = build_rates(tape, dec, ch, sigma2);
  Value loss = ad::neg(rates.sum_rate);
  if (opt.penalty_weight > 0.0) {
    Value penalty = tape.constant(0.0);
    for (const auto& cell : rates.effective)
      for (const Value& r : cell) {
        Value gap = ad::relu(opt.min_rate - r);
        penalty = penalty + gap * gap;
      }
    loss = loss + opt.penalty_weight * penalty;
  }
  return loss;
}

TracedDecision trace_decision(ad::Tape& tape, const SchedulingDecision& d) {
  TracedDecision out;
  const int m_bs = d.num_bs();
  for (int m = 0; m < m_bs; ++m) {
    out.w_re.push_back(tape.leaf(d.w[m].real()));
    out.w_im.push_back(tape.leaf(d.w[m].imag()));
  }
  const int k_users = m_bs > 0 ? static_cast<int>(d.beta[0].rows()) : 0;
  out.beta.assign(m_bs, std::vector<std::vector<Value>>(
                            k_users, std::vector<Value>(k_users)));
  out.zeta = out.beta;
  for (int m = 0; m < m_bs; ++m)
    for (int i = 0; i < k_users; ++i)
      for (int k = 0; k < k_users; ++k) {
        if (i == k) {
          out.beta[m][i][i] = tape.constant(0.0);
          out.zeta[m][i][i] = tape.constant(0.0);
          continue;
        }
        out.beta[m][i][k] = tape.leaf(ad::Mat::Constant(1, 1, d.beta[m](i, k)));
        out.zeta[m][i][k] =
            tape.constant(ad::Mat::Constant(1, 1, d.zeta[m](i, k)));
      }
  return out;
}

SchedulingDecision extract_decision(const TracedDecision& dec) {
  SchedulingDecision d;
  const int m_bs = dec.num_bs();
  for (int m = 0; m < m_bs; ++m) {
    const ad::Mat& re = dec.w_re[m].mat();
    const ad::Mat& im = dec.w_im[m].mat();
    Eigen::MatrixXcd w(re.rows(), re.cols());
    w.real() = re;
    w.imag() = im;
    d.w.push_back(w);
    const int k_users = static_cast<int>(dec.beta[m].size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k_users, k_users);
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(k_users, k_users);
    for (int i = 0; i < k_users; ++i)
      for (int k = 0; k < k_users; ++k) {
        if (i == k) continue;
        if (dec.beta[m][i][k].valid()) b(i, k) = dec.beta[m][i][k].scalar();
        if (dec.zeta[m][i][k].valid()) z(i, k) = dec.zeta[m][i][k].scalar();
      }
    d.beta.push_back(b);
    d.zeta.push_back(z);
  }
  return d;
}

}  // namespace cfnoma::rates_ad
