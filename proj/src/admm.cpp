#include "cfnoma/admm.hpp"

#include "cfnoma/gnn.hpp"

#include <cmath>
#include <fstream>

namespace cfnoma::admm {

namespace {

constexpr double kLn2 = M_LN2;

inline int offdiag_index(int i, int k, int k_users) {
  return i * (k_users - 1) + (k < i ? k : k - 1);
}

// Exact projection of one (b_ik, b_ki) pair onto {a, b >= 0, a + b <= 1}.
inline void project_pair(double& a, double& b) {
  double qa = std::max(a, 0.0);
  double qb = std::max(b, 0.0);
  if (qa + qb <= 1.0) {
    a = std::min(qa, 1.0);
    b = std::min(qb, 1.0);
    return;
  }
  const double pa = std::clamp((a - b + 1.0) / 2.0, 0.0, 1.0);
  a = pa;
  b = 1.0 - pa;
}

// gradient pieces of |h w|^2 and Re(c h w) w.r.t. (Re w, Im w)
inline void add_p_grad(const Eigen::RowVectorXcd& h, std::complex<double> z,
                       double factor, Eigen::Ref<Eigen::VectorXd> gwr,
                       Eigen::Ref<Eigen::VectorXd> gwi) {
  for (int t = 0; t < h.size(); ++t) {
    const std::complex<double> zh = std::conj(z) * h(t);
    gwr(t) += factor * 2.0 * zh.real();
    gwi(t) += factor * -2.0 * zh.imag();
  }
}

inline void add_rez_grad(const Eigen::RowVectorXcd& h, std::complex<double> c,
                         double factor, Eigen::Ref<Eigen::VectorXd> gwr,
                         Eigen::Ref<Eigen::VectorXd> gwi) {
  for (int t = 0; t < h.size(); ++t) {
    const std::complex<double> ch = c * h(t);
    gwr(t) += factor * ch.real();
    gwi(t) += factor * -ch.imag();
  }
}

struct CellGeometry {
  int m_bs, k_users, n_t;
  double sigma2, p_max;
};

CellGeometry geometry(const ChannelSet& ch, const NetworkConfig& cfg) {
  return {ch.num_bs(), ch.users_per_bs(), ch.num_antennas(), cfg.sigma2,
          ch.p_max > 0.0 ? ch.p_max : cfg.power_budget()};
}

// intra-cell products for BS m: z(i, k) = h_mi^m w_k, p = |z|^2
void intra_products(const ChannelSet& ch, const Eigen::MatrixXcd& w, int m,
                    Eigen::MatrixXcd& z, Eigen::MatrixXd& p) {
  const int k_users = ch.users_per_bs();
  z.resize(k_users, k_users);
  p.resize(k_users, k_users);
  for (int i = 0; i < k_users; ++i)
    for (int k = 0; k < k_users; ++k) {
      z(i, k) = rates::hw(ch.h[m][m][i], w.col(k));
      p(i, k) = std::norm(z(i, k));
    }
}

// interference BS m causes user k of cell n: sum_u |h_{nk}^m w_u^m|^2
double caused_interference(const ChannelSet& ch, const Eigen::MatrixXcd& w,
                           int m, int n, int k) {
  double s = 0.0;
  for (int u = 0; u < ch.users_per_bs(); ++u)
    s += std::norm(rates::hw(ch.h[n][m][k], w.col(u)));
  return s;
}

}  // namespace

void mmse_pair(double signal, std::complex<double> z, double intf,
               double sigma2, double* a, std::complex<double>* c) {
  const double denom = signal + intf + sigma2;
  *a = denom / (intf + sigma2);
  *c = std::conj(z) / denom;
}

double rate_bracket(double a, std::complex<double> c, std::complex<double> z,
                    double signal, double intf, double sigma2) {
  const double mse = 1.0 - 2.0 * (c * z).real() +
                     std::norm(c) * (signal + intf + sigma2);
  return std::log2(a) - a * mse / kLn2 + 1.0 / kLn2;
}

double convex_intf(const Eigen::MatrixXd& beta_c,
                   const Eigen::VectorXd& powers, int i, int k, double ici) {
  const int k_users = static_cast<int>(powers.size());
  double total = 0.0;
  if (i == k) {
    for (int u = 0; u < k_users; ++u) {
      if (u == k) continue;
      total += beta_c(k, u) * powers(u);
    }
  } else {
    for (int u = 0; u < k_users; ++u) {
      if (u == k) continue;
      if (u < k)
        total += std::max(beta_c(i, u), 1.0 - beta_c(u, k)) * powers(u);
      else
        total += std::max(beta_c(i, u), beta_c(k, u)) * powers(u);
    }
  }
  return total + ici;
}

Eigen::VectorXd update_global(const Eigen::VectorXd& xi_m,
                              const Eigen::VectorXd& xi_n,
                              const Eigen::VectorXd& nu_m,
                              const Eigen::VectorXd& nu_n, double rho) {
  return 0.5 * (xi_m + xi_n + rho * (nu_m + nu_n));
}

void update_duals(const std::vector<AdmmLocalState>& locals,
                  AdmmSharedState& shared) {
  const int m_bs = static_cast<int>(locals.size());
  const double inv_rho = 1.0 / shared.rho;
  for (int m = 0; m < m_bs; ++m) {
    const AdmmLocalState& st = locals[m];
    const int k_users = static_cast<int>(st.beta.rows());
    for (int i = 0; i < k_users; ++i)
      for (int k = 0; k < k_users; ++k) {
        if (i == k) continue;
        shared.lambda[m](i, k) +=
            inv_rho * (st.beta(i, k) + st.beta_c(i, k) - 1.0);
        shared.lambda_t[m](i, k) += inv_rho * st.beta(i, k) * st.beta_c(i, k);
      }
    for (int n = 0; n < m_bs; ++n) {
      if (n == m) continue;
      shared.nu_out[m].row(n) +=
          inv_rho * (st.xi_out.row(n) - shared.xi_hat[m].row(n));
      shared.nu_in[m].row(n) +=
          inv_rho * (st.xi_in.row(n) - shared.xi_hat[n].row(m));
    }
  }
}

Eigen::VectorXd pgd_minimize(const PgdProblem& p, Eigen::VectorXd x,
                             int max_steps, double tol) {
  Eigen::VectorXd grad(x.size());
  double step = 1e-2;
  double f = p.eval(x, &grad);
  for (int it = 0; it < max_steps; ++it) {
    bool accepted = false;
    Eigen::VectorXd trial;
    double f_trial = 0.0;
    for (int bt = 0; bt < 40; ++bt) {
      trial = x - step * grad;
      p.project(trial);
      f_trial = p.eval(trial, nullptr);
      const double move2 = (trial - x).squaredNorm();
      if (f_trial <= f - 1e-4 * move2 / step) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step < 1e-14) break;
    }
    if (!accepted) break;
    const double move = (trial - x).norm();
    x = std::move(trial);
    f = p.eval(x, &grad);
    step *= 1.3;
    if (move < tol * (1.0 + x.norm())) break;
  }
  return x;
}

namespace {

// ---------- shared bracket machinery ----------

// all quantities BS m needs to score constraint (i,k) at fixed (a, c)
struct BracketCtx {
  Eigen::MatrixXcd z;  // h_mi w_k
  Eigen::MatrixXd p;   // |z|^2
  Eigen::VectorXd ici; // per decoder i
};

// The ICI copies are stored normalized by the power budget so the consensus
// terms share the O(1) scale of the rate and binary blocks under the default
// rho; brackets convert back to physical units through xi_scale.
BracketCtx make_ctx(const ChannelSet& ch, const AdmmLocalState& st, int m,
                    bool exact_ici, const std::vector<AdmmLocalState>* all,
                    double xi_scale) {
  BracketCtx ctx;
  intra_products(ch, st.w, m, ctx.z, ctx.p);
  const int m_bs = ch.num_bs();
  const int k_users = ch.users_per_bs();
  ctx.ici = Eigen::VectorXd::Zero(k_users);
  for (int i = 0; i < k_users; ++i) {
    if (exact_ici) {
      for (int n = 0; n < m_bs; ++n) {
        if (n == m) continue;
        for (int u = 0; u < k_users; ++u)
          ctx.ici(i) += std::norm(rates::hw(ch.h[m][n][i], (*all)[n].w.col(u)));
      }
    } else {
      for (int n = 0; n < m_bs; ++n)
        if (n != m) ctx.ici(i) += xi_scale * st.xi_in(n, i);
    }
  }
  return ctx;
}

double bracket_value(const AdmmLocalState& st, const BracketCtx& ctx, int i,
                     int k, double sigma2) {
  const double intf =
      convex_intf(st.beta_c, ctx.p.row(i).transpose(), i, k, ctx.ici(i));
  return rate_bracket(st.mmse_a(i, k), st.mmse_c(i, k), ctx.z(i, k),
                      ctx.p(i, k), intf, sigma2);
}

void refresh_mmse(AdmmLocalState& st, const BracketCtx& ctx, double sigma2) {
  const int k_users = static_cast<int>(st.beta.rows());
  st.mmse_a.resize(k_users, k_users);
  st.mmse_c.resize(k_users, k_users);
  for (int i = 0; i < k_users; ++i)
    for (int k = 0; k < k_users; ++k) {
      const double intf =
          convex_intf(st.beta_c, ctx.p.row(i).transpose(), i, k, ctx.ici(i));
      mmse_pair(ctx.p(i, k), ctx.z(i, k), intf, sigma2, &st.mmse_a(i, k),
                &st.mmse_c(i, k));
    }
}

// ---------- block 1: {xi, beta} ----------

struct Block1Packing {
  int k_users, m_bs, m;
  int n_beta;  // K(K-1)
  int dim() const { return n_beta + 2 * (m_bs - 1) * k_users; }
  int offdiag_at(int i, int k) const { return offdiag_index(i, k, k_users); }
  int xi_out_at(int n, int k) const {  // n != m
    const int row = n < m ? n : n - 1;
    return n_beta + row * k_users + k;
  }
  int xi_in_at(int n, int k) const {
    const int row = n < m ? n : n - 1;
    return n_beta + (m_bs - 1) * k_users + row * k_users + k;
  }
};

// Block 1 of the local update. with_xi=true is the distributed form; the
// rate brackets are held fixed at the current ICI copies, so the xi update
// reduces to consensus tracking over the copy bounds while the brackets cap
// beta exactly. Re-optimizing xi against the brackets here deadlocks the
// consensus with the gamma block, which owns the binding rate constraint.
void solve_block1(AdmmLocalState& st, const AdmmSharedState& shared,
                  const ChannelSet& ch, const CellGeometry& g,
                  const AdmmConfig& acfg, int m, const BracketCtx& ctx,
                  bool with_xi) {
  const int k_users = g.k_users;
  const int m_bs = g.m_bs;
  Block1Packing pk{k_users, with_xi ? m_bs : 1, m, k_users * (k_users - 1)};
  const double inv_rho = 1.0 / shared.rho;
  const double mu = acfg.hinge_weight;

  Eigen::MatrixXd base(k_users, k_users);
  const Eigen::MatrixXd slope = Eigen::MatrixXd::Zero(k_users, k_users);
  for (int i = 0; i < k_users; ++i)
    for (int k = 0; k < k_users; ++k) {
      const double intf0 =
          convex_intf(st.beta_c, ctx.p.row(i).transpose(), i, k, ctx.ici(i));
      base(i, k) = rate_bracket(st.mmse_a(i, k), st.mmse_c(i, k), ctx.z(i, k),
                                ctx.p(i, k), intf0, g.sigma2);
    }
  // lower bounds for the outgoing copies (interference actually caused)
  Eigen::MatrixXd lb = Eigen::MatrixXd::Zero(m_bs, k_users);
  if (with_xi)
    for (int n = 0; n < m_bs; ++n) {
      if (n == m) continue;
      for (int k = 0; k < k_users; ++k)
        lb(n, k) = caused_interference(ch, st.w, m, n, k) / g.p_max;
    }

  PgdProblem prob;
  prob.eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) grad->setZero();
    double f = 0.0;
    // per-decoder incoming interference totals
    Eigen::VectorXd t_in = Eigen::VectorXd::Zero(k_users);
    if (with_xi)
      for (int n = 0; n < m_bs; ++n) {
        if (n == m) continue;
        for (int k = 0; k < k_users; ++k) t_in(k) += x(pk.xi_in_at(n, k));
      }
    for (int i = 0; i < k_users; ++i)
      for (int k = 0; k < k_users; ++k) {
        if (i == k) continue;
        const double b = x(pk.offdiag_at(i, k));
        const double r1 =
            b + st.beta_c(i, k) - 1.0 + shared.rho * shared.lambda[m](i, k);
        const double r2 =
            b * st.beta_c(i, k) + shared.rho * shared.lambda_t[m](i, k);
        f += 0.5 * inv_rho * (r1 * r1 + r2 * r2);
        if (grad)
          (*grad)(pk.offdiag_at(i, k)) += inv_rho * (r1 + r2 * st.beta_c(i, k));
      }
    if (with_xi)
      for (int n = 0; n < m_bs; ++n) {
        if (n == m) continue;
        for (int k = 0; k < k_users; ++k) {
          const double r_out = x(pk.xi_out_at(n, k)) - shared.xi_hat[m](n, k) +
                               shared.rho * shared.nu_out[m](n, k);
          const double r_in = x(pk.xi_in_at(n, k)) - shared.xi_hat[n](m, k) +
                              shared.rho * shared.nu_in[m](n, k);
          f += 0.5 * inv_rho * (r_out * r_out + r_in * r_in);
          if (grad) {
            (*grad)(pk.xi_out_at(n, k)) += inv_rho * r_out;
            (*grad)(pk.xi_in_at(n, k)) += inv_rho * r_in;
          }
        }
      }
    // rate-bracket hinges
    for (int i = 0; i < k_users; ++i)
      for (int k = 0; k < k_users; ++k) {
        const double lhs =
            (i == k) ? st.gamma(k) : x(pk.offdiag_at(i, k)) * st.gamma(k);
        const double bracket = base(i, k) - slope(i, k) * t_in(i);
        const double v = lhs - bracket;
        if (v <= 0.0) continue;
        f += mu * v * v;
        if (grad) {
          if (i != k) (*grad)(pk.offdiag_at(i, k)) += mu * 2.0 * v * st.gamma(k);
          if (with_xi)
            for (int n = 0; n < m_bs; ++n)
              if (n != m)
                (*grad)(pk.xi_in_at(n, i)) += mu * 2.0 * v * slope(i, k);
        }
      }
    return f;
  };
  prob.project = [&](Eigen::VectorXd& x) {
    for (int i = 0; i < k_users; ++i)
      for (int k = i + 1; k < k_users; ++k) {
        double a = x(pk.offdiag_at(i, k));
        double b = x(pk.offdiag_at(k, i));
        project_pair(a, b);
        x(pk.offdiag_at(i, k)) = a;
        x(pk.offdiag_at(k, i)) = b;
      }
    if (with_xi)
      for (int n = 0; n < m_bs; ++n) {
        if (n == m) continue;
        for (int k = 0; k < k_users; ++k) {
          x(pk.xi_out_at(n, k)) = std::max(x(pk.xi_out_at(n, k)), lb(n, k));
          x(pk.xi_in_at(n, k)) = std::max(x(pk.xi_in_at(n, k)), 0.0);
        }
      }
  };

  Eigen::VectorXd x0(pk.dim());
  for (int i = 0; i < k_users; ++i)
    for (int k = 0; k < k_users; ++k)
      if (i != k) x0(pk.offdiag_at(i, k)) = st.beta(i, k);
  if (with_xi)
    for (int n = 0; n < m_bs; ++n) {
      if (n == m) continue;
      for (int k = 0; k < k_users; ++k) {
        x0(pk.xi_out_at(n, k)) = st.xi_out(n, k);
        x0(pk.xi_in_at(n, k)) = st.xi_in(n, k);
      }
    }
  prob.project(x0);
  Eigen::VectorXd x =
      pgd_minimize(prob, std::move(x0), acfg.pgd_max_steps, acfg.pgd_tol);

  for (int i = 0; i < k_users; ++i)
    for (int k = 0; k < k_users; ++k)
      if (i != k) st.beta(i, k) = x(pk.offdiag_at(i, k));
  if (with_xi)
    for (int n = 0; n < m_bs; ++n) {
      if (n == m) continue;
      for (int k = 0; k < k_users; ++k) {
        st.xi_out(n, k) = x(pk.xi_out_at(n, k));
        st.xi_in(n, k) = x(pk.xi_in_at(n, k));
      }
    }

  // exact restoration: clamp beta against the brackets (the i = k rows are
  // enforced by the gamma clamp at the end of block 2)
  for (int i = 0; i < k_users; ++i) {
    for (int k = 0; k < k_users; ++k) {
      if (i == k) continue;
      if (st.gamma(k) <= 0.0) continue;
      const double cap = base(i, k) / st.gamma(k);
      st.beta(i, k) = std::clamp(st.beta(i, k), 0.0, std::max(cap, 0.0));
    }
  }
}

// ---------- block 2: {gamma, w, beta_c}, per BS or jointly ----------

struct Block2Packing {
  int k_users, n_t;
  bool with_beta_c;
  int per_bs() const {
    return k_users + 2 * n_t * k_users +
           (with_beta_c ? k_users * (k_users - 1) : 0);
  }
  int gamma_at(int slot, int k) const { return slot * per_bs() + k; }
  int wr_at(int slot, int t, int k) const {
    return slot * per_bs() + k_users + k * n_t + t;
  }
  int wi_at(int slot, int t, int k) const {
    return slot * per_bs() + k_users + n_t * k_users + k * n_t + t;
  }
  int beta_c_at(int slot, int i, int k) const {
    return slot * per_bs() + k_users + 2 * n_t * k_users +
           offdiag_index(i, k, k_users);
  }
};

struct Block2Options {
  bool exact_ici = false;   // centralized: ICI recomputed from the joint W
  bool with_beta_c = true;  // frozen-beta solving keeps beta_c fixed
  bool al_terms = true;     // include the binary augmented-Lagrangian terms
  bool xi_caps = false;     // distributed: hinge on (34) against xi_out
};

void unpack_block2(const Eigen::VectorXd& x, const Block2Packing& pk,
                   const std::vector<int>& bs_list,
                   std::vector<AdmmLocalState>& locals) {
  for (std::size_t s = 0; s < bs_list.size(); ++s) {
    AdmmLocalState& st = locals[bs_list[s]];
    const int k_users = pk.k_users;
    for (int k = 0; k < k_users; ++k) st.gamma(k) = x(pk.gamma_at(s, k));
    for (int k = 0; k < k_users; ++k)
      for (int t = 0; t < pk.n_t; ++t)
        st.w(t, k) = {x(pk.wr_at(s, t, k)), x(pk.wi_at(s, t, k))};
    if (pk.with_beta_c)
      for (int i = 0; i < k_users; ++i)
        for (int k = 0; k < k_users; ++k)
          if (i != k) st.beta_c(i, k) = x(pk.beta_c_at(s, i, k));
  }
}

void solve_block2(std::vector<AdmmLocalState>& locals,
                  const AdmmSharedState& shared, const ChannelSet& ch,
                  const CellGeometry& g, const AdmmConfig& acfg,
                  const std::vector<int>& bs_list, const Block2Options& opt) {
  const int k_users = g.k_users;
  const int n_t = g.n_t;
  const int m_bs = g.m_bs;
  Block2Packing pk{k_users, n_t, opt.with_beta_c};
  const double inv_rho = 1.0 / shared.rho;
  const double mu = acfg.hinge_weight;
  const int n_slots = static_cast<int>(bs_list.size());

  // slot lookup: bs index -> position in x (or -1 when fixed)
  std::vector<int> slot_of(m_bs, -1);
  for (int s = 0; s < n_slots; ++s) slot_of[bs_list[s]] = s;

  PgdProblem prob;
  prob.eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) grad->setZero();
    double f = 0.0;
    // read the candidate point into scratch copies
    std::vector<Eigen::VectorXd> gamma(n_slots);
    std::vector<Eigen::MatrixXcd> w(m_bs);
    std::vector<Eigen::MatrixXd> beta_c(n_slots);
    for (int n = 0; n < m_bs; ++n) w[n] = locals[n].w;
    for (int s = 0; s < n_slots; ++s) {
      const int m = bs_list[s];
      gamma[s].resize(k_users);
      for (int k = 0; k < k_users; ++k) gamma[s](k) = x(pk.gamma_at(s, k));
      for (int k = 0; k < k_users; ++k)
        for (int t = 0; t < n_t; ++t)
          w[m](t, k) = {x(pk.wr_at(s, t, k)), x(pk.wi_at(s, t, k))};
      beta_c[s] = locals[m].beta_c;
      if (opt.with_beta_c)
        for (int i = 0; i < k_users; ++i)
          for (int k = 0; k < k_users; ++k)
            if (i != k) beta_c[s](i, k) = x(pk.beta_c_at(s, i, k));
    }

    for (int s = 0; s < n_slots; ++s) {
      const int m = bs_list[s];
      const AdmmLocalState& st = locals[m];
      // objective: maximize the slack rates
      for (int k = 0; k < k_users; ++k) {
        f -= gamma[s](k);
        if (grad) (*grad)(pk.gamma_at(s, k)) -= 1.0;
      }
      // binary augmented-Lagrangian pieces (beta fixed in this block)
      if (opt.al_terms && opt.with_beta_c)
        for (int i = 0; i < k_users; ++i)
          for (int k = 0; k < k_users; ++k) {
            if (i == k) continue;
            const double bc = beta_c[s](i, k);
            const double r1 =
                st.beta(i, k) + bc - 1.0 + shared.rho * shared.lambda[m](i, k);
            const double r2 =
                st.beta(i, k) * bc + shared.rho * shared.lambda_t[m](i, k);
            f += 0.5 * inv_rho * (r1 * r1 + r2 * r2);
            if (grad)
              (*grad)(pk.beta_c_at(s, i, k)) +=
                  inv_rho * (r1 + r2 * st.beta(i, k));
          }

      // rate brackets
      Eigen::MatrixXcd z;
      Eigen::MatrixXd p;
      intra_products(ch, w[m], m, z, p);
      for (int i = 0; i < k_users; ++i) {
        double ici = 0.0;
        if (opt.exact_ici) {
          for (int n = 0; n < m_bs; ++n) {
            if (n == m) continue;
            for (int u = 0; u < k_users; ++u)
              ici += std::norm(rates::hw(ch.h[m][n][i], w[n].col(u)));
          }
        } else {
          for (int n = 0; n < m_bs; ++n)
            if (n != m) ici += g.p_max * st.xi_in(n, i);
        }
        for (int k = 0; k < k_users; ++k) {
          const double a = st.mmse_a(i, k);
          const std::complex<double> c = st.mmse_c(i, k);
          const double intf =
              convex_intf(beta_c[s], p.row(i).transpose(), i, k, ici);
          const double mse = 1.0 - 2.0 * (c * z(i, k)).real() +
                             std::norm(c) * (p(i, k) + intf + g.sigma2);
          const double bracket =
              std::log2(a) - a * mse / kLn2 + 1.0 / kLn2;
          const double lhs = (i == k) ? gamma[s](k)
                                      : st.beta(i, k) * gamma[s](k);
          const double v = lhs - bracket;
          if (v <= 0.0) continue;
          f += mu * v * v;
          if (!grad) continue;
          const double hinge = mu * 2.0 * v;
          (*grad)(pk.gamma_at(s, k)) += hinge * (i == k ? 1.0 : st.beta(i, k));
          // d(-bracket) = (a/ln2) * d(mse)
          const double br = hinge * a / kLn2;
          const double cn = std::norm(c);
          // own-signal column
          add_rez_grad(ch.h[m][m][i], c, -2.0 * br,
                       grad->segment(pk.wr_at(s, 0, k), n_t),
                       grad->segment(pk.wi_at(s, 0, k), n_t));
          add_p_grad(ch.h[m][m][i], z(i, k), br * cn,
                     grad->segment(pk.wr_at(s, 0, k), n_t),
                     grad->segment(pk.wi_at(s, 0, k), n_t));
          // intra-cell interference columns
          for (int u = 0; u < k_users; ++u) {
            if (u == k) continue;
            double coef, dcoef_iu = 0.0, dcoef_other = 0.0;
            int other_i = -1, other_k = -1;
            if (i == k) {
              coef = beta_c[s](k, u);
              dcoef_other = 1.0;
              other_i = k;
              other_k = u;
            } else if (u < k) {
              const double a1 = beta_c[s](i, u);
              const double a2 = 1.0 - beta_c[s](u, k);
              coef = std::max(a1, a2);
              if (a1 >= a2) {
                dcoef_iu = 1.0;
              } else {
                dcoef_other = -1.0;
                other_i = u;
                other_k = k;
              }
            } else {
              const double a1 = beta_c[s](i, u);
              const double a2 = beta_c[s](k, u);
              coef = std::max(a1, a2);
              if (a1 >= a2) {
                dcoef_iu = 1.0;
              } else {
                dcoef_other = 1.0;
                other_i = k;
                other_k = u;
              }
            }
            add_p_grad(ch.h[m][m][i], z(i, u), br * cn * coef,
                       grad->segment(pk.wr_at(s, 0, u), n_t),
                       grad->segment(pk.wi_at(s, 0, u), n_t));
            if (opt.with_beta_c) {
              if (dcoef_iu != 0.0 && i != u)
                (*grad)(pk.beta_c_at(s, i, u)) += br * cn * p(i, u) * dcoef_iu;
              if (dcoef_other != 0.0 && other_i != other_k)
                (*grad)(pk.beta_c_at(s, other_i, other_k)) +=
                    br * cn * p(i, u) * dcoef_other;
            }
          }
          // cross-cell interference (centralized only: joint W)
          if (opt.exact_ici)
            for (int n = 0; n < m_bs; ++n) {
              if (n == m || slot_of[n] < 0) continue;
              for (int u = 0; u < k_users; ++u) {
                const std::complex<double> zc =
                    rates::hw(ch.h[m][n][i], w[n].col(u));
                add_p_grad(ch.h[m][n][i], zc, br * cn,
                           grad->segment(pk.wr_at(slot_of[n], 0, u), n_t),
                           grad->segment(pk.wi_at(slot_of[n], 0, u), n_t));
              }
            }
        }
      }

      // caused-interference caps against the fixed outgoing copies (Eq. 34)
      if (opt.xi_caps)
        for (int n = 0; n < m_bs; ++n) {
          if (n == m) continue;
          for (int k = 0; k < k_users; ++k) {
            double caused = 0.0;
            std::vector<std::complex<double>> zc(k_users);
            for (int u = 0; u < k_users; ++u) {
              zc[u] = rates::hw(ch.h[n][m][k], w[m].col(u));
              caused += std::norm(zc[u]);
            }
            const double v = caused / g.p_max - st.xi_out(n, k);
            if (v <= 0.0) continue;
            f += mu * v * v;
            if (grad)
              for (int u = 0; u < k_users; ++u)
                add_p_grad(ch.h[n][m][k], zc[u], mu * 2.0 * v / g.p_max,
                           grad->segment(pk.wr_at(s, 0, u), n_t),
                           grad->segment(pk.wi_at(s, 0, u), n_t));
          }
        }
    }
    return f;
  };

  prob.project = [&](Eigen::VectorXd& x) {
    for (int s = 0; s < n_slots; ++s) {
      for (int k = 0; k < k_users; ++k)
        x(pk.gamma_at(s, k)) = std::max(x(pk.gamma_at(s, k)), 0.0);
      double power = 0.0;
      for (int k = 0; k < k_users; ++k)
        for (int t = 0; t < n_t; ++t)
          power += x(pk.wr_at(s, t, k)) * x(pk.wr_at(s, t, k)) +
                   x(pk.wi_at(s, t, k)) * x(pk.wi_at(s, t, k));
      if (power > g.p_max) {
        const double scalef = std::sqrt(g.p_max / power);
        for (int k = 0; k < k_users; ++k)
          for (int t = 0; t < n_t; ++t) {
            x(pk.wr_at(s, t, k)) *= scalef;
            x(pk.wi_at(s, t, k)) *= scalef;
          }
      }
      if (opt.with_beta_c)
        for (int i = 0; i < k_users; ++i)
          for (int k = 0; k < k_users; ++k)
            if (i != k)
              x(pk.beta_c_at(s, i, k)) =
                  std::clamp(x(pk.beta_c_at(s, i, k)), 0.0, 1.0);
    }
  };

  Eigen::VectorXd x0(static_cast<Eigen::Index>(n_slots) * pk.per_bs());
  for (int s = 0; s < n_slots; ++s) {
    const AdmmLocalState& st = locals[bs_list[s]];
    for (int k = 0; k < k_users; ++k) x0(pk.gamma_at(s, k)) = st.gamma(k);
    for (int k = 0; k < k_users; ++k)
      for (int t = 0; t < n_t; ++t) {
        x0(pk.wr_at(s, t, k)) = st.w(t, k).real();
        x0(pk.wi_at(s, t, k)) = st.w(t, k).imag();
      }
    if (opt.with_beta_c)
      for (int i = 0; i < k_users; ++i)
        for (int k = 0; k < k_users; ++k)
          if (i != k) x0(pk.beta_c_at(s, i, k)) = st.beta_c(i, k);
  }
  prob.project(x0);
  Eigen::VectorXd x =
      pgd_minimize(prob, std::move(x0), acfg.pgd_max_steps, acfg.pgd_tol);
  unpack_block2(x, pk, bs_list, locals);

  // exact restoration per solved BS: scale W to honour the ICI caps, then
  // clamp gamma to the realized brackets
  for (int s = 0; s < n_slots; ++s) {
    const int m = bs_list[s];
    AdmmLocalState& st = locals[m];
    if (opt.xi_caps) {
      double scalef = 1.0;
      for (int n = 0; n < m_bs; ++n) {
        if (n == m) continue;
        for (int k = 0; k < k_users; ++k) {
          const double caused = caused_interference(ch, st.w, m, n, k);
          const double cap = g.p_max * std::max(st.xi_out(n, k), 0.0);
          if (caused > cap && caused > 0.0)
            scalef = std::min(scalef, std::sqrt(cap / caused));
        }
      }
      if (scalef < 1.0) st.w *= scalef;
    }
  }
  for (int s = 0; s < n_slots; ++s) {
    const int m = bs_list[s];
    AdmmLocalState& st = locals[m];
    BracketCtx ctx = make_ctx(ch, st, m, opt.exact_ici, &locals, g.p_max);
    for (int k = 0; k < k_users; ++k) {
      double cap = bracket_value(st, ctx, k, k, g.sigma2);
      for (int i = 0; i < k_users; ++i) {
        if (i == k || st.beta(i, k) <= 1e-9) continue;
        cap = std::min(cap, bracket_value(st, ctx, i, k, g.sigma2) /
                                st.beta(i, k));
      }
      st.gamma(k) = std::max(std::min(st.gamma(k), cap), 0.0);
    }
  }
}

// ---------- initialization, iteration loop, rounding ----------

std::vector<AdmmLocalState> init_locals(const ChannelSet& ch,
                                        const CellGeometry& g, int start,
                                        std::uint64_t seed) {
  std::vector<AdmmLocalState> locals(g.m_bs);
  SchedulingDecision init_dec =
      SchedulingDecision::zeros(g.m_bs, g.n_t, g.k_users);
  Rng rng(Rng::mix(seed, 0xad33 + start));
  for (int m = 0; m < g.m_bs; ++m) {
    AdmmLocalState& st = locals[m];
    st.gamma = Eigen::VectorXd::Zero(g.k_users);
    st.w.resize(g.n_t, g.k_users);
    // start 0: scaled matched filters splitting the budget evenly;
    // further starts perturb the directions (the relaxation is sensitive to
    // its starting point, so the driver tries several)
    for (int k = 0; k < g.k_users; ++k) {
      Eigen::VectorXcd dir = ch.h[m][m][k].adjoint();
      if (start > 0)
        for (int t = 0; t < g.n_t; ++t)
          dir(t) += (0.5 + 0.5 * start) * rng.cnormal() * dir.norm();
      const double nrm = dir.norm();
      st.w.col(k) = nrm > 0.0 ? Eigen::VectorXcd(std::sqrt(g.p_max / g.k_users) *
                                                 dir / nrm)
                              : Eigen::VectorXcd::Zero(g.n_t);
    }
    init_dec.w[m] = st.w;
    st.beta = Eigen::MatrixXd::Zero(g.k_users, g.k_users);
    st.beta_c = Eigen::MatrixXd::Ones(g.k_users, g.k_users);
    st.xi_out = Eigen::MatrixXd::Zero(g.m_bs, g.k_users);
    st.xi_in = Eigen::MatrixXd::Zero(g.m_bs, g.k_users);
    st.mmse_a = Eigen::MatrixXd::Ones(g.k_users, g.k_users);
    st.mmse_c = Eigen::MatrixXcd::Zero(g.k_users, g.k_users);
  }
  // ICI copies start with head-room above the interference actually caused,
  // otherwise the caps pin the beamformers to their initial directions
  const double slack = 1.5;
  for (int m = 0; m < g.m_bs; ++m) {
    for (int n = 0; n < g.m_bs; ++n) {
      if (n == m) continue;
      for (int k = 0; k < g.k_users; ++k) {
        locals[m].xi_out(n, k) =
            slack * caused_interference(ch, locals[m].w, m, n, k) / g.p_max;
        locals[m].xi_in(n, k) =
            slack * caused_interference(ch, locals[n].w, n, m, k) / g.p_max;
      }
    }
    // no-SIC transmission rates of the initial beamformers
    for (int k = 0; k < g.k_users; ++k)
      locals[m].gamma(k) = rates::decode_rate(locals[m].beta, init_dec, ch, m,
                                              k, k, g.sigma2);
  }
  return locals;
}

AdmmSharedState init_shared(const std::vector<AdmmLocalState>& locals,
                            const CellGeometry& g, double rho) {
  AdmmSharedState sh;
  sh.rho = rho;
  sh.xi_hat.assign(g.m_bs, Eigen::MatrixXd::Zero(g.m_bs, g.k_users));
  sh.lambda.assign(g.m_bs, Eigen::MatrixXd::Zero(g.k_users, g.k_users));
  sh.lambda_t = sh.lambda;
  sh.nu_out.assign(g.m_bs, Eigen::MatrixXd::Zero(g.m_bs, g.k_users));
  sh.nu_in = sh.nu_out;
  for (int m = 0; m < g.m_bs; ++m)
    for (int n = 0; n < g.m_bs; ++n)
      if (n != m)
        sh.xi_hat[m].row(n) =
            0.5 * (locals[m].xi_out.row(n) + locals[n].xi_in.row(m));
  return sh;
}

double consensus_residual(const std::vector<AdmmLocalState>& locals,
                          const AdmmSharedState& sh) {
  double s = 0.0;
  const int m_bs = static_cast<int>(locals.size());
  for (int m = 0; m < m_bs; ++m)
    for (int n = 0; n < m_bs; ++n) {
      if (n == m) continue;
      s += (locals[m].xi_out.row(n) - sh.xi_hat[m].row(n)).squaredNorm();
      s += (locals[m].xi_in.row(n) - sh.xi_hat[n].row(m)).squaredNorm();
    }
  return std::sqrt(s);
}

void binary_residuals(const std::vector<AdmmLocalState>& locals, double* sum_r,
                      double* prod_r) {
  double rs = 0.0, rp = 0.0;
  for (const auto& st : locals) {
    const int k_users = static_cast<int>(st.beta.rows());
    for (int i = 0; i < k_users; ++i)
      for (int k = 0; k < k_users; ++k) {
        if (i == k) continue;
        const double d1 = st.beta(i, k) + st.beta_c(i, k) - 1.0;
        rs += d1 * d1;
        const double d2 = st.beta(i, k) * st.beta_c(i, k);
        rp += d2 * d2;
      }
  }
  *sum_r = std::sqrt(rs);
  *prod_r = std::sqrt(rp);
}

SchedulingDecision round_decision(const std::vector<AdmmLocalState>& locals,
                                  const CellGeometry& g) {
  SchedulingDecision d;
  for (const auto& st : locals) {
    const int k_users = static_cast<int>(st.beta.rows());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k_users, k_users);
    Eigen::MatrixXd zt = Eigen::MatrixXd::Zero(k_users, k_users);
    for (int i = 0; i < k_users; ++i)
      for (int k = i + 1; k < k_users; ++k) {
        bool r1 = st.beta(i, k) > 0.5;
        bool r2 = st.beta(k, i) > 0.5;
        if (r1 && r2) {  // mutual-SIC repair: keep the larger relaxed value
          if (st.beta(i, k) >= st.beta(k, i))
            r2 = false;
          else
            r1 = false;
        }
        b(i, k) = r1 ? 1.0 : 0.0;
        b(k, i) = r2 ? 1.0 : 0.0;
        zt(i, k) = (!r1 && !r2) ? 1.0 : 0.0;
        zt(k, i) = zt(i, k);
      }
    d.w.push_back(gnn::project_power(st.w, g.p_max));
    d.beta.push_back(b);
    d.zeta.push_back(zt);
  }
  return d;
}

AdmmResult run_single(const ChannelSet& ch, const NetworkConfig& cfg,
                      const AdmmConfig& acfg, bool distributed, int start) {
  const CellGeometry g = geometry(ch, cfg);
  std::vector<AdmmLocalState> locals = init_locals(ch, g, start, acfg.seed);
  AdmmSharedState shared = init_shared(locals, g, acfg.rho);
  AdmmReport report;

  const bool consensus_used = distributed && g.m_bs > 1;
  std::vector<int> all_bs(g.m_bs);
  for (int m = 0; m < g.m_bs; ++m) all_bs[m] = m;

  for (int it = 0; it < acfg.max_iters; ++it) {
    // iterate movement for the stopping rule
    std::vector<Eigen::MatrixXd> prev_beta_c(g.m_bs);
    std::vector<Eigen::MatrixXcd> prev_w(g.m_bs);
    std::vector<Eigen::MatrixXd> prev_hat = shared.xi_hat;
    for (int m = 0; m < g.m_bs; ++m) {
      prev_beta_c[m] = locals[m].beta_c;
      prev_w[m] = locals[m].w;
    }
    if (consensus_used)
      for (int m = 0; m < g.m_bs; ++m)
        for (int n = 0; n < g.m_bs; ++n) {
          if (n == m) continue;
          shared.xi_hat[m].row(n) =
              update_global(locals[m].xi_out.row(n).transpose(),
                            locals[n].xi_in.row(m).transpose(),
                            shared.nu_out[m].row(n).transpose(),
                            shared.nu_in[n].row(m).transpose(), shared.rho)
                  .transpose();
        }

    // local updates: each BS reads only its own state and the shared copies
    if (distributed) {
      for (int m = 0; m < g.m_bs; ++m)
        update_local(locals[m], shared, ch, cfg, acfg, m);
    } else {
      // all CSI at the controller: beta blocks per BS, then one joint
      // {gamma, W, beta_c} solve with the exact ICI
      for (int m = 0; m < g.m_bs; ++m) {
        AdmmLocalState& st = locals[m];
        BracketCtx ctx = make_ctx(ch, st, m, true, &locals, g.p_max);
        refresh_mmse(st, ctx, g.sigma2);
        solve_block1(st, shared, ch, g, acfg, m, ctx, false);
      }
      Block2Options b2;
      b2.exact_ici = true;
      b2.with_beta_c = true;
      b2.al_terms = true;
      b2.xi_caps = false;
      solve_block2(locals, shared, ch, g, acfg, all_bs, b2);
    }
    update_duals(locals, shared);

    double rs = 0.0, rp = 0.0;
    binary_residuals(locals, &rs, &rp);
    const double rc = consensus_used ? consensus_residual(locals, shared) : 0.0;
    double obj = 0.0;
    for (const auto& st : locals) obj += st.gamma.sum();
    report.consensus_residual.push_back(rc);
    report.binary_sum_residual.push_back(rs);
    report.binary_prod_residual.push_back(rp);
    report.objective.push_back(obj);
    report.iterations = it + 1;
    double moved = 0.0;
    for (int m = 0; m < g.m_bs; ++m) {
      moved += (locals[m].beta_c - prev_beta_c[m]).norm();
      moved += (locals[m].w - prev_w[m]).norm() / std::sqrt(g.p_max);
      if (consensus_used)
        moved += (shared.xi_hat[m] - prev_hat[m]).norm();
    }
    if (rc <= acfg.consensus_tol && rs <= acfg.binary_tol &&
        rp <= acfg.binary_tol && moved <= acfg.dual_tol)
      break;
    if (acfg.adapt_rho && (it + 1) % 25 == 0 && rc > 10.0 * acfg.consensus_tol)
      shared.rho = std::max(shared.rho * 0.5, 1e-3);
  }

  AdmmResult res;
  res.decision = round_decision(locals, g);
  const FeasibilityReport feas = rates::check_feasibility(res.decision, ch, cfg);
  res.report = std::move(report);
  res.report.rounded_feasible =
      feas.power_ok && feas.mutual_sic_ok && feas.binary_ok;
  const RateReport rr = rates::sum_rate(res.decision, ch, g.sigma2);
  res.report.sum_rate = rr.sum_rate;
  if (distributed) {
    res.report.exchanged_bits = static_cast<long long>(res.report.iterations) *
                                g.m_bs * (g.m_bs - 1) * 2 * g.k_users * 32;
  } else {
    // CSI uplink + decision downlink, complex numbers at 64 bits
    res.report.exchanged_bits =
        static_cast<long long>(g.m_bs) * g.m_bs * g.k_users * g.n_t * 64 +
        static_cast<long long>(g.m_bs) *
            (g.n_t * g.k_users * 64 + 2 * g.k_users * g.k_users * 32);
  }
  return res;
}

AdmmResult run_core(const ChannelSet& ch, const NetworkConfig& cfg,
                    const AdmmConfig& acfg, bool distributed) {
  AdmmResult best;
  bool have = false;
  const int starts = std::max(1, acfg.num_starts);
  for (int s = 0; s < starts; ++s) {
    AdmmResult cand = run_single(ch, cfg, acfg, distributed, s);
    const bool better =
        !have ||
        (cand.report.rounded_feasible && !best.report.rounded_feasible) ||
        (cand.report.rounded_feasible == best.report.rounded_feasible &&
         cand.report.sum_rate > best.report.sum_rate);
    if (better) {
      best = std::move(cand);
      have = true;
    }
  }
  return best;
}

}  // namespace

void update_local(AdmmLocalState& local, const AdmmSharedState& shared,
                  const ChannelSet& ch, const NetworkConfig& cfg,
                  const AdmmConfig& acfg, int m) {
  const CellGeometry g = geometry(ch, cfg);
  BracketCtx ctx = make_ctx(ch, local, m, false, nullptr, g.p_max);
  refresh_mmse(local, ctx, g.sigma2);
  const bool with_xi = g.m_bs > 1;
  solve_block1(local, shared, ch, g, acfg, m, ctx, with_xi);
  Block2Options b2;
  b2.exact_ici = false;
  b2.with_beta_c = true;
  b2.al_terms = true;
  b2.xi_caps = with_xi;
  // only this BS's slot is read or written (local ICI copies stand in for
  // the other cells), so the other slots stay empty
  std::vector<AdmmLocalState> wrap(g.m_bs);
  wrap[m] = std::move(local);
  solve_block2(wrap, shared, ch, g, acfg, {m}, b2);
  local = std::move(wrap[m]);
}

AdmmResult run_distributed(const ChannelSet& ch, const NetworkConfig& cfg,
                           const AdmmConfig& acfg) {
  return run_core(ch, cfg, acfg, true);
}

AdmmResult run_centralized(const ChannelSet& ch, const NetworkConfig& cfg,
                           const AdmmConfig& acfg) {
  return run_core(ch, cfg, acfg, false);
}

SchedulingDecision solve_frozen_beta(const ChannelSet& ch,
                                     const NetworkConfig& cfg,
                                     const std::vector<Eigen::MatrixXd>& beta,
                                     const FrozenBetaOptions& opt) {
  const CellGeometry g = geometry(ch, cfg);
  for (int m = 0; m < g.m_bs; ++m)
    for (int i = 0; i < g.k_users; ++i)
      for (int k = 0; k < g.k_users; ++k) {
        const double b = beta[m](i, k);
        if (b != 0.0 && b != 1.0)
          throw ConfigError("solve_frozen_beta: beta must be binary");
        if (i != k && k > i && beta[m](i, k) + beta[m](k, i) > 1.0)
          throw ConfigError("solve_frozen_beta: mutual SIC pattern");
        if (i == k && b != 0.0)
          throw ConfigError("solve_frozen_beta: beta diagonal must be 0");
      }
  std::vector<AdmmLocalState> locals = init_locals(ch, g, 0, 1);
  for (int m = 0; m < g.m_bs; ++m) {
    locals[m].beta = beta[m];
    locals[m].beta_c = Eigen::MatrixXd::Ones(g.k_users, g.k_users) - beta[m];
    for (int i = 0; i < g.k_users; ++i) locals[m].beta_c(i, i) = 1.0;
  }
  AdmmSharedState shared = init_shared(locals, g, 1.0);
  AdmmConfig acfg;
  acfg.pgd_max_steps = opt.pgd_max_steps;
  acfg.pgd_tol = opt.pgd_tol;
  acfg.hinge_weight = opt.hinge_weight;
  std::vector<int> all_bs(g.m_bs);
  for (int m = 0; m < g.m_bs; ++m) all_bs[m] = m;
  Block2Options b2;
  b2.exact_ici = true;
  b2.with_beta_c = false;
  b2.al_terms = false;
  b2.xi_caps = false;
  double prev_obj = -std::numeric_limits<double>::infinity();
  for (int round = 0; round < opt.rounds; ++round) {
    for (int m = 0; m < g.m_bs; ++m) {
      BracketCtx ctx = make_ctx(ch, locals[m], m, true, &locals, g.p_max);
      refresh_mmse(locals[m], ctx, g.sigma2);
    }
    solve_block2(locals, shared, ch, g, acfg, all_bs, b2);
    double obj = 0.0;
    for (const auto& st : locals) obj += st.gamma.sum();
    if (obj - prev_obj < 1e-6 * (1.0 + std::abs(obj)) && round > 2) break;
    prev_obj = obj;
  }
  SchedulingDecision d;
  for (int m = 0; m < g.m_bs; ++m) {
    d.w.push_back(gnn::project_power(locals[m].w, g.p_max));
    d.beta.push_back(beta[m]);
    Eigen::MatrixXd zt = Eigen::MatrixXd::Zero(g.k_users, g.k_users);
    for (int i = 0; i < g.k_users; ++i)
      for (int k = i + 1; k < g.k_users; ++k) {
        zt(i, k) = (beta[m](i, k) == 0.0 && beta[m](k, i) == 0.0) ? 1.0 : 0.0;
        zt(k, i) = zt(i, k);
      }
    d.zeta.push_back(zt);
  }
  return d;
}

void save_report(const AdmmReport& report, const std::string& csv_path,
                 const std::string& json_path) {
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write report: " + csv_path);
    out << "iteration,consensus_residual,binary_sum_residual,"
           "binary_prod_residual,objective\n";
    for (std::size_t i = 0; i < report.objective.size(); ++i)
      out << i + 1 << ',' << report.consensus_residual[i] << ','
          << report.binary_sum_residual[i] << ','
          << report.binary_prod_residual[i] << ',' << report.objective[i]
          << '\n';
  }
  if (!json_path.empty()) {
    nlohmann::json j;
    j["iterations"] = report.iterations;
    j["rounded_feasible"] = report.rounded_feasible;
    j["exchanged_bits"] = report.exchanged_bits;
    j["sum_rate"] = report.sum_rate;
    j["final_consensus_residual"] = report.consensus_residual.empty()
                                        ? 0.0
                                        : report.consensus_residual.back();
    j["final_binary_sum_residual"] = report.binary_sum_residual.empty()
                                         ? 0.0
                                         : report.binary_sum_residual.back();
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot write report: " + json_path);
    out << j.dump(2);
  }
}

}  // namespace cfnoma::admm
