#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cfnoma/harness.hpp"

namespace py = pybind11;
using namespace cfnoma;

namespace {

NetworkConfig net_from_json(const std::string& text) {
  return network_config_from_json(nlohmann::json::parse(text));
}

py::array_t<std::complex<double>> channels_to_numpy(const ChannelSet& ch) {
  const int m_bs = ch.num_bs();
  const int k_users = ch.users_per_bs();
  const int n_t = ch.num_antennas();
  py::array_t<std::complex<double>> arr({m_bs, m_bs, k_users, n_t});
  auto view = arr.mutable_unchecked<4>();
  for (int m = 0; m < m_bs; ++m)
    for (int n = 0; n < m_bs; ++n)
      for (int k = 0; k < k_users; ++k)
        for (int t = 0; t < n_t; ++t) view(m, n, k, t) = ch.h[m][n][k](t);
  return arr;
}

SchedulingDecision decision_from_numpy(
    const py::array_t<std::complex<double>>& w,
    const py::array_t<double>& beta) {
  auto wv = w.unchecked<3>();    // [M][N_T][K]
  auto bv = beta.unchecked<3>(); // [M][K][K]
  const int m_bs = static_cast<int>(wv.shape(0));
  const int n_t = static_cast<int>(wv.shape(1));
  const int k_users = static_cast<int>(wv.shape(2));
  SchedulingDecision d = SchedulingDecision::zeros(m_bs, n_t, k_users);
  for (int m = 0; m < m_bs; ++m) {
    for (int t = 0; t < n_t; ++t)
      for (int k = 0; k < k_users; ++k) d.w[m](t, k) = wv(m, t, k);
    for (int i = 0; i < k_users; ++i)
      for (int k = 0; k < k_users; ++k)
        if (i != k) d.beta[m](i, k) = bv(m, i, k);
  }
  return d;
}

py::dict report_to_dict(const RateReport& rep) {
  py::dict out;
  out["sum_rate"] = rep.sum_rate;
  out["sic_complexity"] = rep.sic_complexity;
  py::list eff;
  for (const auto& v : rep.effective) {
    py::list cell;
    for (int k = 0; k < v.size(); ++k) cell.append(v(k));
    eff.append(cell);
  }
  out["effective_rates"] = eff;
  out["power_ok"] = rep.feasibility.power_ok;
  out["mutual_sic_ok"] = rep.feasibility.mutual_sic_ok;
  out["min_rate_ok"] = rep.feasibility.min_rate_ok;
  return out;
}

py::dict decision_to_dict(const SchedulingDecision& d,
                          const gnn::ForwardTrace* trace) {
  py::dict out;
  const int m_bs = d.num_bs();
  const int n_t = static_cast<int>(d.w[0].rows());
  const int k_users = static_cast<int>(d.w[0].cols());
  py::array_t<std::complex<double>> w({m_bs, n_t, k_users});
  py::array_t<double> beta({m_bs, k_users, k_users});
  py::array_t<double> zeta({m_bs, k_users, k_users});
  auto wv = w.mutable_unchecked<3>();
  auto bv = beta.mutable_unchecked<3>();
  auto zv = zeta.mutable_unchecked<3>();
  for (int m = 0; m < m_bs; ++m)
    for (int i = 0; i < k_users; ++i)
      for (int k = 0; k < k_users; ++k) {
        bv(m, i, k) = d.beta[m](i, k);
        zv(m, i, k) = d.zeta[m](i, k);
      }
  for (int m = 0; m < m_bs; ++m)
    for (int t = 0; t < n_t; ++t)
      for (int k = 0; k < k_users; ++k) wv(m, t, k) = d.w[m](t, k);
  out["w"] = w;
  out["beta"] = beta;
  out["zeta"] = zeta;
  if (trace) {
    out["bits"] = trace->bits;
    out["active_layers"] = trace->active_layers;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_cfnoma, m) {
  m.doc() = "multi-cell cluster-free NOMA scheduling toolkit";

  py::class_<ChannelSet>(m, "Channels")
      .def_property_readonly("num_bs", &ChannelSet::num_bs)
      .def_property_readonly("users_per_bs", &ChannelSet::users_per_bs)
      .def_property_readonly("num_antennas", &ChannelSet::num_antennas)
      .def_readonly("sigma2", &ChannelSet::sigma2)
      .def_readonly("p_max", &ChannelSet::p_max)
      .def("to_numpy", &channels_to_numpy,
           "channel tensor h[m][n][k][t]: BS n -> user k of cell m");

  m.def(
      "sample_channels",
      [](const std::string& network_json, std::uint64_t seed) {
        Rng rng(seed);
        return sample_channels(net_from_json(network_json), rng);
      },
      py::arg("network_json"), py::arg("seed"));

  m.def(
      "pathloss",
      [](double d, const std::string& network_json) {
        return pathloss(d, net_from_json(network_json));
      },
      py::arg("distance"), py::arg("network_json") = std::string("{}"));

  m.def(
      "correlation_matrix",
      [](int k_users, double corr, double phi) {
        const Eigen::MatrixXcd r = correlation_matrix(k_users, corr, phi);
        py::array_t<std::complex<double>> arr({k_users, k_users});
        auto view = arr.mutable_unchecked<2>();
        for (int i = 0; i < k_users; ++i)
          for (int k = 0; k < k_users; ++k) view(i, k) = r(i, k);
        return arr;
      },
      py::arg("k_users"), py::arg("corr"), py::arg("phi"));

  m.def(
      "sum_rate",
      [](const ChannelSet& ch, const py::array_t<std::complex<double>>& w,
         const py::array_t<double>& beta) {
        const SchedulingDecision d = decision_from_numpy(w, beta);
        NetworkConfig cfg;
        cfg.num_bs = ch.num_bs();
        cfg.users_per_bs = ch.users_per_bs();
        cfg.num_antennas = ch.num_antennas();
        cfg.sigma2 = ch.sigma2;
        cfg.p_max = ch.p_max;
        return report_to_dict(rates::evaluate(d, ch, cfg));
      },
      py::arg("channels"), py::arg("w"), py::arg("beta"));

  m.def("gumbel",
        [](double logit, std::uint64_t seed, double s_temp) {
          Rng rng(seed);
          return gnn::gumbel(logit, rng, s_temp);
        },
        py::arg("logit"), py::arg("seed"), py::arg("s_temp") = 1.0);

  m.def(
      "sic_softmax",
      [](double b_ik, double b_ki, double z_ik) {
        const Eigen::Vector3d v = gnn::sic_softmax(b_ik, b_ki, z_ik);
        return std::array<double, 3>{v(0), v(1), v(2)};
      },
      py::arg("beta_ik"), py::arg("beta_ki"), py::arg("zeta_ik"));

  py::class_<gnn::GnnModel>(m, "GnnModel")
      .def_static(
          "create",
          [](int layers, int embed_dim, int hidden, int num_antennas,
             int users_per_bs, std::uint64_t seed, double w_scale) {
            gnn::GnnConfig cfg;
            cfg.layers = layers;
            cfg.embed_dim = embed_dim;
            cfg.hidden = hidden;
            cfg.w_scale = w_scale;
            return gnn::GnnModel::init(cfg, num_antennas, users_per_bs, seed);
          },
          py::arg("layers"), py::arg("embed_dim"), py::arg("hidden"),
          py::arg("num_antennas"), py::arg("users_per_bs"), py::arg("seed"),
          py::arg("w_scale") = 1.0)
      .def_static("load", &gnn::GnnModel::load, py::arg("path"))
      .def("save", &gnn::GnnModel::save, py::arg("path"))
      .def_property_readonly("theta_dim",
                             [](const gnn::GnnModel& g) { return g.theta.size(); })
      .def_property_readonly("alpha_dim",
                             [](const gnn::GnnModel& g) { return g.alpha.size(); })
      .def("config_hash", &gnn::GnnModel::config_hash)
      .def(
          "forward",
          [](const gnn::GnnModel& model, const ChannelSet& ch,
             const std::string& mode, const std::string& sample,
             std::uint64_t seed) {
            Rng rng(seed);
            const gnn::ForwardResult res = gnn::forward(
                ch, model,
                mode == "fixed" ? gnn::Mode::kFixed : gnn::Mode::kAuto,
                sample == "soft" ? gnn::SampleMode::kSoft
                                 : gnn::SampleMode::kHard,
                gnn::NoiseMode::kPerBs, rng);
            return decision_to_dict(res.decision, &res.trace);
          },
          py::arg("channels"), py::arg("mode") = "auto",
          py::arg("sample") = "hard", py::arg("seed") = 1);

  m.def("fixed_gnn_bits", &gnn::fixed_gnn_bits, py::arg("num_bs"),
        py::arg("layers"), py::arg("embed_dim"));

  m.def(
      "run_admm",
      [](const ChannelSet& ch, const std::string& network_json,
         bool distributed, int max_iters) {
        const NetworkConfig cfg = net_from_json(network_json);
        admm::AdmmConfig acfg;
        acfg.max_iters = max_iters;
        const admm::AdmmResult res = distributed
                                         ? admm::run_distributed(ch, cfg, acfg)
                                         : admm::run_centralized(ch, cfg, acfg);
        py::dict out = decision_to_dict(res.decision, nullptr);
        out["sum_rate"] = res.report.sum_rate;
        out["iterations"] = res.report.iterations;
        out["exchanged_bits"] = res.report.exchanged_bits;
        out["rounded_feasible"] = res.report.rounded_feasible;
        return out;
      },
      py::arg("channels"), py::arg("network_json"),
      py::arg("distributed") = true, py::arg("max_iters") = 300);

  m.def(
      "train",
      [](const std::string& experiment_json) {
        const auto cfg = harness::ExperimentConfig::from_json(
            nlohmann::json::parse(experiment_json));
        auto result = harness::train_method(cfg);
        if (!result)
          throw std::runtime_error("train: method is not a learned one");
        return result->model;
      },
      py::arg("experiment_json"));

  m.def(
      "compare",
      [](const std::string& experiment_json) {
        auto cfg = harness::ExperimentConfig::from_json(
            nlohmann::json::parse(experiment_json));
        cfg.out_dir.clear();
        py::list rows;
        for (const auto& r : harness::compare(cfg)) {
          py::dict d;
          d["method"] = r.method;
          d["sum_rate"] = r.sum_rate;
          d["overhead_kbit"] = r.overhead_kbit;
          d["sic_complexity"] = r.sic_complexity;
          d["layers_or_iters"] = r.layers_or_iters;
          rows.append(d);
        }
        return rows;
      },
      py::arg("experiment_json"));
}
