#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "cfnoma/harness.hpp"
#include "doctest.h"

using namespace cfnoma;
namespace fs = std::filesystem;

namespace {

harness::ExperimentConfig micro_config(const std::string& method) {
  harness::ExperimentConfig cfg;
  cfg.network.num_bs = 2;
  cfg.network.users_per_bs = 2;
  cfg.network.num_antennas = 2;
  cfg.network.snr_db = 10.0;
  cfg.data.train_batches = 2;
  cfg.data.val_batches = 1;
  cfg.data.test_batches = 1;
  cfg.data.batch_size = 2;
  cfg.method.name = method;
  cfg.method.gnn.layers = 2;
  cfg.method.gnn.embed_dim = 4;
  cfg.method.gnn.hidden = 8;
  cfg.method.gnn.w_scale = 0.0;  // derive from the power budget
  cfg.method.train.epochs = 1;
  cfg.method.train.inner_steps = 2;
  cfg.method.train.neumann_terms = 2;
  cfg.method.admm.max_iters = 30;
  cfg.method.admm.pgd_max_steps = 60;
  cfg.seed = 3;
  cfg.out_dir.clear();
  return cfg;
}

}  // namespace

TEST_CASE("cluster patterns: validity and shapes") {
  const Eigen::MatrixXd none = harness::cluster_pattern_beta("none", 3);
  CHECK(none.sum() == 0.0);
  const Eigen::MatrixXd pairs = harness::cluster_pattern_beta("pairs", 3);
  CHECK(pairs(1, 0) == 1.0);
  CHECK(pairs.sum() == 1.0);  // one pair, user 2 alone
  const Eigen::MatrixXd chain = harness::cluster_pattern_beta("chain", 3);
  CHECK(chain.sum() == 3.0);
  for (int i = 0; i < 3; ++i)
    for (int k = i + 1; k < 3; ++k) {
      CHECK(pairs(i, k) + pairs(k, i) <= 1.0);
      CHECK(chain(i, k) + chain(k, i) <= 1.0);
    }
  CHECK_THROWS_AS(harness::cluster_pattern_beta("bogus", 3), ConfigError);
}

TEST_CASE("beta enumerations") {
  const auto all = harness::all_valid_beta(3);
  CHECK(all.size() == 27);
  for (const auto& b : all)
    for (int i = 0; i < 3; ++i) {
      CHECK(b(i, i) == 0.0);
      for (int k = i + 1; k < 3; ++k) CHECK(b(i, k) + b(k, i) <= 1.0);
    }
  const auto patterns = harness::all_cluster_patterns(3);
  CHECK(patterns.size() == 5);  // Bell number B_3
  // every cluster pattern appears in the exhaustive list
  for (const auto& p : patterns) {
    bool found = false;
    for (const auto& b : all)
      if ((b - p).norm() == 0.0) found = true;
    CHECK(found);
  }
  CHECK(harness::all_valid_beta(2).size() == 3);
  CHECK(harness::all_cluster_patterns(2).size() == 2);
}

TEST_CASE("cluster-free enumeration dominates every cluster pattern (K=2)") {
  NetworkConfig net;
  net.num_bs = 1;
  net.users_per_bs = 2;
  net.num_antennas = 2;
  net.snr_db = 10.0;
  Rng rng(21);
  const ChannelSet ch = sample_channels(net, rng);
  admm::FrozenBetaOptions opt;
  opt.rounds = 10;
  opt.pgd_max_steps = 80;

  double best_free = -1.0;
  for (const auto& b : harness::all_valid_beta(2)) {
    const SchedulingDecision d =
        admm::solve_frozen_beta(ch, net, {b}, opt);
    best_free = std::max(best_free, rates::sum_rate(d, ch, net.sigma2).sum_rate);
  }
  for (const auto& p : harness::all_cluster_patterns(2)) {
    const SchedulingDecision d =
        admm::solve_frozen_beta(ch, net, {p}, opt);
    CHECK(best_free >= rates::sum_rate(d, ch, net.sigma2).sum_rate - 1e-12);
  }
}

TEST_CASE("config JSON round trip and overrides") {
  harness::ExperimentConfig cfg = micro_config("fixed_gnn");
  cfg.methods.push_back(cfg.method);
  cfg.sweep_corr = {0.5, 0.6};
  const nlohmann::json j = cfg.to_json();
  const harness::ExperimentConfig back = harness::ExperimentConfig::from_json(j);
  CHECK(back.network.num_bs == 2);
  CHECK(back.method.name == "fixed_gnn");
  CHECK(back.sweep_corr.size() == 2);
  CHECK(back.hash() == cfg.hash());

  harness::ExperimentConfig o = micro_config("fixed_gnn");
  o.apply_override("network.snr_db", "15");
  CHECK(o.network.snr_db == 15.0);
  o.apply_override("method.train.epochs", "7");
  CHECK(o.method.train.epochs == 7);
  o.apply_override("method.name", "admm_distributed");
  CHECK(o.method.name == "admm_distributed");
  CHECK_THROWS(o.apply_override("method.name", "\"bogus\""));
}

TEST_CASE("unknown method is rejected") {
  nlohmann::json j;
  j["method"] = {{"name", "magic"}};
  CHECK_THROWS_AS(harness::ExperimentConfig::from_json(j), ConfigError);
}

TEST_CASE("evaluate is reproducible bit for bit") {
  harness::ExperimentConfig cfg = micro_config("admm_distributed");
  const Dataset test = harness::test_dataset(cfg);
  const harness::RunResult a = harness::evaluate_method(cfg, test, nullptr);
  const harness::RunResult b = harness::evaluate_method(cfg, test, nullptr);
  CHECK(a.per_sample_rate == b.per_sample_rate);
  CHECK(a.per_sample_kbit == b.per_sample_kbit);
  CHECK(a.per_sample_sic == b.per_sample_sic);
  CHECK(a.sum_rate == b.sum_rate);
  CHECK(a.config_hash == b.config_hash);
}

TEST_CASE("aggregates equal recomputation from per-sample records") {
  harness::ExperimentConfig cfg = micro_config("beta_frozen_oracle");
  const Dataset test = harness::test_dataset(cfg);
  harness::RunResult r = harness::evaluate_method(cfg, test, nullptr);
  const double mean_rate = r.sum_rate;
  harness::finalize(r);
  CHECK(r.sum_rate == mean_rate);
  double s = 0.0;
  for (double v : r.per_sample_rate) s += v;
  CHECK(r.sum_rate == doctest::Approx(s / r.per_sample_rate.size()));
}

TEST_CASE("compare writes a Table-style CSV with one row per method") {
  harness::ExperimentConfig cfg = micro_config("fixed_gnn");
  cfg.methods = {cfg.method};
  cfg.methods.push_back(cfg.method);
  cfg.methods[1].name = "admm_distributed";
  cfg.methods.push_back(cfg.method);
  cfg.methods[2].name = "beta_frozen_oracle";
  const fs::path dir = fs::temp_directory_path() / "cfnoma_compare_test";
  fs::remove_all(dir);
  cfg.out_dir = dir.string();
  const auto rows = harness::compare(cfg);
  CHECK(rows.size() == 3);
  REQUIRE(fs::exists(dir / "results.csv"));
  std::ifstream in(dir / "results.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "method,test_sum_rate_bps_hz,execution_time_s,gnn_layers_or_"
        "iterations,information_overhead_kbit,sic_complexity");
  int lines = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 3);
  CHECK(fs::exists(dir / "summary.json"));
  fs::remove_all(dir);
}

TEST_CASE("sweep emits per-corr rows and plot data") {
  harness::ExperimentConfig cfg = micro_config("admm_centralized");
  cfg.methods = {cfg.method};
  cfg.sweep_corr = {0.5, 0.6};
  const fs::path dir = fs::temp_directory_path() / "cfnoma_sweep_test";
  fs::remove_all(dir);
  cfg.out_dir = dir.string();
  const auto rows = harness::sweep(cfg);
  CHECK(rows.size() == 2);  // 2 corr x 1 method
  CHECK(rows[0].first == 0.5);
  CHECK(rows[1].first == 0.6);
  REQUIRE(fs::exists(dir / "results.csv"));
  CHECK(fs::exists(dir / "plotdata" / "sum_rate_admm_centralized.tsv"));
  CHECK(fs::exists(dir / "plotdata" / "overhead_admm_centralized.tsv"));
  std::ifstream in(dir / "plotdata" / "sum_rate_admm_centralized.tsv");
  std::string l1, l2;
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(l1.substr(0, 4) == "0.5\t");
  CHECK(l2.substr(0, 4) == "0.6\t");
  fs::remove_all(dir);
}

TEST_CASE("generalization run coincides with itself at equal SNR") {
  harness::ExperimentConfig cfg = micro_config("fixed_gnn");
  auto trained = harness::train_method(cfg);
  REQUIRE(trained.has_value());
  const auto [gen, fresh] =
      harness::generalization_run(cfg, trained->model, cfg.network.snr_db);
  CHECK(gen.sum_rate == doctest::Approx(fresh.sum_rate));
  CHECK(gen.per_sample_rate == fresh.per_sample_rate);
}

TEST_CASE("generalization run rejects mismatched shapes") {
  harness::ExperimentConfig cfg = micro_config("fixed_gnn");
  gnn::GnnConfig gc = cfg.method.gnn;
  gc.w_scale = 1.0;
  const gnn::GnnModel other = gnn::GnnModel::init(gc, 4, 2, 1);  // N_T mismatch
  CHECK_THROWS_AS(harness::generalization_run(cfg, other, 5.0), ConfigError);
}

TEST_CASE("learned evaluation requires a checkpoint") {
  harness::ExperimentConfig cfg = micro_config("fixed_gnn");
  const Dataset test = harness::test_dataset(cfg);
  CHECK_THROWS(harness::evaluate_method(cfg, test, nullptr));
}
