#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cfnoma/admm.hpp"
#include "cfnoma/bilevel.hpp"
#include "cfnoma/channel.hpp"
#include "cfnoma/gnn.hpp"
#include "json.hpp"

namespace cfnoma::harness {

struct MethodConfig {
  std::string name;  // autognn | fixed_gnn | admm_distributed |
                     // admm_centralized | beta_frozen_oracle
  gnn::GnnConfig gnn;
  bilevel::TrainConfig train;
  admm::AdmmConfig admm;
  std::string cluster_pattern = "pairs";  // none | pairs | chain
};

struct DatasetSpec {
  int train_batches = 10;
  int val_batches = 4;
  int test_batches = 4;
  int batch_size = 8;
};

struct ExperimentConfig {
  NetworkConfig network;
  DatasetSpec data;
  MethodConfig method;
  std::vector<MethodConfig> methods;  // compare/sweep
  std::vector<double> sweep_corr;
  std::string out_dir = ".";
  std::uint64_t seed = 1;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  // dotted-path override, e.g. network.snr_db=15
  void apply_override(const std::string& key, const std::string& value);
  std::string hash() const;
};

ExperimentConfig load_config(const std::string& path);

struct RunResult {
  std::string method;
  double sum_rate = 0.0;        // mean over the test set (bps/Hz)
  double overhead_kbit = 0.0;   // mean information overhead, Kbit = 1000 bits
  double sic_complexity = 0.0;  // mean number of active SIC operations
  double layers_or_iters = 0.0;
  double runtime_seconds = 0.0;
  std::vector<double> per_sample_rate;
  std::vector<double> per_sample_kbit;
  std::vector<double> per_sample_sic;
  std::vector<double> per_sample_layers_or_iters;
  std::string config_hash;

  nlohmann::json to_json() const;
};

// Aggregates are recomputed from the per-sample records.
void finalize(RunResult& r);

Dataset test_dataset(const ExperimentConfig& cfg);

// Train a learned method (autognn / fixed_gnn) on freshly generated
// train/val datasets; other methods return nullopt.
std::optional<bilevel::TrainResult> train_method(const ExperimentConfig& cfg);

// Evaluate one method on the test set. `model` is required for the learned
// methods and ignored otherwise.
RunResult evaluate_method(const ExperimentConfig& cfg, const Dataset& test,
                          const gnn::GnnModel* model);

// One row per method over a shared test set; also writes results.csv and
// summary.json when out_dir is non-empty.
std::vector<RunResult> compare(const ExperimentConfig& cfg);

// corr_D sweep across methods; writes results.csv and plotdata/*.tsv.
std::vector<std::pair<double, RunResult>> sweep(const ExperimentConfig& cfg);

// Evaluate a checkpoint trained at its own SNR on snr_b, against a freshly
// retrained snr_b model; returns {generalization, retrained}.
std::pair<RunResult, RunResult> generalization_run(
    const ExperimentConfig& base, const gnn::GnnModel& checkpoint,
    double snr_b);

// Beamforming with the SIC matrix frozen to a cluster pattern.
RunResult beta_frozen_oracle(const ExperimentConfig& cfg, const Dataset& test);

// cluster pattern name -> per-cell binary beta (stronger users decode weaker
// ones inside each cluster)
Eigen::MatrixXd cluster_pattern_beta(const std::string& name, int k_users);

// all binary K x K matrices valid under the pairwise SIC constraint
std::vector<Eigen::MatrixXd> all_valid_beta(int k_users);

// all partitions of the K users into clusters, as chain-decoding patterns
std::vector<Eigen::MatrixXd> all_cluster_patterns(int k_users);

void write_results_csv(const std::string& path,
                       const std::vector<std::pair<double, RunResult>>& rows,
                       bool with_corr);
void export_plotdata(const std::string& results_csv, const std::string& out_dir);

}  // namespace cfnoma::harness
