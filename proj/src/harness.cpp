#include "cfnoma/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace cfnoma::harness {

namespace fs = std::filesystem;

namespace {

nlohmann::json gnn_to_json(const gnn::GnnConfig& g) {
  return {{"layers", g.layers},
          {"embed_dim", g.embed_dim},
          {"hidden", g.hidden},
          {"s_temp", g.s_temp},
          {"w_scale", g.w_scale}};
}

gnn::GnnConfig gnn_from_json(const nlohmann::json& j) {
  gnn::GnnConfig g;
  g.layers = j.value("layers", g.layers);
  g.embed_dim = j.value("embed_dim", g.embed_dim);
  g.hidden = j.value("hidden", g.hidden);
  g.s_temp = j.value("s_temp", g.s_temp);
  g.w_scale = j.value("w_scale", g.w_scale);
  return g;
}

nlohmann::json train_to_json(const bilevel::TrainConfig& t) {
  return {{"inner_steps", t.inner_steps},
          {"inner_lr", t.inner_lr},
          {"outer_lr", t.outer_lr},
          {"outer_lr_decay", t.outer_lr_decay},
          {"neumann_terms", t.neumann_terms},
          {"fd_eps", t.fd_eps},
          {"epochs", t.epochs},
          {"rate_penalty", t.rate_penalty},
          {"seed", t.seed},
          {"anneal_temp", t.anneal_temp},
          {"s_temp_final", t.s_temp_final}};
}

bilevel::TrainConfig train_from_json(const nlohmann::json& j) {
  bilevel::TrainConfig t;
  t.inner_steps = j.value("inner_steps", t.inner_steps);
  t.inner_lr = j.value("inner_lr", t.inner_lr);
  t.outer_lr = j.value("outer_lr", t.outer_lr);
  t.outer_lr_decay = j.value("outer_lr_decay", t.outer_lr_decay);
  t.neumann_terms = j.value("neumann_terms", t.neumann_terms);
  t.fd_eps = j.value("fd_eps", t.fd_eps);
  t.epochs = j.value("epochs", t.epochs);
  t.rate_penalty = j.value("rate_penalty", t.rate_penalty);
  t.seed = j.value("seed", t.seed);
  t.anneal_temp = j.value("anneal_temp", t.anneal_temp);
  t.s_temp_final = j.value("s_temp_final", t.s_temp_final);
  return t;
}

nlohmann::json admm_to_json(const admm::AdmmConfig& a) {
  return {{"rho", a.rho},
          {"max_iters", a.max_iters},
          {"consensus_tol", a.consensus_tol},
          {"binary_tol", a.binary_tol},
          {"pgd_max_steps", a.pgd_max_steps},
          {"pgd_tol", a.pgd_tol},
          {"hinge_weight", a.hinge_weight},
          {"adapt_rho", a.adapt_rho}};
}

admm::AdmmConfig admm_from_json(const nlohmann::json& j) {
  admm::AdmmConfig a;
  a.rho = j.value("rho", a.rho);
  a.max_iters = j.value("max_iters", a.max_iters);
  a.consensus_tol = j.value("consensus_tol", a.consensus_tol);
  a.binary_tol = j.value("binary_tol", a.binary_tol);
  a.pgd_max_steps = j.value("pgd_max_steps", a.pgd_max_steps);
  a.pgd_tol = j.value("pgd_tol", a.pgd_tol);
  a.hinge_weight = j.value("hinge_weight", a.hinge_weight);
  a.adapt_rho = j.value("adapt_rho", a.adapt_rho);
  return a;
}

MethodConfig method_from_json(const nlohmann::json& j) {
  MethodConfig m;
  m.name = j.at("name").get<std::string>();
  const std::vector<std::string> known{"autognn", "fixed_gnn",
                                       "admm_distributed", "admm_centralized",
                                       "beta_frozen_oracle"};
  if (std::find(known.begin(), known.end(), m.name) == known.end())
    throw ConfigError("unknown method: " + m.name);
  if (j.contains("gnn")) m.gnn = gnn_from_json(j.at("gnn"));
  if (j.contains("train")) m.train = train_from_json(j.at("train"));
  if (j.contains("admm")) m.admm = admm_from_json(j.at("admm"));
  m.cluster_pattern = j.value("cluster_pattern", m.cluster_pattern);
  return m;
}

nlohmann::json method_to_json(const MethodConfig& m) {
  return {{"name", m.name},
          {"gnn", gnn_to_json(m.gnn)},
          {"train", train_to_json(m.train)},
          {"admm", admm_to_json(m.admm)},
          {"cluster_pattern", m.cluster_pattern}};
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("network")) cfg.network = network_config_from_json(j.at("network"));
  if (j.contains("data")) {
    const auto& d = j.at("data");
    cfg.data.train_batches = d.value("train_batches", cfg.data.train_batches);
    cfg.data.val_batches = d.value("val_batches", cfg.data.val_batches);
    cfg.data.test_batches = d.value("test_batches", cfg.data.test_batches);
    cfg.data.batch_size = d.value("batch_size", cfg.data.batch_size);
  }
  if (j.contains("method")) cfg.method = method_from_json(j.at("method"));
  if (j.contains("methods"))
    for (const auto& jm : j.at("methods"))
      cfg.methods.push_back(method_from_json(jm));
  if (j.contains("sweep_corr"))
    cfg.sweep_corr = j.at("sweep_corr").get<std::vector<double>>();
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["network"] = cfnoma::to_json(network);
  j["data"] = {{"train_batches", data.train_batches},
               {"val_batches", data.val_batches},
               {"test_batches", data.test_batches},
               {"batch_size", data.batch_size}};
  j["method"] = method_to_json(method);
  if (!methods.empty()) {
    auto& arr = j["methods"] = nlohmann::json::array();
    for (const auto& m : methods) arr.push_back(method_to_json(m));
  }
  if (!sweep_corr.empty()) j["sweep_corr"] = sweep_corr;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  return j;
}

void ExperimentConfig::apply_override(const std::string& key,
                                      const std::string& value) {
  nlohmann::json j = to_json();
  std::string pointer = "/";
  for (char c : key) pointer += (c == '.') ? '/' : c;
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    parsed = value;  // plain string
  }
  j[nlohmann::json::json_pointer(pointer)] = parsed;
  *this = from_json(j);
}

std::string ExperimentConfig::hash() const {
  const std::string dump = to_json().dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config: " + path);
  nlohmann::json j;
  in >> j;
  return ExperimentConfig::from_json(j);
}

nlohmann::json RunResult::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["sum_rate"] = sum_rate;
  j["overhead_kbit"] = overhead_kbit;
  j["sic_complexity"] = sic_complexity;
  j["layers_or_iters"] = layers_or_iters;
  j["runtime_seconds"] = runtime_seconds;
  j["per_sample_rate"] = per_sample_rate;
  j["per_sample_kbit"] = per_sample_kbit;
  j["per_sample_sic"] = per_sample_sic;
  j["per_sample_layers_or_iters"] = per_sample_layers_or_iters;
  j["config_hash"] = config_hash;
  return j;
}

void finalize(RunResult& r) {
  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  r.sum_rate = mean(r.per_sample_rate);
  r.overhead_kbit = mean(r.per_sample_kbit);
  r.sic_complexity = mean(r.per_sample_sic);
  r.layers_or_iters = mean(r.per_sample_layers_or_iters);
}

Dataset test_dataset(const ExperimentConfig& cfg) {
  return make_dataset(cfg.network, cfg.data.test_batches, cfg.data.batch_size,
                      Rng::mix(cfg.seed, 0x7e57), "test");
}

std::optional<bilevel::TrainResult> train_method(const ExperimentConfig& cfg) {
  const MethodConfig& m = cfg.method;
  if (m.name != "autognn" && m.name != "fixed_gnn") return std::nullopt;
  Dataset train = make_dataset(cfg.network, cfg.data.train_batches,
                               cfg.data.batch_size,
                               Rng::mix(cfg.seed, 0x7121), "train");
  Dataset val =
      make_dataset(cfg.network, cfg.data.val_batches, cfg.data.batch_size,
                   Rng::mix(cfg.seed, 0x7a1), "val");
  bilevel::TrainConfig tc = m.train;
  tc.seed = Rng::mix(cfg.seed, tc.seed);
  gnn::Mode mode = m.name == "autognn" ? gnn::Mode::kAuto : gnn::Mode::kFixed;
  gnn::GnnConfig gc = m.gnn;
  if (gc.w_scale <= 0.0)
    gc.w_scale = std::sqrt(cfg.network.power_budget() /
                           (2.0 * cfg.network.num_antennas *
                            cfg.network.users_per_bs));
  return bilevel::train(cfg.network, gc, tc, mode, std::move(train),
                        std::move(val));
}

Eigen::MatrixXd cluster_pattern_beta(const std::string& name, int k_users) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k_users, k_users);
  if (name == "none") return b;
  if (name == "pairs") {
    for (int a = 0; a + 1 < k_users; a += 2) b(a + 1, a) = 1.0;  // stronger decodes weaker
    return b;
  }
  if (name == "chain") {
    for (int i = 0; i < k_users; ++i)
      for (int k = 0; k < i; ++k) b(i, k) = 1.0;
    return b;
  }
  throw ConfigError("unknown cluster pattern: " + name);
}

std::vector<Eigen::MatrixXd> all_valid_beta(int k_users) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < k_users; ++i)
    for (int k = i + 1; k < k_users; ++k) pairs.emplace_back(i, k);
  const int n = static_cast<int>(pairs.size());
  std::vector<Eigen::MatrixXd> out;
  std::vector<int> choice(n, 0);  // 0: none, 1: b(i,k)=1, 2: b(k,i)=1
  while (true) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k_users, k_users);
    for (int p = 0; p < n; ++p) {
      if (choice[p] == 1) b(pairs[p].first, pairs[p].second) = 1.0;
      if (choice[p] == 2) b(pairs[p].second, pairs[p].first) = 1.0;
    }
    out.push_back(std::move(b));
    int p = 0;
    while (p < n && ++choice[p] == 3) choice[p++] = 0;
    if (p == n) break;
  }
  return out;
}

std::vector<Eigen::MatrixXd> all_cluster_patterns(int k_users) {
  // enumerate set partitions, then chain-decode inside each block
  std::vector<std::vector<int>> assignment;  // user -> block id stack
  std::vector<Eigen::MatrixXd> out;
  std::vector<int> block_of(k_users, 0);
  std::function<void(int, int)> rec = [&](int user, int n_blocks) {
    if (user == k_users) {
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k_users, k_users);
      for (int i = 0; i < k_users; ++i)
        for (int k = 0; k < i; ++k)
          if (block_of[i] == block_of[k]) b(i, k) = 1.0;
      out.push_back(std::move(b));
      return;
    }
    for (int blk = 0; blk <= n_blocks; ++blk) {
      block_of[user] = blk;
      rec(user + 1, std::max(n_blocks, blk + 1));
    }
  };
  rec(0, 0);
  return out;
}

namespace {

void add_sample(RunResult& r, double rate, double kbit, double sic,
                double layers_or_iters) {
  r.per_sample_rate.push_back(rate);
  r.per_sample_kbit.push_back(kbit);
  r.per_sample_sic.push_back(sic);
  r.per_sample_layers_or_iters.push_back(layers_or_iters);
}

double sic_of(const SchedulingDecision& d) {
  double s = 0.0;
  for (const auto& b : d.beta) s += b.sum() - b.diagonal().sum();
  return s;
}

}  // namespace

RunResult evaluate_method(const ExperimentConfig& cfg, const Dataset& test,
                          const gnn::GnnModel* model) {
  const MethodConfig& m = cfg.method;
  RunResult r;
  r.method = m.name;
  r.config_hash = cfg.hash();
  const auto t0 = std::chrono::steady_clock::now();

  int sample_idx = 0;
  for (const auto& batch : test.batches) {
    for (const auto& ch : batch) {
      if (m.name == "autognn" || m.name == "fixed_gnn") {
        if (!model) throw std::runtime_error("evaluate: missing checkpoint");
        Rng rng(Rng::mix(cfg.seed, 0xE7a1 + sample_idx));
        gnn::Mode mode =
            m.name == "autognn" ? gnn::Mode::kAuto : gnn::Mode::kFixed;
        gnn::ForwardResult fwd = gnn::forward(
            ch, *model, mode, gnn::SampleMode::kHard, gnn::NoiseMode::kPerBs,
            rng);
        const RateReport rep = rates::evaluate(fwd.decision, ch, cfg.network);
        add_sample(r, rep.sum_rate, fwd.trace.bits / 1000.0,
                   rep.sic_complexity, fwd.trace.active_layers);
      } else if (m.name == "admm_distributed" || m.name == "admm_centralized") {
        admm::AdmmResult res = m.name == "admm_distributed"
                                   ? admm::run_distributed(ch, cfg.network, m.admm)
                                   : admm::run_centralized(ch, cfg.network, m.admm);
        add_sample(r, res.report.sum_rate, res.report.exchanged_bits / 1000.0,
                   sic_of(res.decision), res.report.iterations);
      } else if (m.name == "beta_frozen_oracle") {
        const Eigen::MatrixXd pattern =
            cluster_pattern_beta(m.cluster_pattern, cfg.network.users_per_bs);
        std::vector<Eigen::MatrixXd> beta(cfg.network.num_bs, pattern);
        admm::FrozenBetaOptions opt;
        SchedulingDecision d = admm::solve_frozen_beta(ch, cfg.network, beta, opt);
        const RateReport rep = rates::evaluate(d, ch, cfg.network);
        const long long bits =
            static_cast<long long>(cfg.network.num_bs) * cfg.network.num_bs *
                cfg.network.users_per_bs * cfg.network.num_antennas * 64 +
            static_cast<long long>(cfg.network.num_bs) *
                (cfg.network.num_antennas * cfg.network.users_per_bs * 64 +
                 2 * cfg.network.users_per_bs * cfg.network.users_per_bs * 32);
        add_sample(r, rep.sum_rate, bits / 1000.0, rep.sic_complexity,
                   opt.rounds);
      } else {
        throw ConfigError("unknown method: " + m.name);
      }
      ++sample_idx;
    }
  }
  finalize(r);
  r.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return r;
}

std::vector<RunResult> compare(const ExperimentConfig& cfg) {
  std::vector<MethodConfig> methods =
      cfg.methods.empty() ? std::vector<MethodConfig>{cfg.method} : cfg.methods;
  const Dataset test = test_dataset(cfg);
  std::vector<RunResult> rows;
  for (const auto& m : methods) {
    ExperimentConfig one = cfg;
    one.method = m;
    one.methods.clear();
    std::optional<bilevel::TrainResult> trained = train_method(one);
    rows.push_back(
        evaluate_method(one, test, trained ? &trained->model : nullptr));
  }
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    std::vector<std::pair<double, RunResult>> tagged;
    for (const auto& r : rows) tagged.emplace_back(cfg.network.corr_data, r);
    write_results_csv((fs::path(cfg.out_dir) / "results.csv").string(), tagged,
                      false);
    nlohmann::json j;
    j["config"] = cfg.to_json();
    auto& arr = j["results"] = nlohmann::json::array();
    for (const auto& r : rows) arr.push_back(r.to_json());
    std::ofstream out(fs::path(cfg.out_dir) / "summary.json");
    out << j.dump(2);
  }
  return rows;
}

std::vector<std::pair<double, RunResult>> sweep(const ExperimentConfig& cfg) {
  if (cfg.sweep_corr.empty())
    throw ConfigError("sweep: sweep_corr list is empty");
  std::vector<std::pair<double, RunResult>> rows;
  for (double corr : cfg.sweep_corr) {
    ExperimentConfig point = cfg;
    point.network.corr_data = corr;
    point.out_dir.clear();
    for (const auto& r : compare(point)) rows.emplace_back(corr, r);
  }
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    const std::string csv = (fs::path(cfg.out_dir) / "results.csv").string();
    write_results_csv(csv, rows, true);
    export_plotdata(csv, (fs::path(cfg.out_dir) / "plotdata").string());
    nlohmann::json j;
    j["config"] = cfg.to_json();
    auto& arr = j["results"] = nlohmann::json::array();
    for (const auto& [corr, r] : rows) {
      nlohmann::json e = r.to_json();
      e["corr_d"] = corr;
      arr.push_back(e);
    }
    std::ofstream out(fs::path(cfg.out_dir) / "summary.json");
    out << j.dump(2);
  }
  return rows;
}

std::pair<RunResult, RunResult> generalization_run(
    const ExperimentConfig& base, const gnn::GnnModel& checkpoint,
    double snr_b) {
  if (checkpoint.num_antennas != base.network.num_antennas ||
      checkpoint.users_per_bs != base.network.users_per_bs)
    throw ConfigError(
        "generalization_run: checkpoint shape does not match the network");
  ExperimentConfig target = base;
  target.network.snr_db = snr_b;
  target.network.p_max = 0.0;  // rederive from the new SNR
  const Dataset test = test_dataset(target);
  const RunResult generalization = evaluate_method(target, test, &checkpoint);
  std::optional<bilevel::TrainResult> retrained = train_method(target);
  if (!retrained)
    throw ConfigError("generalization_run: method must be a learned one");
  const RunResult fresh = evaluate_method(target, test, &retrained->model);
  return {generalization, fresh};
}

RunResult beta_frozen_oracle(const ExperimentConfig& cfg, const Dataset& test) {
  ExperimentConfig one = cfg;
  one.method.name = "beta_frozen_oracle";
  return evaluate_method(one, test, nullptr);
}

void write_results_csv(const std::string& path,
                       const std::vector<std::pair<double, RunResult>>& rows,
                       bool with_corr) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write results: " + path);
  if (with_corr) out << "corr_d,";
  out << "method,test_sum_rate_bps_hz,execution_time_s,"
         "gnn_layers_or_iterations,information_overhead_kbit,sic_complexity\n";
  for (const auto& [corr, r] : rows) {
    if (with_corr) out << corr << ',';
    out << r.method << ',' << r.sum_rate << ',' << r.runtime_seconds << ','
        << r.layers_or_iters << ',' << r.overhead_kbit << ','
        << r.sic_complexity << '\n';
  }
}

void export_plotdata(const std::string& results_csv,
                     const std::string& out_dir) {
  std::ifstream in(results_csv);
  if (!in) throw std::runtime_error("cannot read results: " + results_csv);
  fs::create_directories(out_dir);
  std::string header;
  std::getline(in, header);
  std::stringstream hs(header);
  std::vector<std::string> cols;
  std::string col;
  while (std::getline(hs, col, ',')) cols.push_back(col);
  auto col_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = col_index("corr_d");
  const int im = col_index("method");
  if (ix < 0 || im < 0)
    throw std::runtime_error("plot export needs corr_d and method columns");
  const std::vector<std::pair<std::string, std::string>> metrics{
      {"test_sum_rate_bps_hz", "sum_rate"},
      {"information_overhead_kbit", "overhead"},
      {"sic_complexity", "sic_complexity"}};
  std::map<std::string, std::ofstream> files;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<std::string> fields;
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    for (const auto& [col_name, short_name] : metrics) {
      const int ic = col_index(col_name);
      if (ic < 0) continue;
      const std::string key = short_name + "_" + fields[im] + ".tsv";
      auto it = files.find(key);
      if (it == files.end()) {
        it = files.emplace(key, std::ofstream(fs::path(out_dir) / key)).first;
      }
      it->second << fields[ix] << '\t' << fields[ic] << '\n';
    }
  }
}

}  // namespace cfnoma::harness
