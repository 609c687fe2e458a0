#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cfnoma/harness.hpp"

namespace fs = std::filesystem;
using namespace cfnoma;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string method;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--method", args.method,
                  "method name (overrides the config)");
  cmd->add_option("--seed", args.seed, "seed (overrides the config)")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--override", args.overrides,
                  "config override key=value (repeatable)");
}

harness::ExperimentConfig resolve(const CommonArgs& args) {
  harness::ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = harness::load_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (!args.method.empty()) cfg.method.name = args.method;
  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must be key=value: " + kv);
    cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.network.validate();
  return cfg;
}

void echo_config(const harness::ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream out(fs::path(cfg.out_dir) / "config_used.json");
  out << cfg.to_json().dump(2);
}

int cmd_generate(const CommonArgs& args) {
  const auto cfg = resolve(args);
  echo_config(cfg);
  const struct {
    const char* name;
    int batches;
    std::uint64_t salt;
  } splits[] = {{"train", cfg.data.train_batches, 0x7121},
                {"val", cfg.data.val_batches, 0x7a1},
                {"test", cfg.data.test_batches, 0x7e57}};
  for (const auto& s : splits) {
    Dataset ds = make_dataset(cfg.network, s.batches, cfg.data.batch_size,
                              Rng::mix(cfg.seed, s.salt), s.name);
    const fs::path p = fs::path(cfg.out_dir) / (std::string(s.name) + ".json");
    save_dataset(p.string(), ds, cfg.network);
    std::cout << "wrote " << p.string() << " (" << ds.num_samples()
              << " samples)\n";
  }
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const auto cfg = resolve(args);
  echo_config(cfg);
  auto result = harness::train_method(cfg);
  if (!result)
    throw ConfigError("train: method '" + cfg.method.name +
                      "' is not a learned method");
  const fs::path ckpt = fs::path(cfg.out_dir) / "checkpoint.json";
  result->model.save(ckpt.string());
  result->log.save_csv((fs::path(cfg.out_dir) / "trainlog.csv").string());
  nlohmann::json j;
  j["config"] = cfg.to_json();
  j["train"] = result->log.summary();
  j["checkpoint"] = ckpt.string();
  std::ofstream out(fs::path(cfg.out_dir) / "summary.json");
  out << j.dump(2);
  std::cout << "checkpoint: " << ckpt.string() << "\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& checkpoint) {
  const auto cfg = resolve(args);
  echo_config(cfg);
  std::optional<gnn::GnnModel> model;
  if (cfg.method.name == "autognn" || cfg.method.name == "fixed_gnn") {
    if (checkpoint.empty())
      throw ConfigError("evaluate: --checkpoint is required for " +
                        cfg.method.name);
    if (!fs::exists(checkpoint))
      throw std::runtime_error("evaluate: checkpoint not found: " + checkpoint);
    model = gnn::GnnModel::load(checkpoint);
  }
  const Dataset test = harness::test_dataset(cfg);
  harness::RunResult r =
      harness::evaluate_method(cfg, test, model ? &*model : nullptr);
  std::vector<std::pair<double, harness::RunResult>> rows{
      {cfg.network.corr_data, r}};
  harness::write_results_csv(
      (fs::path(cfg.out_dir) / "results.csv").string(), rows, false);
  nlohmann::json j;
  j["config"] = cfg.to_json();
  j["result"] = r.to_json();
  std::ofstream out(fs::path(cfg.out_dir) / "summary.json");
  out << j.dump(2);
  std::cout << cfg.method.name << ": sum rate " << r.sum_rate
            << " bps/Hz, overhead " << r.overhead_kbit << " Kbit\n";
  return 0;
}

int cmd_compare(const CommonArgs& args) {
  const auto cfg = resolve(args);
  echo_config(cfg);
  const auto rows = harness::compare(cfg);
  for (const auto& r : rows)
    std::cout << r.method << ": " << r.sum_rate << " bps/Hz, "
              << r.overhead_kbit << " Kbit\n";
  std::cout << "results: " << (fs::path(cfg.out_dir) / "results.csv").string()
            << "\n";
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const auto cfg = resolve(args);
  echo_config(cfg);
  const auto rows = harness::sweep(cfg);
  std::cout << rows.size() << " rows -> "
            << (fs::path(cfg.out_dir) / "results.csv").string() << "\n";
  return 0;
}

int cmd_export_plots(const CommonArgs& args, const std::string& results) {
  const auto cfg = resolve(args);
  const std::string csv =
      results.empty() ? (fs::path(cfg.out_dir) / "results.csv").string()
                      : results;
  if (!fs::exists(csv))
    throw std::runtime_error("export-plots: results not found: " + csv);
  harness::export_plotdata(csv,
                           (fs::path(cfg.out_dir) / "plotdata").string());
  std::cout << "plot data in " << (fs::path(cfg.out_dir) / "plotdata").string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cluster-free NOMA scheduling toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string checkpoint;
  std::string results;

  auto* generate = app.add_subcommand("generate", "write channel datasets");
  add_common(generate, args);
  auto* train = app.add_subcommand("train", "train a learned scheduler");
  add_common(train, args);
  auto* evaluate = app.add_subcommand("evaluate", "evaluate on the test set");
  add_common(evaluate, args);
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint (JSON)");
  auto* compare = app.add_subcommand("compare", "run all configured methods");
  add_common(compare, args);
  auto* sweep = app.add_subcommand("sweep", "sweep data-channel correlation");
  add_common(sweep, args);
  auto* plots = app.add_subcommand("export-plots", "emit x/y series files");
  add_common(plots, args);
  plots->add_option("--results", results, "results.csv to export");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(args);
    if (train->parsed()) return cmd_train(args);
    if (evaluate->parsed()) return cmd_evaluate(args, checkpoint);
    if (compare->parsed()) return cmd_compare(args);
    if (sweep->parsed()) return cmd_sweep(args);
    if (plots->parsed()) return cmd_export_plots(args, results);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
