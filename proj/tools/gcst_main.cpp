#include <gcst/io.hpp>
#include <gcst/margin_lab.hpp>
#include <gcst/rng.hpp>
#include <gcst/selftrain.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* error_kind(gcst::ErrorCode code) {
  switch (code) {
    case gcst::ErrorCode::invalid_argument:
      return "invalid-argument";
    case gcst::ErrorCode::insufficient_class_support:
      return "insufficient-class-support";
    case gcst::ErrorCode::generation_error:
      return "generation-error";
    case gcst::ErrorCode::non_separable:
      return "non-separable";
    case gcst::ErrorCode::parse_error:
      return "parse-error";
    case gcst::ErrorCode::io_error:
      return "io-error";
    case gcst::ErrorCode::config_mismatch:
      return "config-mismatch";
  }
  return "error";
}

// Flag values; only the ones the user actually passed override the config
// file, which in turn overrides the built-in defaults.
struct Cli {
  std::optional<std::string> config_path;
  std::optional<std::string> corpus;
  std::optional<std::string> schema;
  std::optional<std::string> backend;
  std::optional<std::string> endpoint;
  std::optional<double> tau;
  std::optional<double> lr;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> samples_per_class;
  std::optional<std::size_t> k;
  std::optional<std::size_t> m;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> sim;
  bool inf_aug = false;
  std::optional<std::string> cache;
  std::optional<std::string> checkpoint_dir;
  std::optional<std::string> report_dir;
  std::optional<std::string> params_path;

  // marginlab
  double margin_tau = 0.1;
  double growth_lr = 0.1;
  std::size_t growth_steps = 200;
};

void add_data_flags(CLI::App* cmd, Cli& cli) {
  cmd->add_option("--corpus", cli.corpus, "corpus JSONL path");
  cmd->add_option("--schema", cli.schema, "label schema JSON path");
  cmd->add_option("--config", cli.config_path, "run configuration JSON path");
  cmd->add_option("--report-dir", cli.report_dir, "directory for output records");
}

void add_train_flags(CLI::App* cmd, Cli& cli) {
  cmd->add_option("--backend", cli.backend, "generation backend")
      ->check(CLI::IsMember({"mock", "remote"}));
  cmd->add_option("--endpoint", cli.endpoint, "remote generation endpoint URL");
  cmd->add_option("--tau", cli.tau, "soft-target temperature in (0,1]");
  cmd->add_option("--lr", cli.lr, "learning rate");
  cmd->add_option("--iterations", cli.iterations, "self-training iterations");
  cmd->add_option("--samples-per-class", cli.samples_per_class,
                  "S_t: balanced sample size per class");
  cmd->add_option("--k", cli.k, "input augmentations per document");
  cmd->add_option("--m", cli.m, "conditional augmentations per pair");
  cmd->add_option("--epochs", cli.epochs, "update epochs per iteration");
  cmd->add_option("--seed", cli.seed, "root seed");
  cmd->add_option("--sim", cli.sim, "similarity function")
      ->check(CLI::IsMember({"dot", "cosine"}));
  cmd->add_flag("--inf-aug", cli.inf_aug,
                "use input augmentation at inference/evaluation time");
  cmd->add_option("--cache", cli.cache, "generation cache file");
  cmd->add_option("--checkpoint-dir", cli.checkpoint_dir,
                  "checkpoint directory (enables resume)");
}

gcst::RunConfig resolve_config(const Cli& cli) {
  gcst::RunConfig config;
  if (cli.config_path) {
    config = gcst::load_run_config(*cli.config_path);
  }
  auto& train = config.train;
  if (cli.corpus) config.corpus_path = *cli.corpus;
  if (cli.schema) config.schema_path = *cli.schema;
  if (cli.backend) config.backend = *cli.backend;
  if (cli.endpoint) config.remote.endpoint = *cli.endpoint;
  if (cli.tau) train.tau = *cli.tau;
  if (cli.lr) train.lr = *cli.lr;
  if (cli.iterations) train.iterations = *cli.iterations;
  if (cli.samples_per_class) train.samples_per_class = *cli.samples_per_class;
  if (cli.k) train.k_input_augs = *cli.k;
  if (cli.m) train.m_conditional_augs = *cli.m;
  if (cli.epochs) train.epochs_per_iteration = *cli.epochs;
  if (cli.seed) train.seed = *cli.seed;
  if (cli.sim) {
    train.similarity = *cli.sim == "dot" ? gcst::SimilarityKind::dot
                                         : gcst::SimilarityKind::cosine;
  }
  if (cli.inf_aug) train.inference_augmentation = true;
  if (cli.cache) config.cache_path = *cli.cache;
  if (cli.checkpoint_dir) config.checkpoint_dir = *cli.checkpoint_dir;
  if (cli.report_dir) config.report_dir = *cli.report_dir;
  return config;
}

std::unique_ptr<gcst::GenerationBackend> make_backend(
    const gcst::RunConfig& config) {
  if (config.backend == "remote") {
    return std::make_unique<gcst::RemoteBackend>(config.remote);
  }
  return std::make_unique<gcst::MockBackend>(
      gcst::derive_seed(config.train.seed, "mock"));
}

void require_data_paths(const gcst::RunConfig& config) {
  if (config.corpus_path.empty()) {
    gcst::throw_invalid("corpus path not set (use --corpus or the config file)");
  }
  if (config.schema_path.empty()) {
    gcst::throw_invalid("schema path not set (use --schema or the config file)");
  }
}

fs::path report_dir_or(const gcst::RunConfig& config, const char* fallback) {
  return config.report_dir.empty() ? fs::path(fallback) : config.report_dir;
}

fs::path latest_checkpoint(const fs::path& dir) {
  fs::path best;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("iter_") && name.ends_with(".params")) {
      if (best.empty() || entry.path().filename() > best.filename()) {
        best = entry.path();
      }
    }
  }
  if (best.empty()) {
    throw gcst::Error(gcst::ErrorCode::io_error,
                      "no checkpoint found in " + dir.string());
  }
  return best;
}

gcst::ToyEncoderParams load_eval_params(const Cli& cli,
                                        const gcst::RunConfig& config) {
  if (cli.params_path) {
    return gcst::load_params(*cli.params_path);
  }
  if (!config.checkpoint_dir.empty()) {
    return gcst::load_params(latest_checkpoint(config.checkpoint_dir));
  }
  gcst::throw_invalid("no parameters given (use --params or --checkpoint-dir)");
}

int cmd_train(const Cli& cli) {
  auto config = resolve_config(cli);
  require_data_paths(config);
  auto data = gcst::ingest(config.corpus_path, config.schema_path,
                           config.train.max_length);

  auto backend = make_backend(config);
  gcst::GenDict cache(config.cache_path.empty() ? fs::path{}
                                                : config.cache_path);

  std::optional<gcst::CheckpointOptions> checkpoint;
  if (!config.checkpoint_dir.empty()) {
    checkpoint = gcst::CheckpointOptions{config.checkpoint_dir,
                                         gcst::config_hash(config),
                                         config.cache_path};
  }

  const auto result =
      gcst::self_train(data.corpus, data.schema, data.tokenizer, config.train,
                       *backend, cache, checkpoint);

  const fs::path out = report_dir_or(config, "reports");
  std::string lines;
  for (const auto& report : result.reports) {
    lines += gcst::iteration_report_line(report) + "\n";
    std::cout << gcst::iteration_report_line(report) << "\n";
  }
  gcst::atomic_write(out / "reports.jsonl", lines);

  json summary{{"iterations", result.reports.size()},
               {"config_hash", gcst::config_hash(config)}};
  if (result.zero_shot_accuracy) {
    summary["zero_shot_accuracy"] = *result.zero_shot_accuracy;
  }
  if (result.final_accuracy) {
    summary["final_accuracy"] = *result.final_accuracy;
  }
  gcst::atomic_write(out / "train_summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_eval(const Cli& cli) {
  auto config = resolve_config(cli);
  require_data_paths(config);
  auto data = gcst::ingest(config.corpus_path, config.schema_path,
                           config.train.max_length);
  const auto params = load_eval_params(cli, config);

  gcst::EvalOptions options;
  options.similarity = config.train.similarity;
  options.inference_augmentation = config.train.inference_augmentation;
  options.k_input_augs = config.train.k_input_augs;
  options.merge_includes_original = config.train.merge_includes_original;
  options.generation = config.train.generation;

  std::unique_ptr<gcst::GenerationBackend> backend;
  std::unique_ptr<gcst::GenDict> cache;
  if (options.inference_augmentation) {
    backend = make_backend(config);
    cache = std::make_unique<gcst::GenDict>(
        config.cache_path.empty() ? fs::path{} : config.cache_path);
  }

  const auto metrics =
      gcst::evaluate(data.corpus, data.schema, data.tokenizer, params, options,
                     backend.get(), cache.get());
  const auto record = gcst::metrics_record(metrics);
  gcst::atomic_write(report_dir_or(config, "reports") / "metrics.json",
                     record + "\n");
  std::cout << record << "\n";
  return 0;
}

int cmd_pseudolabel(const Cli& cli) {
  auto config = resolve_config(cli);
  require_data_paths(config);
  auto data = gcst::ingest(config.corpus_path, config.schema_path,
                           config.train.max_length);

  gcst::ToyEncoderParams params =
      cli.params_path || !config.checkpoint_dir.empty()
          ? load_eval_params(cli, config)
          : gcst::init_encoder_params(
                data.tokenizer.vocab_size(), config.train.hidden_dim,
                config.train.embed_dim,
                gcst::derive_seed(config.train.seed, "encoder-init"),
                config.train.init_scale, config.train.init_projection_noise);

  auto backend = make_backend(config);
  gcst::GenDict cache(config.cache_path.empty() ? fs::path{}
                                                : config.cache_path);
  gcst::InputAugMap augs;
  if (config.train.input_augmentation) {
    for (const auto& doc : data.corpus.docs) {
      augs.emplace(doc.id, gcst::generate_input_augs(
                               doc, config.train.k_input_augs, *backend, cache,
                               config.train.generation));
    }
  } else {
    augs = gcst::disabled_augmentations(data.corpus.docs);
  }

  const auto outcomes = gcst::pseudo_label_corpus(
      data.corpus.docs, data.schema, params, data.tokenizer, augs,
      config.train.similarity, config.train.tau,
      gcst::MergeOptions{config.train.merge_includes_original});

  std::string lines;
  for (const auto& outcome : outcomes) {
    lines += gcst::pseudo_label_line(outcome, data.schema) + "\n";
  }
  gcst::atomic_write(report_dir_or(config, "reports") / "pseudo_labels.jsonl",
                     lines);
  std::cout << lines;
  return 0;
}

int cmd_marginlab(const Cli& cli) {
  const fs::path out =
      cli.report_dir ? fs::path(*cli.report_dir) : fs::path("reports");
  fs::create_directories(out);

  // derivative fidelity on the reference grid
  bool derivative_ok = true;
  double worst_diff = 0.0;
  const double h = 1e-6;
  for (double tau : {0.1, 0.5, 0.9}) {
    for (double d : {-3.0, -1.0, -0.1, 0.1, 1.0, 3.0}) {
      const double fd =
          (gcst::scalar_loss(d + h, tau) - gcst::scalar_loss(d - h, tau)) /
          (2.0 * h);
      const double diff = std::abs(fd - gcst::scalar_grad(d, tau));
      worst_diff = std::max(worst_diff, diff);
      derivative_ok = derivative_ok && diff < 1e-8;
    }
  }

  // margin growth from the reference start, lr stabilized by halving
  Eigen::VectorXd d0(4);
  d0 << 0.5, -0.7, 2.0, -3.0;
  const auto growth = gcst::stabilized_margin_growth(
      d0, cli.margin_tau, cli.growth_lr, cli.growth_steps);
  const bool growth_ok = growth.run.strict_growth();
  gcst::write_trajectory_csv(out / "margin_growth.csv", "growth", growth.run,
                             cli.margin_tau);

  // bounded optimization against the enumeration oracle
  const std::vector<gcst::LabeledPoint> points = {
      {{2.0, 0.4}, 1},  {{1.5, 1.8}, 1},   {{2.5, -0.9}, 1},
      {{-1.7, 0.6}, 2}, {{-2.2, -1.1}, 2}, {{-1.2, -2.0}, 2}};
  const auto oracle = gcst::max_margin_direction(points);
  const auto bounded = gcst::run_bounded_max_margin(
      points, cli.margin_tau, 0.01, {2.0, 5.0, 10.0, 50.0}, 4000);
  gcst::write_bounded_csv(out / "margin_bounded.csv", "bounded", bounded,
                          cli.margin_tau);

  json angles = json::array();
  bool bounded_ok = true;
  double previous = 181.0;
  for (const auto& stage : bounded.stages) {
    const double angle =
        gcst::angle_between_deg(stage.direction(), oracle.direction);
    angles.push_back({{"bound", stage.bound}, {"angle_deg", angle}});
    bounded_ok = bounded_ok && angle < previous;
    previous = angle;
  }
  bounded_ok = bounded_ok && previous < 2.0;

  json summary{
      {"derivative_check", derivative_ok ? "pass" : "fail"},
      {"derivative_max_abs_diff", worst_diff},
      {"theorem1", growth_ok ? "pass" : "fail"},
      {"theorem1_lr", growth.lr},
      {"theorem1_steps", cli.growth_steps},
      {"theorem2", bounded_ok ? "pass" : "fail"},
      {"theorem2_angles", angles},
      {"oracle_margin", oracle.margin},
  };
  gcst::atomic_write(out / "margin_summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << "\n";
  return derivative_ok && growth_ok && bounded_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Self-training engine for zero-shot text classification: "
      "sentence-alignment scoring, temperature-controlled contrastive "
      "losses, generation-backed augmentation with caching, and a margin "
      "laboratory."};
  app.require_subcommand(1);

  Cli cli;
  auto* train = app.add_subcommand("train", "run the self-training loop");
  add_data_flags(train, cli);
  add_train_flags(train, cli);

  auto* eval = app.add_subcommand("eval", "evaluate parameters on a corpus");
  add_data_flags(eval, cli);
  add_train_flags(eval, cli);
  eval->add_option("--params", cli.params_path, "encoder checkpoint file");

  auto* pseudo = app.add_subcommand(
      "pseudolabel", "emit (id, pseudo_label, confidence) records");
  add_data_flags(pseudo, cli);
  add_train_flags(pseudo, cli);
  pseudo->add_option("--params", cli.params_path, "encoder checkpoint file");

  auto* margin = app.add_subcommand(
      "marginlab", "margin-growth and max-margin verification runs");
  margin->add_option("--report-dir", cli.report_dir,
                     "directory for CSV and summary outputs");
  margin->add_option("--tau", cli.margin_tau, "temperature in (0,1)");
  margin->add_option("--lr", cli.growth_lr, "initial growth step size");
  margin->add_option("--steps", cli.growth_steps, "growth steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    app.exit(e);
    std::cerr << gcst::error_record("usage", e.what()) << "\n";
    return 1;
  }

  try {
    if (train->parsed()) {
      return cmd_train(cli);
    }
    if (eval->parsed()) {
      return cmd_eval(cli);
    }
    if (pseudo->parsed()) {
      return cmd_pseudolabel(cli);
    }
    return cmd_marginlab(cli);
  } catch (const gcst::Error& e) {
    std::cerr << gcst::error_record(error_kind(e.code()), e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << gcst::error_record("error", e.what()) << "\n";
    return 2;
  }
}
