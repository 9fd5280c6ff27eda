#include "lhn/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "lhn/binary_io.hpp"
#include "lhn/eval.hpp"
#include "lhn/hypernet.hpp"
#include "lhn/ingest.hpp"
#include "lhn/synthetic.hpp"

namespace lhn::cli {

namespace fs = std::filesystem;

void RunConfig::validate(bool needs_data) const {
  if (needs_data) {
    if (data.empty()) throw ConfigError("--data is required");
    if (!fs::is_regular_file(data)) throw ConfigError("data file not found: " + data.string());
  }
  if (!(sampling_rate_hz > 0.0)) throw ConfigError("--rate must be positive");
  if (!(window_seconds > 0.0)) throw ConfigError("--window-seconds must be positive");
  if (window_seconds * sampling_rate_hz < 1.0) throw ConfigError("window is shorter than one sample");
  if (hyper.batch_size == 0) throw ConfigError("--batch-size must be positive");
  if (!(hyper.learning_rate >= 0.0)) throw ConfigError("--lr must be non-negative");
  if (!(hyper.momentum >= 0.0 && hyper.momentum < 1.0)) throw ConfigError("--momentum must lie in [0, 1)");
  if (components == 0) throw ConfigError("--components must be at least 1");
  if (threads == 0) throw ConfigError("--threads must be at least 1");
}

namespace {

struct Paths {
  fs::path params;
  fs::path model;
  fs::path log;
  fs::path out;
};

Dataset load_dataset(const RunConfig& cfg) {
  CsvSchema schema;
  schema.channel_columns = cfg.channels;
  schema.label_column = cfg.label_column;
  schema.subject_column = cfg.subject_column;
  schema.sampling_rate_hz = cfg.sampling_rate_hz;
  try {
    return build_dataset(load_csv(cfg.data, schema), cfg.window_seconds, cfg.stride);
  } catch (const SchemaError& e) {
    throw ConfigError(cfg.data.string() + ": " + e.what());
  }
}

fs::path resolve(const RunConfig& cfg, const fs::path& given, const char* fallback) {
  if (!given.empty()) return given;
  return cfg.out_dir / fallback;
}

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.out_dir.string());
}

NetworkConfig checked_preset(const RunConfig& cfg, const Dataset& ds) {
  try {
    return preset(cfg.arch, ds.window_length, ds.channels, ds.num_classes());
  } catch (const ArchitectureInfeasibleError& e) {
    throw ConfigError(std::string("architecture infeasible for a ") + std::to_string(ds.window_length) + "x" +
                      std::to_string(ds.channels) + " window: " + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

void require_file(const fs::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::is_regular_file(p)) throw ConfigError(std::string("file not found: ") + p.string());
}

// The attached network and the dataset must agree on input shape and classes.
void check_network_matches(const NetworkConfig& net, const Dataset& ds, const RunConfig& cfg, bool arch_given) {
  if (arch_given && net.name != cfg.arch) {
    throw Error("architecture mismatch: params are '" + net.name + "', --arch is '" + cfg.arch + "'");
  }
  if (net.input_h != ds.window_length || net.input_w != ds.channels || net.num_classes != ds.num_classes()) {
    throw Error("params expect " + std::to_string(net.input_h) + "x" + std::to_string(net.input_w) + " windows and " +
                std::to_string(net.num_classes) + " classes; data gives " + std::to_string(ds.window_length) + "x" +
                std::to_string(ds.channels) + " and " + std::to_string(ds.num_classes()));
  }
}

void check_model_matches(const LhnModel& model, const NetworkConfig& net, const NetworkParams& params) {
  if (model.network_hash != network_hash(net, params)) {
    throw Error("LHN model was fitted on a different network (hash " + io::hex64(model.network_hash) + ")");
  }
}

int cmd_train(const RunConfig& cfg, const Paths& paths, std::ostream& out) {
  cfg.validate();
  const Dataset ds = load_dataset(cfg);
  const NetworkConfig net = checked_preset(cfg, ds);
  ensure_out_dir(cfg);
  const auto params_path = resolve(cfg, paths.params, "params.lcnn");
  const auto log_path = resolve(cfg, paths.log, "train_log.csv");

  std::ostringstream log;
  log << "epoch,loss,train_recall\n";
  out << "epoch,loss,train_recall\n";
  auto on_epoch = [&](const EpochStats& s) {
    std::ostringstream line;
    line.precision(8);
    line << s.epoch << ',' << s.loss << ',' << s.train_recall << '\n';
    log << line.str();
    out << line.str() << std::flush;
  };
  const NetworkParams params = train(net, ds, cfg.hyper, on_epoch);
  save_network(params_path, net, params);
  io::write_text_atomic(log_path, log.str());
  out << "wrote " << params_path.string() << " (" << net.name << ", " << params.parameter_count()
      << " parameters, hash " << io::hex64(network_hash(net, params)) << ")\n";
  return kExitOk;
}

int cmd_lhn_fit(const RunConfig& cfg, const Paths& paths, bool arch_given, bool no_reduction, std::ostream& out) {
  cfg.validate();
  require_file(paths.params, "--params");
  const auto before = io::fnv1a(io::read_file(paths.params));
  NetworkConfig net;
  NetworkParams params;
  load_network(paths.params, net, params);
  const Dataset ds = load_dataset(cfg);
  check_network_matches(net, ds, cfg, arch_given);

  LhnOptions opts;
  opts.components = cfg.components;
  opts.reduce = !no_reduction;
  opts.classifier_hyper = cfg.hyper;
  const LhnModel model = lhn_fit(params, net, ds, opts);

  ensure_out_dir(cfg);
  const auto model_path = resolve(cfg, paths.model, "lhn.llhn");
  save_lhn(model_path, model);
  const auto after = io::fnv1a(io::read_file(paths.params));
  if (before != after) throw Error("network parameter file changed during lhn-fit");

  out << "wrote " << model_path.string() << ": " << model.pool_layers() << " pooling layers, latent width "
      << model.latent_dim() << (model.reduced ? "" : " (no reduction)") << '\n';
  out << "params checksum " << io::hex64(before) << " unchanged\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, std::size_t folds, bool ablation, std::ostream& out) {
  cfg.validate();
  const Dataset ds = load_dataset(cfg);
  checked_preset(cfg, ds);
  CvOptions opts;
  opts.folds = folds;
  opts.components = cfg.components;
  opts.network_hyper = cfg.hyper;
  opts.classifier_hyper = cfg.hyper;
  opts.seed = cfg.seed;
  opts.with_ablation = ablation;
  opts.threads = cfg.threads;
  const CvReport report = run_cv(ds, cfg.arch, opts);

  ensure_out_dir(cfg);
  io::write_text_atomic(cfg.out_dir / "cv_results.csv", cv_results_csv(report));
  const auto summary = cv_summary_csv(report);
  io::write_text_atomic(cfg.out_dir / "cv_summary.csv", summary);
  out << summary;
  return kExitOk;
}

int cmd_benchmark(const RunConfig& cfg, const Paths& paths, std::size_t runs, bool welch, std::ostream& out) {
  cfg.validate();
  require_file(paths.params, "--params");
  require_file(paths.model, "--model");
  if (runs < 2) throw ConfigError("--runs must be at least 2");
  NetworkConfig net;
  NetworkParams params;
  load_network(paths.params, net, params);
  const LhnModel model = load_lhn(paths.model);
  check_model_matches(model, net, params);
  const Dataset ds = load_dataset(cfg);
  check_network_matches(net, ds, cfg, false);

  TimingReport report = timing_benchmark([&](const Tensor& x) { return predict(params, net, x); },
                                         [&](const Tensor& x) { return lhn_predict(model, params, net, x); }, ds,
                                         runs, 0.95, welch);
  report.name_a = net.name;
  report.name_b = "lhn";
  ensure_out_dir(cfg);
  io::write_text_atomic(resolve(cfg, paths.out, "timing.csv"), timing_csv(report));
  out << timing_verdict_line(report) << '\n';
  return kExitOk;
}

int cmd_project(const RunConfig& cfg, const Paths& paths, const std::string& layers, std::ostream& out) {
  cfg.validate();
  require_file(paths.params, "--params");
  require_file(paths.model, "--model");
  NetworkConfig net;
  NetworkParams params;
  load_network(paths.params, net, params);
  const LhnModel model = load_lhn(paths.model);
  check_model_matches(model, net, params);
  if (model.requested_components < 2) throw ConfigError("projection needs an LHN fitted with --components >= 2");
  const Dataset ds = load_dataset(cfg);
  check_network_matches(net, ds, cfg, false);

  const auto which = layers == "all" ? ProjectionLayers::all : ProjectionLayers::last;
  const auto rows = export_projection(model, params, net, ds, which);
  ensure_out_dir(cfg);
  const auto path = resolve(cfg, paths.out, layers == "all" ? "projection_all.csv" : "projection_last.csv");
  io::write_text_atomic(path, projection_csv(rows));
  out << "wrote " << path.string() << " (" << rows.size() << " rows, centroid separation " << centroid_separation(rows)
      << ")\n";
  return kExitOk;
}

int cmd_synth(const SyntheticSpec& spec, const fs::path& path, std::ostream& out) {
  if (path.empty()) throw ConfigError("--out is required");
  const auto recs = synthetic_recordings(spec);
  write_recordings_csv(recs, path);
  out << "wrote " << path.string() << " (" << recs.size() << " recordings at " << spec.sampling_rate_hz << " Hz)\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent HyperNet: per-layer PLS features on top of small ConvNets for sensor windows", "lhn"};
  app.require_subcommand(1);
  app.fallthrough();
  // A repeated flag (or a flag repeating a config-file key) takes the last value.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_config("--config", "", "flat key=value file; command-line flags win");

  RunConfig cfg;
  std::string channels_csv;
  app.add_option("--data", cfg.data, "sensor CSV");
  app.add_option("--channels", channels_csv, "comma-separated channel columns (default: all but label/subject)");
  app.add_option("--label-column", cfg.label_column, "label column name")->capture_default_str();
  app.add_option("--subject-column", cfg.subject_column, "subject column name")->capture_default_str();
  app.add_option("--rate", cfg.sampling_rate_hz, "sampling rate in Hz")->capture_default_str();
  app.add_option("--window-seconds", cfg.window_seconds, "window length in seconds")->capture_default_str();
  app.add_option("--stride", cfg.stride, "window stride in samples (0 = window length)")->capture_default_str();
  auto* arch_opt = app.add_option("--arch", cfg.arch, "convnet1 | convnet2 | convnet3")->capture_default_str();
  app.add_option("--epochs", cfg.hyper.epochs, "training epochs")->capture_default_str();
  app.add_option("--batch-size", cfg.hyper.batch_size, "mini-batch size")->capture_default_str();
  app.add_option("--lr", cfg.hyper.learning_rate, "learning rate")->capture_default_str();
  app.add_option("--momentum", cfg.hyper.momentum, "SGD momentum")->capture_default_str();
  app.add_option("--components", cfg.components, "PLS components per pooling layer")->capture_default_str();
  app.add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  app.add_option("--out-dir", cfg.out_dir, "output directory")->envname("LHN_OUTPUT_DIR")->capture_default_str();
  app.add_option("--threads", cfg.threads, "worker threads for cross-validation folds")
      ->envname("LHN_THREADS")
      ->capture_default_str();

  Paths paths;
  bool no_reduction = false;
  std::size_t folds = 10;
  bool ablation = false;
  std::size_t runs = 30;
  bool welch = false;
  std::string layers = "last";
  SyntheticSpec synth;

  auto* train_cmd = app.add_subcommand("train", "train a ConvNet on windowed data");
  train_cmd->add_option("--params", paths.params, "output parameter file (default <out-dir>/params.lcnn)");
  train_cmd->add_option("--log", paths.log, "training log CSV (default <out-dir>/train_log.csv)");

  auto* fit_cmd = app.add_subcommand("lhn-fit", "fit the latent hypernet on a frozen trained network");
  fit_cmd->add_option("--params", paths.params, "trained parameter file");
  fit_cmd->add_option("--model", paths.model, "output LHN model (default <out-dir>/lhn.llhn)");
  fit_cmd->add_flag("--no-reduction", no_reduction, "skip PLS; feed the raw concatenated taps to the classifier");

  auto* eval_cmd = app.add_subcommand("evaluate", "k-fold cross-validation of the ConvNet and its LHN");
  eval_cmd->add_option("--folds", folds, "number of folds")->capture_default_str();
  eval_cmd->add_flag("--ablation", ablation, "also evaluate the LHN without dimensionality reduction");

  auto* bench_cmd = app.add_subcommand("benchmark-time", "compare prediction time of the ConvNet and its LHN");
  bench_cmd->add_option("--params", paths.params, "trained parameter file");
  bench_cmd->add_option("--model", paths.model, "LHN model file");
  bench_cmd->add_option("--runs", runs, "timed executions per system")->capture_default_str();
  bench_cmd->add_flag("--welch", welch, "use Welch's unequal-variance t-test");
  bench_cmd->add_option("--out", paths.out, "timing CSV (default <out-dir>/timing.csv)");

  auto* proj_cmd = app.add_subcommand("project", "export a two-component PLS scatter as CSV");
  proj_cmd->add_option("--params", paths.params, "trained parameter file");
  proj_cmd->add_option("--model", paths.model, "LHN model file");
  proj_cmd->add_option("--layers", layers, "last | all")
      ->check(CLI::IsMember({"last", "all"}))
      ->capture_default_str();
  proj_cmd->add_option("--out", paths.out, "output CSV (default <out-dir>/projection_<layers>.csv)");

  auto* synth_cmd = app.add_subcommand("synth", "write the synthetic two-scale demo dataset");
  synth_cmd->add_option("--out", paths.out, "output CSV");
  synth_cmd->add_option("--subjects", synth.subjects, "recordings per class")->capture_default_str();
  synth_cmd->add_option("--windows", synth.windows_per_recording, "windows per recording")->capture_default_str();
  synth_cmd->add_option("--window-length", synth.window_length, "samples per window")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "noise standard deviation")->capture_default_str();
  synth_cmd->add_option("--synth-seed", synth.seed, "generator seed")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  cfg.hyper.seed = cfg.seed;
  if (!channels_csv.empty()) {
    std::stringstream ss(channels_csv);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) cfg.channels.push_back(item);
  }

  try {
    if (*train_cmd) return cmd_train(cfg, paths, out);
    if (*fit_cmd) return cmd_lhn_fit(cfg, paths, arch_opt->count() > 0, no_reduction, out);
    if (*eval_cmd) return cmd_evaluate(cfg, folds, ablation, out);
    if (*bench_cmd) return cmd_benchmark(cfg, paths, runs, welch, out);
    if (*proj_cmd) return cmd_project(cfg, paths, layers, out);
    if (*synth_cmd) return cmd_synth(synth, paths.out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace lhn::cli
