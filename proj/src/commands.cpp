#include "ocacnn/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "ocacnn/checkpoint.hpp"
#include "ocacnn/error.hpp"

namespace fs = std::filesystem;

namespace ocacnn::cli {

namespace {

std::string format_g(double v, int digits = 9) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void prepare_run_dir(const RunConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  config.write_resolved(out_dir / kResolvedConfigFile);
}

std::string require_target(const RunConfig& config, const DatasetManifest& manifest) {
  const std::string& target = config.get("train.target");
  if (target.empty()) throw ConfigError("train.target is not set");
  const auto ids = manifest.identities();
  if (std::find(ids.begin(), ids.end(), target) == ids.end()) {
    throw DataError("target '" + target + "' is not an identity of the dataset");
  }
  return target;
}

std::string epoch_file(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu.ock", epoch);
  return buf;
}

}  // namespace

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

DatasetManifest load_dataset(const RunConfig& config) {
  const fs::path root = config.get("data.root");
  if (root.empty()) throw ConfigError("data.root is not set");
  if (fs::exists(root / kManifestFile)) return read_manifest(root / kManifestFile);
  return ingest_directory(root, config.ingest());
}

int cmd_gen_data(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  const GeneratorConfig gen = config.generator();
  gen.validate();
  const DatasetManifest manifest = generate_identity_set(gen, out_dir);
  config.write_resolved(out_dir / kResolvedConfigFile);
  log << "wrote " << manifest.entries.size() << " images of " << gen.identities << " identities to "
      << out_dir.string() << '\n';
  return kOk;
}

int cmd_train(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  const DatasetManifest manifest = load_dataset(config);
  const std::string target = require_target(config, manifest);
  const ArchConfig arch = config.arch();
  const TrainOptions options = config.train_options();
  prepare_run_dir(config, out_dir);

  const ImageStore store(manifest);
  const ProtocolView view = build_splits(manifest, target, config.get_double("data.ratio"),
                                         config.get_u64("data.max_unknown_per_identity"));
  const bool has_lc = options.mode != TrainMode::autoencoder_only;

  std::ofstream loss = open_out(out_dir / "loss.tsv");
  loss << (has_lc ? "step\tL_c\tL_r\tL_t\n" : "step\tL_r\tL_t\n");
  const CheckpointMeta base_meta{{"target", target},
                                 {"mode", std::string(to_string(options.mode))},
                                 {"seed", std::to_string(options.seed)}};
  fs::path last_good;

  TrainCallbacks callbacks;
  callbacks.on_step = [&](const StepLosses& s) {
    loss << s.step;
    if (s.lc) loss << '\t' << format_g(*s.lc, 17);
    loss << '\t' << format_g(s.lr, 17) << '\t' << format_g(s.lt, 17) << '\n';
    loss.flush();
  };
  callbacks.on_epoch = [&](std::size_t epoch, const Trainer& trainer) {
    CheckpointMeta meta = base_meta;
    meta["epoch"] = std::to_string(epoch);
    meta["step"] = std::to_string(trainer.steps());
    const fs::path file = out_dir / epoch_file(epoch);
    save_params(trainer.params(), file, meta, &trainer.optimizer());
    last_good = file;
    log << "epoch " << epoch << " done, " << trainer.steps() << " steps\n";
  };

  try {
    const TrainResult result = train_target(manifest, store, view, arch, options, callbacks);
    CheckpointMeta meta = base_meta;
    meta["epoch"] = std::to_string(options.epochs);
    meta["step"] = std::to_string(result.history.size());
    save_params(result.params, out_dir / "final.ock", meta, &result.optimizer);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + "; last good checkpoint: " +
                         (last_good.empty() ? std::string("none") : last_good.string()));
  }
  log << "wrote " << (out_dir / "final.ock").string() << '\n';
  return kOk;
}

int cmd_eval(const RunConfig& config, const fs::path& checkpoint, const fs::path& out_dir, std::ostream& log) {
  const ArchConfig arch = config.arch();
  const Checkpoint ckpt = load_params(checkpoint, arch);
  const DatasetManifest manifest = load_dataset(config);
  RunConfig effective = config;
  if (effective.get("train.target").empty() && ckpt.meta.contains("target")) {
    effective.set("train.target", ckpt.meta.at("target"));
  }
  const std::string target = require_target(effective, manifest);
  prepare_run_dir(effective, out_dir);

  const ImageStore store(manifest);
  const ProtocolView view = build_splits(manifest, target, config.get_double("data.ratio"),
                                         config.get_u64("data.max_unknown_per_identity"));
  const ScoreMode mode = score_mode_for(parse_train_mode(effective.get("train.mode")));
  const auto samples = score_samples(ckpt.params, manifest, store, view, mode);
  const RocResult roc = auroc(samples);

  std::ofstream scores = open_out(out_dir / "scores.tsv");
  scores << "identity\tis_target\tscore\n";
  for (const auto& s : samples) {
    scores << s.identity << '\t' << (s.is_target ? 1 : 0) << '\t' << format_g(s.score, 17) << '\n';
  }
  open_out(out_dir / "auroc.txt") << format_g(roc.auroc, 17) << '\n';
  log << "target " << target << " (" << to_string(mode) << "): AUROC " << format_g(roc.auroc, 6) << " over "
      << roc.n_target << " target and " << roc.n_unknown << " unknown samples\n";
  return kOk;
}

int cmd_protocol(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  const DatasetManifest manifest = load_dataset(config);
  ProtocolOptions options = config.protocol();
  if (!config.get("train.target").empty()) options.targets = {config.get("train.target")};
  prepare_run_dir(config, out_dir);

  const ImageStore store(manifest);
  ProtocolReport report = run_protocol(manifest, store, options, options.train.mode, [&](const TargetResult& r) {
    log << to_string(options.train.mode) << " seed " << r.seed << " target " << r.target << ": "
        << (r.failed ? "FAILED (" + r.error + ")" : format_g(r.auroc, 6)) << '\n';
  });
  report.config = config.resolved();
  open_out(out_dir / "report.tsv") << format_machine(report);
  const std::string table = format_table(std::span<const ProtocolReport>(&report, 1));
  open_out(out_dir / "report.txt") << table;
  log << table;
  return report.failures == report.results.size() ? kNumerical : kOk;
}

int cmd_ablate(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  const DatasetManifest manifest = load_dataset(config);
  ProtocolOptions options = config.protocol();
  if (!config.get("train.target").empty()) options.targets = {config.get("train.target")};
  prepare_run_dir(config, out_dir);

  const ImageStore store(manifest);
  AblationReport ablation;
  for (TrainMode mode : config.eval_modes()) {
    ProtocolOptions o = options;
    o.train.mode = mode;
    ablation.reports.push_back(run_protocol(manifest, store, o, mode, [&](const TargetResult& r) {
      log << to_string(mode) << " seed " << r.seed << " target " << r.target << ": "
          << (r.failed ? "FAILED (" + r.error + ")" : format_g(r.auroc, 6)) << '\n';
    }));
    ablation.reports.back().config = config.resolved();
  }
  for (const auto& a : ablation.reports) {
    for (const auto& b : ablation.reports) {
      if (&a == &b) continue;
      ablation.differences.emplace_back(std::string(to_string(a.mode)) + " - " + std::string(to_string(b.mode)),
                                        a.mean - b.mean);
    }
  }
  std::string machine;
  for (const auto& r : ablation.reports) machine += format_machine(r);
  open_out(out_dir / "ablation.tsv") << machine;
  const std::string text = format_table(ablation.reports) + format_differences(ablation);
  open_out(out_dir / "ablation.txt") << text;
  log << text;
  return kOk;
}

int cmd_gradcheck(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  prepare_run_dir(config, out_dir);
  const ArchConfig arch = ArchConfig::tiny();
  const ModelGradCheck check =
      model_gradient_check(arch, config.get_u64("train.seed"), 2, config.get_double("loss.lambda_r"));
  const auto& r = check.report;
  std::string text = "max relative error: " + format_g(r.max_rel_error, 6) + "\n";
  text += "worst: " + check.names.at(r.worst_param) + "[" + std::to_string(r.worst_coord) +
          "] analytic " + format_g(r.worst_analytic, 12) + " numeric " + format_g(r.worst_numeric, 12) + "\n";
  text += "coordinates checked: " + std::to_string(r.coords_checked) + "\n";
  open_out(out_dir / "gradcheck.txt") << text;
  log << text;
  if (!(r.max_rel_error <= kGradCheckTolerance)) {
    throw NumericalError("gradient check failed: max relative error " + format_g(r.max_rel_error, 6) +
                         " exceeds " + format_g(kGradCheckTolerance, 3));
  }
  return kOk;
}

int cmd_export_features(const RunConfig& config, const fs::path& checkpoint, const fs::path& out_dir,
                        std::ostream& log) {
  const ArchConfig arch = config.arch();
  const Checkpoint ckpt = load_params(checkpoint, arch);
  const DatasetManifest manifest = load_dataset(config);
  RunConfig effective = config;
  if (effective.get("train.target").empty() && ckpt.meta.contains("target")) {
    effective.set("train.target", ckpt.meta.at("target"));
  }
  const std::string target = require_target(effective, manifest);
  prepare_run_dir(effective, out_dir);
  const ImageStore store(manifest);
  export_features(ckpt.params, manifest, store, target, out_dir);
  log << "wrote features of " << manifest.entries.size() << " images to " << out_dir.string() << '\n';
  return kOk;
}

}  // namespace ocacnn::cli
