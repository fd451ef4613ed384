#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ocacnn/commands.hpp"

using namespace ocacnn;

namespace {

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::string data;
  std::string target;
  std::string mode;
  std::string out;
  std::string checkpoint;
};

RunConfig build_config(const CommonArgs& a) {
  RunConfig cfg;
  if (!a.config_file.empty()) cfg.load_file(a.config_file);
  for (const auto& s : a.sets) cfg.set_assignment(s);
  if (!a.data.empty()) cfg.set("data.root", a.data);
  if (!a.target.empty()) cfg.set("train.target", a.target);
  if (!a.mode.empty()) cfg.set("train.mode", a.mode);
  return cfg;
}

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, CommonArgs& args,
                      bool data, bool target, bool checkpoint) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("-c,--config", args.config_file, "key=value config file")->check(CLI::ExistingFile);
  sub->add_option("-s,--set", args.sets, "override one config key (key=value)");
  sub->add_option("-o,--out", args.out, "output directory")->required();
  if (data) sub->add_option("-d,--data", args.data, "dataset directory (sets data.root)");
  if (target) {
    sub->add_option("-t,--target", args.target, "target identity (sets train.target)");
    sub->add_option("-m,--mode", args.mode, "full, classifier_only or autoencoder_only (sets train.mode)");
  }
  if (checkpoint) sub->add_option("--checkpoint", args.checkpoint, "checkpoint file")->required();
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-class active authentication CNN: data, training and evaluation"};
  app.require_subcommand(1);
  CommonArgs args;

  auto* gen = add_command(app, "gen-data", "generate the synthetic identity set", args, false, false, false);
  auto* train = add_command(app, "train", "train one target model", args, true, true, false);
  auto* eval = add_command(app, "eval", "score a checkpoint on its target", args, true, true, true);
  auto* protocol = add_command(app, "protocol", "run the per-target protocol for one mode", args, true, true, false);
  auto* ablate = add_command(app, "ablate", "compare the training modes", args, true, false, false);
  auto* gradcheck = add_command(app, "gradcheck", "finite-difference check on the tiny model", args, false, false, false);
  auto* features = add_command(app, "export-features", "dump features for plotting", args, true, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kUsage;
  }

  return cli::guarded(std::cerr, [&]() -> int {
    const RunConfig cfg = build_config(args);
    if (gen->parsed()) return cli::cmd_gen_data(cfg, args.out, std::cout);
    if (train->parsed()) return cli::cmd_train(cfg, args.out, std::cout);
    if (eval->parsed()) return cli::cmd_eval(cfg, args.checkpoint, args.out, std::cout);
    if (protocol->parsed()) return cli::cmd_protocol(cfg, args.out, std::cout);
    if (ablate->parsed()) return cli::cmd_ablate(cfg, args.out, std::cout);
    if (gradcheck->parsed()) return cli::cmd_gradcheck(cfg, args.out, std::cout);
    if (features->parsed()) return cli::cmd_export_features(cfg, args.checkpoint, args.out, std::cout);
    return cli::kUsage;
  });
}
