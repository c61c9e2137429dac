// ddfusion: distributed detection rule optimization from the command line.

#include "ddf/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

struct Flags {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_sweeps;
  std::optional<std::string> trial;
  std::optional<std::string> rule;
  bool eval_on_training = false;

  ddf::Overrides overrides() const {
    ddf::Overrides o;
    o.seed = seed;
    o.max_sweeps = max_sweeps;
    if (trial) o.trial = ddf::parse_trial_kind(*trial);
    o.rule = rule;
    o.eval_on_training = eval_on_training;
    return o;
  }
};

void add_seed(CLI::App* c, Flags& f) {
  c->add_option("--seed-override", f.seed, "Sampling seed S (evaluation uses S+1)");
}
void add_sweeps(CLI::App* c, Flags& f) {
  c->add_option("--max-sweeps", f.max_sweeps, "Sweep limit per optimization")->check(CLI::PositiveNumber);
}
void add_trial(CLI::App* c, Flags& f) {
  c->add_option("--trial", f.trial, "Restrict to one trial distribution")
      ->check(CLI::IsMember({"gaussian", "mixture"}));
}
void add_rule(CLI::App* c, Flags& f) {
  c->add_option("--rule", f.rule, "Fusion rule, replacing the configured list");
}
void add_training(CLI::App* c, Flags& f) {
  c->add_flag("--eval-on-training", f.eval_on_training,
              "Score ROC points on the training bank instead of fresh draws");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Bayesian detection: sensor rule optimization and ROC evaluation"};
  app.require_subcommand(1);
  Flags flags;
  std::string config, labels, out_dir, manifest;
  int example = 0;

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("config", config, "Scenario file")->required();

  auto* optimize = app.add_subcommand("optimize", "Learn sensor rules and write labels and traces");
  optimize->add_option("config", config, "Scenario file")->required();
  optimize->add_option("-o,--out", out_dir, "Output directory")->required();
  add_seed(optimize, flags);
  add_sweeps(optimize, flags);
  add_trial(optimize, flags);
  add_rule(optimize, flags);

  auto* roc = app.add_subcommand("roc", "Sweep the cost ratio and write ROC curves");
  roc->add_option("config", config, "Scenario file")->required();
  roc->add_option("-o,--out", out_dir, "Output directory")->required();
  add_seed(roc, flags);
  add_sweeps(roc, flags);
  add_trial(roc, flags);
  add_rule(roc, flags);
  add_training(roc, flags);

  auto* eval = app.add_subcommand("eval", "Evaluate a learned rule file on fresh draws");
  eval->add_option("config", config, "Scenario file")->required();
  eval->add_option("--labels", labels, "Rule file written by optimize")->required();
  eval->add_option("-o,--out", out_dir, "Output directory")->required();
  add_seed(eval, flags);
  add_rule(eval, flags);

  auto* paper = app.add_subcommand("paper", "Run a built-in example (1: ten sensors, 2: hundred sensors)");
  paper->add_option("example", example, "Example id")->required();
  paper->add_option("-o,--out", out_dir, "Output directory")->required();
  add_seed(paper, flags);
  add_sweeps(paper, flags);
  add_trial(paper, flags);
  add_training(paper, flags);

  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
  replay->add_option("-o,--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ddf::kExitOk : ddf::kExitInvalid;
  }

  try {
    const ddf::Overrides o = flags.overrides();
    if (*validate) return ddf::cmd_validate(ddf::ConfigSource::from_file(config), std::cout, std::cerr);
    if (*optimize) return ddf::cmd_optimize(ddf::ConfigSource::from_file(config), out_dir, o, std::cout, std::cerr);
    if (*roc) return ddf::cmd_roc(ddf::ConfigSource::from_file(config), out_dir, o, std::cout, std::cerr);
    if (*eval) return ddf::cmd_eval(ddf::ConfigSource::from_file(config), labels, out_dir, o, std::cout, std::cerr);
    if (*paper) return ddf::cmd_paper(example, out_dir, o, std::cout, std::cerr);
    if (*replay) return ddf::cmd_replay(manifest, out_dir, std::cout, std::cerr);
  } catch (const ddf::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const ddf::ModelError& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return ddf::kExitInvalid;
}
