#include "icgp/config.hpp"
#include "icgp/errors.hpp"
#include "icgp/experiments.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kIo = 2, kNumeric = 3 };

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool dry_run = false;
};

void add_common(CLI::App* cmd, Options& opt, bool config_required) {
  auto* c = cmd->add_option("--config,-c", opt.config_path, "key=value config file");
  if (config_required) c->required();
  cmd->add_option("--set,-s", opt.overrides, "override one key (key=value); repeatable");
  cmd->add_option("--out,-o", opt.out_dir,
                  "output directory (default $ICGP_OUTPUT_ROOT or ./runs, plus <experiment>-<hash>)");
  cmd->add_option("--threads,-j", opt.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--dry-run", opt.dry_run, "print the resolved sweep grid and exit");
}

std::string output_dir(const Options& opt, const icgp::Config& resolved) {
  if (!opt.out_dir.empty()) return opt.out_dir;
  const char* root = std::getenv("ICGP_OUTPUT_ROOT");
  const std::filesystem::path base = root && *root ? root : "runs";
  return (base / (resolved.get_string("experiment") + "-" + resolved.hash_hex())).string();
}

int execute(const std::string& experiment, const Options& opt) {
  icgp::Config cfg;
  if (!opt.config_path.empty()) cfg = icgp::Config::load(opt.config_path);
  for (const auto& o : opt.overrides) cfg.apply_override(o);
  const icgp::Config resolved =
      experiment.empty() ? icgp::resolve_config(cfg) : icgp::resolve_config(experiment, cfg);
  if (opt.dry_run) {
    std::cout << icgp::describe_grid(resolved);
    return kOk;
  }
  const std::string dir = output_dir(opt, resolved);
  const icgp::ExperimentOutput out = icgp::run_experiment(resolved, opt.threads);
  icgp::write_outputs(dir, resolved, out);
  for (const auto& note : out.notes) std::cout << note << "\n";
  std::cout << "wrote " << out.table.rows.size() << " rows to " << dir << "/results.csv\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformer-as-GP-solver experiments"};
  app.require_subcommand(1);
  Options opt;
  std::string chosen;
  for (const auto& name : icgp::experiment_names()) {
    auto* cmd = app.add_subcommand(name, "run the " + name + " experiment");
    add_common(cmd, opt, false);
    cmd->callback([&chosen, name] { chosen = name; });
  }
  auto* run = app.add_subcommand("run", "run the experiment named in a config or manifest file");
  add_common(run, opt, true);
  run->callback([&chosen] { chosen = ""; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    return execute(chosen, opt);
  } catch (const icgp::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const icgp::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const icgp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
}
