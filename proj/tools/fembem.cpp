// Batch front-end: run one case or a study from a JSON config.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "fembem/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"desk-scale FEM-BEM magnetostatics solver"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  int threads = 0;
  bool verbose = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "JSON case configuration")->required();
    cmd->add_option("--output", output_dir, "override the output directory");
    cmd->add_option("--threads", threads, "assembly worker count");
    cmd->add_flag("--verbose", verbose, "chatty progress output");
  };

  CLI::App* run = app.add_subcommand("run", "solve a single case (plus its motion script)");
  add_common(run);
  CLI::App* study = app.add_subcommand("study", "convergence or permeability study");
  add_common(study);

  CLI11_PARSE(app, argc, argv);

  if (threads > 0) {
    fembem::set_thread_count(threads);
  } else if (const char* env = std::getenv("FEMBEM_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) fembem::set_thread_count(n);
  }

  fembem::CaseConfig cfg;
  try {
    cfg = fembem::load_config(config_path);
  } catch (const fembem::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fembem::kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fembem::kExitConfig;
  }
  if (!output_dir.empty()) cfg.output_directory = output_dir;

  if (run->parsed()) {
    auto res = fembem::run_case(cfg, std::cerr, verbose);
    if (res.exit_code == fembem::kExitOk && verbose)
      std::cerr << "done: " << res.steps.size() << " step(s), "
                << res.steps.front().report.iterations << " iterations\n";
    return res.exit_code;
  }
  auto res = fembem::convergence_study(cfg, std::cerr, verbose);
  return res.exit_code;
}
