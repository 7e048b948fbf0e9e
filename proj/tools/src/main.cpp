#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mfpe: Marcus SDEs with Levy noise and their nonlocal Fokker-Planck equations"};
  app.require_subcommand(1);

  mfpe::cli::CommandOptions opt;
  int threads = 0;
  auto add_common = [&](CLI::App* sub, bool multi) {
    auto* c = sub->add_option("--config", opt.config_paths, multi ? "Run config (JSON); a second one supplies source b"
                                                                  : "Run config (JSON)")
                  ->required()
                  ->check(CLI::ExistingFile);
    if (!multi) c->expected(1);
    sub->add_option("--out", opt.out_dir, "Output root")->capture_default_str();
    sub->add_flag("--force", opt.force, "Overwrite an existing run directory");
    sub->add_option("--threads", threads, "Worker threads (overrides simulation.threads)")->check(CLI::PositiveNumber);
  };
  add_common(app.add_subcommand("simulate", "Simulate a path ensemble"), false);
  add_common(app.add_subcommand("solve", "Solve the Fokker-Planck equation"), false);
  add_common(app.add_subcommand("compare", "Compare two densities"), true);
  add_common(app.add_subcommand("transform-check", "Check the Marcus map identities"), false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mfpe::cli::kExitConfig;
  }
  if (threads > 0) opt.threads = threads;
  return mfpe::cli::run_command(app.get_subcommands().front()->get_name(), opt, std::cout, std::cerr);
}
