// Command-line front end: fradkov <solve|sweep|verify|converge> [flags] [--config file]
#include <iostream>

#include "CLI11.hpp"
#include "fradkov/cli.hpp"

namespace {

std::string config_error(const std::string& message) {
  return nlohmann::json{{"error", "InvalidConfig"}, {"message", message}, {"exit_code", fradkov::kExitConfig}}.dump();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace fradkov;
  RunConfig config;
  Parameters& p = config.params;
  std::string init = "random";

  CLI::App app{"Self-similar steady states of the kinetic grain-growth model"};
  app.set_config("--config", "", "flat key=value file mirroring the long flags");
  app.require_subcommand(1, 1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  app.add_option("--beta", p.beta, "collision asymmetry beta > 0");
  app.add_option("--n-max", p.n_max, "largest face class N");
  app.add_option("--domain-length", p.domain_length, "truncated domain length L");
  app.add_option("--cells", p.cells, "grid cells K, a multiple of L");
  app.add_option("--area", p.area_target, "area normalisation A");
  app.add_option("--tol", config.tol, "steady-state residual tolerance");
  app.add_option("--max-steps", config.max_steps, "step budget");
  app.add_option("--init", init, "random | uniform | localized");
  app.add_option("--seed", p.seed, "seed for the random initial datum");
  app.add_option("--dt-safety", p.dt_safety, "fraction of the stable step in (0,1)");
  app.add_option("--out", config.out_dir, "output directory");
  const auto all = CLI::MultiOptionPolicy::TakeAll;
  app.add_option("--betas", config.beta_list, "sweep: list of beta values")->delimiter(',')->multi_option_policy(all);
  app.add_option("--eps-list", config.eps_list, "converge: grid spacings")->delimiter(',')->multi_option_policy(all);
  app.add_option("--n-list", config.n_list, "converge: class truncations")->delimiter(',')->multi_option_policy(all);
  app.add_option("--in", config.in_dir, "verify: directory holding manifest.json and profile.csv");
  app.add_option("--workers", config.workers, "worker threads for sweep and converge");
  app.add_option("--sample-every", config.sample_every, "history sampling interval in steps (0 = off)");

  for (const char* name : {"solve", "sweep", "verify", "converge"})
    app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << config_error(e.what()) << '\n';
    return kExitConfig;
  }

  config.subcommand = app.get_subcommands().front()->get_name();
  if (config.subcommand == "verify" && app.count("--out") == 0) config.out_dir.clear();
  try {
    config.init = parse_init_kind(init);
  } catch (const std::exception& e) {
    std::cerr << config_error(e.what()) << '\n';
    return kExitConfig;
  }
  return run(config, std::cerr);
}
