#include <CLI11.hpp>

#include <optional>
#include <ostream>

#include "bellqft/error.hpp"
#include "commands.hpp"

namespace bellqft::cli {

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> trajectories;
  unsigned parallelism = 0;
  std::optional<std::string> out_dir;
  double time = 0.0;
  std::string configuration;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "Run configuration (JSON)")->required();
  sub->add_option("--seed", o.seed, "Root seed, overrides process.root_seed");
  sub->add_option("--trajectories", o.trajectories, "Ensemble size, overrides process.trajectories");
  sub->add_option("--parallelism", o.parallelism, "Worker threads (0 = all cores); never changes results");
  sub->add_option("--out-dir", o.out_dir, "Output directory, overrides output.directory");
}

RunConfig load(const Options& o) {
  nlohmann::json doc = read_config_file(o.config);
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  if (o.seed) doc["process"]["root_seed"] = *o.seed;
  if (o.trajectories) doc["process"]["trajectories"] = *o.trajectories;
  if (o.out_dir) doc["output"]["directory"] = *o.out_dir;
  return parse_config(doc);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Particle trajectories for a lattice boson field with a source"};
  app.name("bellqft");
  app.require_subcommand(1);
  Options o;
  auto* evolve = app.add_subcommand("evolve", "Propagate Psi and write snapshots and norms");
  auto* simulate = app.add_subcommand("simulate", "Run a trajectory ensemble");
  auto* verify = app.add_subcommand("verify", "Run the identity, equivalence and equivariance checks");
  auto* rates = app.add_subcommand("rates", "Print the jump-rate row at a time and configuration");
  auto* dirac = app.add_subcommand("dirac-demo", "Integrate a single Dirac particle path");
  for (auto* sub : {evolve, simulate, verify, rates, dirac}) add_common(sub, o);
  rates->add_option("--time", o.time, "Time at which Psi is evaluated")->required();
  rates->add_option("--configuration", o.configuration, "Comma-separated positions; empty for the vacuum");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    const RunConfig cfg = load(o);
    if (evolve->parsed()) return cmd_evolve(cfg, out);
    if (simulate->parsed()) return cmd_simulate(cfg, o.parallelism, out);
    if (verify->parsed()) return cmd_verify(cfg, o.parallelism, out);
    if (rates->parsed()) return cmd_rates(cfg, o.time, parse_configuration(o.configuration), out);
    return cmd_dirac_demo(cfg, out);
  } catch (const ConfigFileError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
}

}  // namespace bellqft::cli
