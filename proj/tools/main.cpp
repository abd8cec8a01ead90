#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <thread>

#include "pulsepp/config.hpp"
#include "pulsepp/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--preset", args.preset,
                  "built-in preset (mri_toy, ct_toy)");
  cmd->add_option("--out", args.out_dir, "run directory");
  cmd->add_option("--seed", args.seed, "override the sampler master seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--workers", args.workers,
                  "concurrent restarts (default: hardware threads)");
}

pulsepp::RunConfig resolve_config(const CommonArgs& args) {
  if (!args.config_path.empty() && !args.preset.empty())
    throw std::runtime_error("give either --config or --preset, not both");
  pulsepp::RunConfig config;
  if (!args.config_path.empty())
    config = pulsepp::parse_config(args.config_path);
  else if (!args.preset.empty())
    config = pulsepp::parse_config_json(pulsepp::preset_config(args.preset));
  if (args.seed_set) config.sampler.config.seed = args.seed;
  if (!args.out_dir.empty()) config.output_dir = args.out_dir;
  return config;
}

int resolve_workers(const CommonArgs& args) {
  if (args.workers > 0) return args.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical sampling of data-consistent tomographic "
               "reconstructions in a style-generator latent space"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* validate =
      app.add_subcommand("validate-latents",
                         "latent norm statistics against the chi-square law");
  CLI::App* simulate =
      app.add_subcommand("simulate", "generate a target and its measurement");
  CLI::App* sample =
      app.add_subcommand("sample", "run restarts and collect solutions");
  CLI::App* analyze =
      app.add_subcommand("analyze", "uncertainty maps over a solution set");
  for (CLI::App* cmd : {validate, simulate, sample, analyze})
    add_common(cmd, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(analyze)) {
      const std::string dir =
          args.out_dir.empty() ? std::string("run") : args.out_dir;
      return pulsepp::cmd_analyze(dir, resolve_workers(args));
    }
    const pulsepp::RunConfig config = resolve_config(args);
    const std::string dir = config.output_dir;
    if (app.got_subcommand(validate))
      return pulsepp::cmd_validate_latents(config, dir);
    if (app.got_subcommand(simulate))
      return pulsepp::cmd_simulate(config, dir);
    if (app.got_subcommand(sample))
      return pulsepp::cmd_sample(config, dir, resolve_workers(args));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
