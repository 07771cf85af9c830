// qpso_track: track, synth and bench front end.
#include "qtrack/app.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"QPSO multi-swarm object tracker"};
  app.require_subcommand(1);

  std::string input, config_path, out_dir, spec_path;
  int seeds = 5;

  auto* track = app.add_subcommand("track", "Track an object through a frame directory or a synthetic scene");
  track->add_option("--input", input, "Frame directory containing mask.pgm (omit for the config's [scene])");
  track->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  track->add_option("--out", out_dir, "Output directory")->required();

  auto* synth = app.add_subcommand("synth", "Render a synthetic scene with ground truth");
  synth->add_option("--spec", spec_path, "Scene file ([scene] keys)")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_dir, "Output directory")->required();

  auto* bench = app.add_subcommand("bench", "Compare PSO and QPSO over seeded runs");
  bench->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  bench->add_option("--seeds", seeds, "Number of seeds (at least 2)")->default_val(5);
  bench->add_option("--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      qtrack::SceneSpec spec;
      qtrack::apply_scene(qtrack::read_config(spec_path, "scene"), spec);
      return qtrack::run_synth(spec, out_dir, std::cout, std::cerr);
    }
    qtrack::RunConfig config =
        config_path.empty() ? qtrack::RunConfig{} : qtrack::run_config_from(qtrack::read_config(config_path));
    if (*track) {
      if (!input.empty()) config.input = input;
      return qtrack::run_track(config, out_dir, std::cout, std::cerr);
    }
    return qtrack::run_bench_command(config, seeds, out_dir, std::cout, std::cerr);
  } catch (const qtrack::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
}
