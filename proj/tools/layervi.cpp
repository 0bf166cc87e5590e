#include <iostream>
#include <utility>

#include <CLI11.hpp>

#include "layervi/cli_io.hpp"
#include "layervi/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multilayer elastic contact solver"};
  app.require_subcommand(1, 1);

  std::string config_path;
  layervi::RunOptions opts;
  std::uint64_t seed = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"mesh", "write the layered mesh as text and VTK"},
      {"solve", "run the fixed-point solver, write solution, report and KKT audit"},
      {"converge", "refinement study against a reference solution"},
      {"verify", "solve, then run the oracle, Green identity and KKT checks"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "INI problem description")->required();
    sub->add_option("--out-dir", opts.out_dir, "directory for artifacts");
    sub->add_option("--levels", opts.levels, "refinement levels for converge")
        ->check(CLI::Range(4, 8));
    sub->add_option("--seed", seed, "overrides [solver] seed")
        ->each([&](const std::string&) { opts.seed = seed; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    const auto command = layervi::command_from_string(app.get_subcommands().front()->get_name());
    const auto cfg = layervi::load_config(config_path);
    return layervi::run(command, cfg, opts, std::cout);
  } catch (const layervi::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const layervi::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
