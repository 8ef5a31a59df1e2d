#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "fdelab/errors.hpp"
#include "fdelab/run.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"fde-lab: fast diffusion experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "run the experiment(s) in a JSON config");
  run->add_option("config", config_path, "config file")->required();
  auto* out_opt = run->add_option("--out", out_dir, "output directory (overrides the config)");
  auto* seed_opt = run->add_option("--seed", seed, "RNG seed (overrides the config)");

  std::string report_path, quantity, plot_out;
  auto* plot = app.add_subcommand("plot", "write t,value CSV for one series of a report");
  plot->add_option("report", report_path, "report.json")->required();
  plot->add_option("--quantity", quantity, "series name, e.g. J or M_8")->required();
  plot->add_option("--out", plot_out, "output CSV (default: plot_<quantity>.csv next to the report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      auto configs = fdelab::load_config(config_path);
      if (*out_opt) {
        if (configs.size() == 1) {
          configs[0].output = out_dir;
        } else {
          for (auto& c : configs) c.output = (fs::path(out_dir) / c.name).string();
        }
      }
      if (*seed_opt)
        for (auto& c : configs) c.seed = seed;
      return fdelab::run_all(configs, fdelab::thread_cap());
    }
    if (plot_out.empty())
      plot_out = (fs::path(report_path).parent_path() / ("plot_" + quantity + ".csv")).string();
    fdelab::emit_plotdata(report_path, quantity, plot_out);
    std::cout << plot_out << '\n';
    return 0;
  } catch (const fdelab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const fdelab::ContractError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
