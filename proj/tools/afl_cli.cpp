#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "afl/afl.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

void write_json(const afl::harness::json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw afl::Error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  using namespace afl;
  CLI::App app{"Analytic federated learning toolkit"};
  app.require_subcommand(1);
  std::size_t workers = 0;
  app.add_option("--workers", workers, "Worker threads (0 = all cores)");

  auto* gen = app.add_subcommand("gen-dummy", "Write a Gaussian-cluster AFLE dataset");
  std::int64_t n = 0;
  std::int64_t d = 0;
  std::uint32_t c = 0;
  std::uint64_t seed = 0;
  double spread = 1.0;
  std::string out;
  gen->add_option("--n", n, "Rows")->required();
  gen->add_option("--d", d, "Embedding dimension")->required();
  gen->add_option("--c", c, "Classes")->required();
  gen->add_option("--seed", seed, "Seed")->required();
  gen->add_option("--out", out, "Output .afle path")->required();
  gen->add_option("--spread", spread, "Std. deviation of the class means");

  auto* runc = app.add_subcommand("run", "Run one experiment from a JSON config");
  std::string config;
  runc->add_option("--config", config, "Config JSON")->required();

  auto* table = app.add_subcommand("table-a1", "Mean deviation table on dummy data");
  harness::TableA1Options topt;
  std::string table_out;
  table->add_option("--seeds", topt.seeds, "Number of seeds")->required();
  table->add_option("--base-seed", topt.base_seed, "Seed the runs derive from");
  table->add_option("--out", table_out, "Write JSON here instead of stdout");
  table->add_flag("--pinv-fallback", topt.pinv_fallback,
                  "Use pseudoinverses for rank-deficient clients without RI");

  auto* sweep = app.add_subcommand("sweep", "Vary one config field over a list");
  std::string sweep_config;
  std::string vary;
  std::string sweep_out;
  sweep->add_option("--config", sweep_config, "Base config JSON")->required();
  sweep->add_option("--vary", vary, "<field>=<v1,v2,...>")->required();
  sweep->add_option("--out", sweep_out, "Write JSON here instead of stdout");

  auto* eval = app.add_subcommand("eval", "Top-1 accuracy of stored weights");
  std::string weights;
  std::string data_path;
  eval->add_option("--weights", weights, "AFLU file")->required();
  eval->add_option("--data", data_path, "AFLE file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const harness::ParallelRunner runner(workers);
    if (*gen) {
      if (n < 1 || d < 1 || c < 1) throw ConfigError("gen-dummy: n, d, c must be >= 1");
      const auto ds = data::gen_dummy(n, d, c, seed, spread);
      data::write_embeddings(ds, out);
      std::cerr << "wrote " << n << " x " << d << " (" << c << " classes) to " << out
                << "\n";
    } else if (*runc) {
      const auto cfg = harness::load_config(config);
      const auto report = harness::run_experiment(cfg, runner);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      if (cfg.output_path.empty()) std::cout << harness::to_json(report).dump(2) << "\n";
    } else if (*table) {
      const auto t = harness::run_table_a1(topt, runner);
      write_json(harness::to_json(t), table_out);
    } else if (*sweep) {
      const auto base = harness::read_json_file(sweep_config);
      const auto axis = harness::parse_vary(vary);
      const auto points = harness::run_sweep(base, axis, runner);
      write_json(harness::to_json(axis, points), sweep_out);
    } else if (*eval) {
      const auto u = read_update(weights);
      const auto ds = data::read_embeddings(data_path);
      const double acc = harness::accuracy(u.weights, ds);
      std::cout << harness::json{{"samples", ds.size()}, {"accuracy", acc}}.dump(2)
                << "\n";
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
