// Batch front end over the C API.
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "misclass/misclass.h"

namespace {

int report_failure(mc_status status, const std::string& verb) {
  nlohmann::ordered_json record;
  record["status"] = mc_status_name(status);
  record["exit_code"] = mc_exit_code(status);
  record["verb"] = verb;
  record["message"] = mc_last_error();
  std::fprintf(stderr, "%s\n", record.dump().c_str());
  return mc_exit_code(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian misclassification sensitivity analysis for cluster trials"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool dump_draws = false;
  std::optional<std::string> grid;
  std::optional<std::string> output_dir;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (key = value)")->required();
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--threads", threads, "Worker threads");
    sub->add_flag("--dump-draws", dump_draws, "Write per-draw coefficient tables");
    sub->add_option("--grid", grid, "Grid cells: all, none or LABEL,LABEL");
    sub->add_option("--output-dir", output_dir, "Override the configured output directory");
  };
  for (const char* verb : {"analyze", "simulate", "elicit-only", "validate"}) {
    add_common(app.add_subcommand(verb));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string verb = app.get_subcommands().front()->get_name();

  mc_config* config = nullptr;
  mc_status st = mc_config_load(config_path.c_str(), &config);
  if (st != MC_OK) return report_failure(st, verb);

  const auto set = [&](const char* key, const std::string& value) {
    if (st == MC_OK) st = mc_config_set(config, key, value.c_str());
  };
  if (seed) set("seed", std::to_string(*seed));
  if (threads) set("threads", std::to_string(*threads));
  if (dump_draws) set("dump_draws", "true");
  if (grid) set("grid", *grid);
  if (output_dir) set("output_dir", *output_dir);
  if (st == MC_OK) st = mc_run(config, verb.c_str());

  int code = 0;
  if (st != MC_OK) {
    code = report_failure(st, verb);
  } else {
    char hash[17];
    mc_config_hash(config, hash);
    std::printf("%s ok (config %s)\n", verb.c_str(), hash);
  }
  mc_config_destroy(config);
  return code;
}
