#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lira/errors.hpp"
#include "lira/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lira: deterministic training and diagnostics runner"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::string report_path;
  std::vector<std::string> overrides;
  bool quiet = false;
  app.add_option("-c,--config", config_path, "key=value config file");
  app.add_option("-s,--set", overrides,
                 "config override, key=value (repeatable)");
  app.add_option("-r,--report", report_path, "write a JSON report here");
  app.add_flag("-q,--quiet", quiet, "suppress the text table");

  const std::vector<std::string> tasks = {
      "train-retrieval", "train-ranking", "train-arca", "estimate-c",
      "estimate-lipschitz", "bound", "info-gain", "eval", "stats",
      "gen-synthetic"};
  for (const auto& t : tasks) {
    app.add_subcommand(t, "run the '" + t + "' task")->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);

  try {
    lira::run::RunConfig cfg;
    if (!config_path.empty()) cfg = lira::run::load_config(config_path);
    for (const auto* sub : app.get_subcommands()) cfg.task = sub->get_name();
    for (const auto& kv : overrides) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        throw lira::ConfigError("--set expects key=value, got '" + kv + "'");
      }
      lira::run::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    lira::run::apply_env_overrides(cfg);
    if (!report_path.empty()) cfg.report_path = report_path;
    if (cfg.task.empty()) {
      throw lira::ConfigError("no task given (subcommand or task= in config)");
    }

    const lira::run::RunReport report = lira::run::dispatch(cfg);
    if (!quiet) std::cout << lira::run::report_table(report);
    if (!cfg.report_path.empty()) {
      lira::run::write_report(report, cfg.report_path);
    }
    return kExitOk;
  } catch (const lira::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const lira::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const lira::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
