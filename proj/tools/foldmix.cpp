#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "foldmix/harness/config.hpp"
#include "foldmix/harness/experiments.hpp"
#include "foldmix/harness/report.hpp"

namespace {

using foldmix::harness::ExperimentKind;

// One JSON object per line on stderr, so wrappers can parse failures.
int fail(const std::string& kind, const std::string& message, const std::string& field = {}) {
  nlohmann::ordered_json e;
  e["error"] = kind;
  if (!field.empty()) e["field"] = field;
  e["message"] = message;
  std::cerr << e.dump() << '\n';
  return kind == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo checks for folded-normal and Gaussian-mixture estimators", "foldmix"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string format;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;

  for (ExperimentKind kind : foldmix::harness::all_kinds()) {
    const std::string name(foldmix::harness::kind_name(kind));
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out_path, "output path; '-' for stdout (overrides config)");
    sub->add_option("--format", format, "csv or json (overrides config)")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", seed, "master seed (overrides config)");
    sub->add_option("--threads", threads, "worker threads; 0 uses all cores");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    const ExperimentKind kind = foldmix::harness::parse_kind(sub->get_name());
    foldmix::harness::ExperimentConfig cfg = foldmix::harness::load_config(config_path);
    if (cfg.kind != kind) {
      throw foldmix::harness::ConfigError(
          "kind", "config declares '" + std::string(foldmix::harness::kind_name(cfg.kind)) +
                      "' but subcommand is '" + sub->get_name() + "'");
    }
    if (seed) cfg.seed = *seed;
    if (!format.empty()) cfg.output_format = foldmix::harness::parse_format(format);
    if (!out_path.empty()) cfg.output_path = out_path;
    if (threads) cfg.options["threads"] = *threads;
    const auto rows = foldmix::harness::run_experiment(cfg);
    foldmix::harness::emit_report(rows, cfg.output_format, cfg.output_path);
  } catch (const foldmix::harness::ConfigError& e) {
    return fail("config", e.what(), e.field());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
