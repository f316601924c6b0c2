#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <iostream>
#include <map>

#include "velander_app/app.hpp"

namespace velander::app {
namespace {

void use_stderr_logger() {
  if (auto existing = spdlog::get("velander")) {
    spdlog::set_default_logger(existing);
    return;
  }
  auto logger = spdlog::stderr_color_mt("velander");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
}

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> constraint;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::string log_level = "info";
};

RunConfig resolve(const Overrides& o) {
  RunConfig c = load_config(o.config);
  if (o.seed) {
    spdlog::info("override seed: {} (config: {})", *o.seed, c.seed ? std::to_string(*c.seed) : "unset");
    c.seed = o.seed;
  }
  if (o.constraint) {
    Regime r;
    try {
      r = parse_regime(*o.constraint);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    spdlog::info("override constraint: {} (config: {})", to_string(r), to_string(c.regime));
    c.regime = r;
  }
  if (o.out) {
    const auto dir = std::filesystem::absolute(*o.out).lexically_normal();
    spdlog::info("override output_dir: {} (config: {})", dir.string(), c.output_dir.string());
    c.output_dir = dir;
  }
  if (o.threads) {
    spdlog::info("override threads: {} (config: {})", *o.threads, c.threads);
    c.threads = *o.threads;
  }
  return c;
}

}  // namespace

int run(int argc, const char* const* argv) {
  use_stderr_logger();
  CLI::App app{"Quantile Velander peak-load estimation"};
  app.name("velander");
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "run configuration (JSON)")->required();
  app.add_option("--seed", o.seed, "override the configured seed");
  app.add_option("--constraint", o.constraint, "override the constraint regime (c1..c4)");
  app.add_option("--out", o.out, "override the output directory");
  app.add_option("--threads", o.threads, "worker threads (0 = all cores)");
  app.add_option("--log-level", o.log_level, "stderr verbosity")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  using Command = int (*)(const RunConfig&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands{
      {"ingest", "parse and clean meter data into per-customer records", cmd_ingest},
      {"fit", "fit quantile parameters on one dataset", cmd_fit},
      {"evaluate", "run the configured analyses", cmd_evaluate},
      {"synth", "write synthetic meter data", cmd_synth},
      {"verify", "check a small fit against a brute-force search", cmd_verify},
  };
  std::map<CLI::App*, Command> dispatch;
  for (const auto& [name, help, fn] : commands) dispatch[app.add_subcommand(name, help)] = fn;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  spdlog::set_level(spdlog::level::from_str(o.log_level));
  try {
    const RunConfig config = resolve(o);
    for (const auto& [sub, fn] : dispatch) {
      if (sub->parsed()) return fn(config);
    }
    return kExitUsage;
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
}

}  // namespace velander::app
