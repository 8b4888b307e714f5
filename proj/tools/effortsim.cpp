// effortsim: simulate sessions, train and evaluate the estimator, run seed
// sweeps and serve live sessions.
//
// Exit codes: 0 ok, 2 usage, 3 config, 4 runtime.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <spdlog/spdlog.h>

#include "effort/commands.hpp"
#include "effort/config.hpp"
#include "effort/recording_io.hpp"
#include "effort/rtserver.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitRuntime = 4;

struct Common {
  std::string config;
  std::string fatigue;  // "", "on", "off"
  std::optional<double> split_fraction;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::string format = "table";

  effort::Overrides overrides() const {
    effort::Overrides o;
    o.split_fraction = split_fraction;
    o.epochs = epochs;
    o.lr = lr;
    if (!fatigue.empty()) o.fatigue = fatigue == "on";
    return o;
  }
  effort::ReportFormat report_format() const {
    return format == "csv" ? effort::ReportFormat::Csv : effort::ReportFormat::Table;
  }
};

void add_config(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Session config file (INI); built-in defaults if omitted");
}

void add_training(CLI::App* cmd, Common& c) {
  cmd->add_option("--split-fraction", c.split_fraction, "Train fraction in (0,1)");
  cmd->add_option("--epochs", c.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  cmd->add_option("--lr", c.lr, "Learning rate")->check(CLI::NonNegativeNumber);
}

void add_fatigue(CLI::App* cmd, Common& c) {
  cmd->add_option("--fatigue", c.fatigue, "Fatigue model on|off (overrides config)")
      ->check(CLI::IsMember({"on", "off"}));
}

void add_format(CLI::App* cmd, Common& c) {
  cmd->add_option("--format", c.format, "Report format csv|table")
      ->check(CLI::IsMember({"csv", "table"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Muscle effort estimation under variable impedance: simulation and training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", effort::kToolVersion);

  Common c;
  std::uint64_t seed = 1;
  std::string out;

  auto* sim = app.add_subcommand("simulate", "Run one synthetic session and record it");
  add_config(sim, c);
  add_fatigue(sim, c);
  sim->add_option("--seed", seed, "Session seed");
  sim->add_option("--out", out, "Output directory")->required();

  std::string recording;
  auto* trn = app.add_subcommand("train", "Train the estimator on a recording");
  add_config(trn, c);
  add_training(trn, c);
  trn->add_option("--recording", recording, "Recording CSV or simulate output directory")
      ->required();
  trn->add_option("--seed", seed, "Initialization and shuffling seed");
  trn->add_option("--out", out, "Output directory")->required();

  std::string weights;
  auto* evl = app.add_subcommand("evaluate", "Sectioned RMS error of trained weights");
  add_config(evl, c);
  evl->add_option("--split-fraction", c.split_fraction, "Train fraction in (0,1)");
  evl->add_option("--weights", weights, "Weights file")->required();
  evl->add_option("--recording", recording, "Recording CSV or simulate output directory")
      ->required();
  evl->add_option("--out", out, "Directory for rms.csv and a manifest");
  add_format(evl, c);

  std::vector<std::uint64_t> seeds;
  auto* swp = app.add_subcommand("sweep", "Simulate, train and evaluate over many seeds");
  add_config(swp, c);
  add_training(swp, c);
  add_fatigue(swp, c);
  add_format(swp, c);
  swp->add_option("--seeds", seeds, "Comma-separated seed list")
      ->delimiter(',')
      ->required()
      ->check(CLI::Validator(
          [](std::string& v) { return v.empty() ? std::string("empty seed") : std::string(); },
          "SEED"));
  swp->add_option("--out", out, "Output directory")->required();

  std::string address = "127.0.0.1";
  unsigned short port = 8765;
  auto* srv = app.add_subcommand("serve", "Live session server (WebSocket at /session)");
  add_config(srv, c);
  add_fatigue(srv, c);
  srv->add_option("--seed", seed, "Session seed");
  srv->add_option("--address", address, "Bind address");
  srv->add_option("--port", port, "TCP port (0 picks one)");

  auto* pcfg = app.add_subcommand("print-config", "Print the resolved session config");
  add_config(pcfg, c);
  add_fatigue(pcfg, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sim) {
      const auto r = effort::cmd_simulate({c.config, seed, out, c.overrides()});
      std::cout << "wrote " << r.frames << " frames and " << r.raw_samples
                << " raw samples to " << out << "\n";
    } else if (*trn) {
      const auto r = effort::cmd_train({c.config, recording, seed, out, c.overrides()});
      std::cout << "trained on " << r.train_samples << " samples; weights in "
                << r.weights.string() << "\n";
    } else if (*evl) {
      effort::EvaluateOptions o;
      o.config_path = c.config;
      o.weights = weights;
      o.recording = recording;
      if (!out.empty()) o.out_dir = out;
      o.overrides = c.overrides();
      o.format = c.report_format();
      effort::cmd_evaluate(o, std::cout);
    } else if (*swp) {
      if (seeds.empty()) {
        std::cerr << "sweep: --seeds must list at least one seed\n";
        return kExitUsage;
      }
      effort::SweepOptions o;
      o.config_path = c.config;
      o.seeds = seeds;
      o.fatigue = c.fatigue != "off";
      o.out_dir = out;
      o.overrides = c.overrides();
      o.format = c.report_format();
      effort::cmd_sweep(o, std::cout);
    } else if (*srv) {
      effort::ServerOptions o;
      o.cfg = effort::load_config_or_default(c.config);
      c.overrides().apply(o.cfg);
      o.seed = seed;
      o.address = address;
      o.port = port;
      o.handle_signals = true;
      effort::SessionServer server(o);
      spdlog::info("listening on ws://{}:{}/session", address, server.port());
      server.run();
    } else if (*pcfg) {
      auto cfg = effort::load_config_or_default(c.config);
      c.overrides().apply(cfg);
      std::cout << effort::to_ini(cfg);
    }
  } catch (const effort::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
