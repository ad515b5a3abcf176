// e3va command line.
//
//   e3va serve    [--config FILE] [--scripted] [--bind HOST:PORT]
//   e3va simulate SCENARIO -o DIR
//   e3va replay   TRANSCRIPT -o FILE [--hold-ms MS] [--decay-ms MS]
//
// Exit codes: 0 success, 1 bad input (arguments, config, files), 2 runtime failure.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "e3va/gateway/config.hpp"
#include "e3va/gateway/replay.hpp"
#include "e3va/gateway/scenario.hpp"
#include "e3va/gateway/server.hpp"

namespace {

constexpr int kInputError = 1;
constexpr int kRuntimeError = 2;

bool is_input_error(e3va::ErrorKind k) {
  using e3va::ErrorKind;
  return k == ErrorKind::ParseError || k == ErrorKind::InvalidConfig ||
         k == ErrorKind::InvalidArgument;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expressive conversational agent engine"};
  app.require_subcommand(1);

  std::string config_file;
  bool scripted = false;
  std::string bind;
  auto* serve = app.add_subcommand("serve", "Run the HTTP/WebSocket service");
  serve->add_option("--config", config_file, "JSON config file (env vars override it)");
  serve->add_flag("--scripted", scripted, "Use offline scripted providers");
  serve->add_option("--bind", bind, "HOST:PORT to listen on (overrides BIND_ADDR)");

  std::string scenario_file, out_dir;
  auto* simulate = app.add_subcommand("simulate", "Run a scripted conversation offline");
  simulate->add_option("scenario", scenario_file, "Scenario JSONL file")->required();
  simulate->add_option("-o,--out", out_dir, "Output directory")->required();

  std::string transcript_file, out_file;
  std::optional<double> hold_ms, decay_ms;
  auto* replay = app.add_subcommand("replay", "Rebuild the 30 Hz expression track of a transcript");
  replay->add_option("transcript", transcript_file, "Transcript JSONL file")->required();
  replay->add_option("-o,--out", out_file, "Output JSON file")->required();
  replay->add_option("--hold-ms", hold_ms, "Override the recorded hold time");
  replay->add_option("--decay-ms", decay_ms, "Override the recorded decay time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (*serve) {
      auto cfg = e3va::load_config(config_file);
      if (scripted) cfg.make_scripted();
      if (!bind.empty()) e3va::detail::parse_bind(bind, cfg);
      e3va::run_service(cfg, [&](unsigned short port) {
        std::cout << "listening on " << cfg.bind_host << ":" << port << std::endl;
      });
    } else if (*simulate) {
      const auto sc = e3va::read_scenario(scenario_file);
      const auto result = e3va::simulate(sc, out_dir);
      std::cout << result.events.size() << " events, transcript " << result.transcript.string()
                << "\n";
    } else if (*replay) {
      e3va::DecayParams defaults;
      const bool force = hold_ms || decay_ms;
      if (force) {
        defaults = e3va::DecayParams::make(hold_ms.value_or(defaults.hold_ms),
                                           decay_ms.value_or(defaults.decay_ms));
      }
      e3va::replay_file(transcript_file, out_file, defaults, force);
    }
  } catch (const e3va::Error& e) {
    std::cerr << "error: " << e3va::to_string(e.kind()) << ": " << e.what() << "\n";
    return is_input_error(e.kind()) ? kInputError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
