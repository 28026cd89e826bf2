#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "voxflood/commands.hpp"
#include "voxflood/protocol.hpp"

namespace {

int serve_main(const std::string& mode, const std::string& threshold, int tcp_port, bool once) {
  using namespace voxflood;
  OracleOptions oracle;
  if (threshold == "otsu") {
    oracle.threshold = ThresholdKind::Otsu;
  } else {
    try {
      oracle.threshold_fraction = std::stod(threshold);
    } catch (const std::exception&) {
      throw InputError("--oracle-threshold must be 'otsu' or a fraction");
    }
  }
  if (mode != "oracle" && mode != "echo") throw InputError("--mode must be oracle or echo");
  auto backend = make_segmenter(mode, oracle);
  if (tcp_port < 0) {
    protocol::FdTransport stdio(0, 1, false);
    protocol::serve(stdio, *backend);
    return 0;
  }
  protocol::TcpListener listener(tcp_port);
  std::cerr << "listening on 127.0.0.1:" << listener.port() << std::endl;
  do {
    auto conn = listener.accept();
    try {
      protocol::serve(*conn, *backend);
    } catch (const BackendError& e) {
      std::cerr << "connection dropped: " << e.what() << std::endl;
    }
  } while (!once);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volumetric flood-fill segmentation with a prompt-driven 2D segmenter"};
  app.require_subcommand(1);
  std::string config_path;

  const char* commands[][2] = {
      {"generate", "Write a synthetic phantom volume and its labels"},
      {"prepare-training", "Extract fine-tuning slices and a balanced manifest"},
      {"segment", "Run the flood-fill segmentation"},
      {"evaluate", "Compare predicted labels against a reference"},
      {"export-slices", "Write volume and label slices as PGM images"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "TOML configuration file")->required()->check(CLI::ExistingFile);
  }

  std::string mode = "oracle", threshold = "0.5";
  int tcp_port = -1;
  bool once = false;
  CLI::App* serve = app.add_subcommand("serve", "Serve a built-in segmenter over the wire protocol");
  serve->group("");
  serve->add_option("--mode", mode, "oracle or echo");
  serve->add_option("--oracle-threshold", threshold, "'otsu' or a fraction of 255");
  serve->add_option("--tcp", tcp_port, "listen on 127.0.0.1:PORT instead of stdio (0 picks a port)");
  serve->add_flag("--once", once, "exit after the first TCP connection");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : voxflood::kExitInput;
  }

  try {
    if (serve->parsed()) return serve_main(mode, threshold, tcp_port, once);
    const std::string name = app.get_subcommands().front()->get_name();
    const voxflood::RunConfig cfg = voxflood::load_config(config_path);
    return voxflood::run_command(name, cfg, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return voxflood::exit_code_for(e);
  }
}
