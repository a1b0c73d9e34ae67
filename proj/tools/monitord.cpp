// monitord: serves the monitoring platform's JSON API.
//
// The event log lives in $SRCWATCH_DATA_DIR/events.log (default ./data) and
// is replayed on start.

#include "srcwatch/platform_http.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {
srcwatch::PlatformServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srcwatch monitoring platform"};
  std::string bind = "127.0.0.1:8080";
  bool wall_clock = false;
  bool reject_unknown = false;
  bool ephemeral = false;
  app.add_option("--bind", bind, "host:port to listen on");
  app.add_flag("--wall-clock", wall_clock, "stamp operator actions with wall time");
  app.add_flag("--reject-unknown", reject_unknown, "refuse frames from unregistered devices");
  app.add_flag("--ephemeral", ephemeral, "keep the log in memory only");
  CLI11_PARSE(app, argc, argv);

  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) {
    std::cerr << "error: --bind expects host:port\n";
    return 2;
  }

  srcwatch::PlatformOptions popts;
  popts.unknown_devices = reject_unknown ? srcwatch::UnknownDevicePolicy::Reject
                                         : srcwatch::UnknownDevicePolicy::AutoRegister;
  if (!ephemeral) {
    const char* env = std::getenv("SRCWATCH_DATA_DIR");
    const std::filesystem::path dir = env && *env ? env : "data";
    std::filesystem::create_directories(dir);
    popts.log_path = dir / "events.log";
  }

  try {
    srcwatch::Platform platform(popts);
    srcwatch::ServerOptions sopts;
    sopts.host = bind.substr(0, colon);
    sopts.port = std::stoi(bind.substr(colon + 1));
    if (wall_clock) {
      sopts.clock = [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
      };
    }
    srcwatch::PlatformServer server(platform, sopts);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << fmt::format("monitord: {} entries replayed, listening on {}\n",
                             platform.offset(), bind);
    server.run();
  } catch (const std::exception& e) {
    std::cerr << "monitord: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
