// Standalone deterministic endpoint for running the pipeline without a real
// model server: `progres-stub --port 8089`.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <semaphore>
#include <string>

#include "stub_server.hpp"

namespace {

std::binary_semaphore g_shutdown{0};

void handle_signal(int) { g_shutdown.release(); }

}  // namespace

int main(int argc, char** argv) {
  int port = 8089;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--port" && i + 1 < argc) {
      port = std::atoi(argv[++i]);
    } else if (arg == "-h" || arg == "--help") {
      std::cout << "usage: progres-stub [--port N]\n"
                   "Deterministic OpenAI-compatible endpoint: chat completions pick the\n"
                   "second-ranked hypothesis; echo scoring hashes the text into a stable\n"
                   "total logprob.\n";
      return 0;
    } else {
      std::cerr << "unknown argument: " << arg << "\n";
      return 2;
    }
  }

  progres::stub::StubServer server;
  const int bound = server.start(port);
  std::cout << "listening on " << server.base_url() << " (port " << bound << ")\n" << std::flush;

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  g_shutdown.acquire();
  server.stop();
  return 0;
}
