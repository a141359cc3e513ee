// Reference provider served over stdin/stdout or TCP. The --fault options
// misbehave on one request so clients' error handling can be exercised.
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <unistd.h>

#include "CLI11.hpp"
#include "anicurate/error.hpp"
#include "anicurate/providers.hpp"

using namespace anicurate;

int main(int argc, char** argv) {
  CLI::App app{"anicurate reference provider"};
  int tcp_port = -1;
  int max_connections = 0;
  std::string fault = "none";
  int fault_at = 1;
  app.add_option("--tcp", tcp_port, "Serve on 127.0.0.1:<port> instead of stdio (0 = any free port)");
  app.add_option("--max-connections", max_connections, "Exit after this many TCP connections (0 = forever)");
  app.add_option("--fault", fault, "Fault to inject on stdio")
      ->check(CLI::IsMember({"none", "hang", "garbage", "exit", "wrong-id"}));
  app.add_option("--fault-at", fault_at, "1-based request number that triggers the fault")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const providers::ReferenceProvider provider;
  if (tcp_port >= 0) {
    providers::serve_tcp(provider, tcp_port, max_connections, [](int port) {
      std::cout << "listening " << port << std::endl;
    });
    return 0;
  }

  std::ios::sync_with_stdio(false);
  std::string line;
  for (int n = 1; std::getline(std::cin, line); ++n) {
    if (line.empty()) continue;
    if (n == fault_at && fault == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(1));
    } else if (n == fault_at && fault == "exit") {
      ::_exit(3);
    } else if (n == fault_at && fault == "garbage") {
      std::cout << "{this is not json\n" << std::flush;
      continue;
    }
    providers::Response r;
    try {
      const auto req = providers::decode_request(line);
      r = provider.handle(req);
    } catch (const Error& e) {
      r.ok = false;
      r.error = e.what();
    }
    if (n == fault_at && fault == "wrong-id") r.id += 1000;
    std::cout << providers::encode_response(r) << std::flush;
  }
  return 0;
}
