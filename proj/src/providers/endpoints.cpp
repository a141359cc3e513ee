#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>

#include "anicurate/error.hpp"
#include "anicurate/providers.hpp"

namespace anicurate::providers {
namespace {

void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

void write_all(int fd, std::string_view data, const std::string& peer) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("write to " + peer + " failed: " + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Reads until a full line is buffered. Throws TransportError on timeout or EOF.
std::string read_line(int fd, std::string& buffer, std::chrono::milliseconds timeout,
                      const std::string& peer) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (const auto nl = buffer.find('\n'); nl != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      throw TransportError("timed out after " + std::to_string(timeout.count()) + " ms waiting for " + peer);
    }
    pollfd pfd{fd, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError("poll on " + peer + " failed: " + std::strerror(errno));
    }
    if (rc == 0) continue;
    char chunk[65536];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("read from " + peer + " failed: " + std::strerror(errno));
    }
    if (n == 0) throw TransportError(peer + " closed the connection mid-request");
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

std::vector<std::string> split_command(const std::string& cmd) {
  std::vector<std::string> out;
  std::string cur;
  bool in_token = false;
  char quote = 0;
  for (char c : cmd) {
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else {
        cur += c;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
      in_token = true;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (in_token) out.push_back(std::move(cur));
      cur.clear();
      in_token = false;
    } else {
      cur += c;
      in_token = true;
    }
  }
  if (quote) throw ConfigError("unterminated quote in provider command: " + cmd);
  if (in_token) out.push_back(std::move(cur));
  return out;
}

}  // namespace

// --- in-process -------------------------------------------------------------

InProcessEndpoint::InProcessEndpoint(Handler handler, std::string name)
    : handler_(std::move(handler)), name_(std::move(name)) {}

InProcessEndpoint::InProcessEndpoint(std::shared_ptr<const ReferenceProvider> provider)
    : handler_([provider](const Request& r) { return provider->handle(r); }), name_("ref") {}

Response InProcessEndpoint::call(const Request& request) {
  const Request wire = decode_request(encode_request(request));
  const std::string line = encode_response(handler_(wire));
  return decode_response(std::string_view(line).substr(0, line.size() - 1));
}

// --- subprocess -------------------------------------------------------------

SubprocessEndpoint::SubprocessEndpoint(std::vector<std::string> argv, CallOptions options)
    : argv_(std::move(argv)), options_(options) {
  if (argv_.empty()) throw ConfigError("subprocess provider needs a command");
  ignore_sigpipe();
}

SubprocessEndpoint::~SubprocessEndpoint() { stop(); }

std::string SubprocessEndpoint::describe() const { return "exec:" + argv_.front(); }

void SubprocessEndpoint::start() {
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
    throw TransportError(std::string("pipe() failed: ") + std::strerror(errno));
  }
  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw TransportError(std::string("fork() failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
}

void SubprocessEndpoint::stop() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
  buffer_.clear();
}

Response SubprocessEndpoint::exchange(const Request& request) {
  if (pid_ < 0) start();
  try {
    write_all(to_child_, encode_request(request), describe());
    const std::string line = read_line(from_child_, buffer_, options_.timeout, describe());
    return decode_response(line);
  } catch (const TransportError&) {
    stop();
    throw;
  } catch (const ProtocolError&) {
    // The stream position is unknown after a bad line; start clean next time.
    stop();
    throw;
  }
}

Response SubprocessEndpoint::call(const Request& request) {
  std::lock_guard lock(mutex_);
  return exchange(request);
}

// --- tcp --------------------------------------------------------------------

TcpEndpoint::TcpEndpoint(std::string host, int port, CallOptions options)
    : host_(std::move(host)), port_(port), options_(options) {
  ignore_sigpipe();
}

TcpEndpoint::~TcpEndpoint() { close_socket(); }

std::string TcpEndpoint::describe() const { return "tcp:" + host_ + ":" + std::to_string(port_); }

void TcpEndpoint::connect_socket() {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(port_);
  if (const int rc = ::getaddrinfo(host_.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve " + describe() + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("cannot connect to " + describe());
  fd_ = fd;
  buffer_.clear();
}

void TcpEndpoint::close_socket() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  buffer_.clear();
}

Response TcpEndpoint::exchange(const Request& request) {
  if (fd_ < 0) connect_socket();
  try {
    write_all(fd_, encode_request(request), describe());
    return decode_response(read_line(fd_, buffer_, options_.timeout, describe()));
  } catch (const Error&) {
    close_socket();
    throw;
  }
}

Response TcpEndpoint::call(const Request& request) {
  std::lock_guard lock(mutex_);
  return exchange(request);
}

// --- factory ----------------------------------------------------------------

std::shared_ptr<Endpoint> make_endpoint(const std::string& spec, CallOptions options,
                                        const ReferenceConfig& ref) {
  if (spec == "ref") {
    return std::make_shared<InProcessEndpoint>(std::make_shared<const ReferenceProvider>(ref));
  }
  if (spec.rfind("exec:", 0) == 0) {
    return std::make_shared<SubprocessEndpoint>(split_command(spec.substr(5)), options);
  }
  if (spec.rfind("tcp:", 0) == 0) {
    const auto rest = spec.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw ConfigError("tcp endpoint needs host:port, got '" + spec + "'");
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad port in endpoint '" + spec + "'");
    }
    return std::make_shared<TcpEndpoint>(rest.substr(0, colon), port, options);
  }
  throw ConfigError("unknown provider endpoint '" + spec + "' (expected ref, exec:<cmd> or tcp:<host>:<port>)");
}

// --- servers ----------------------------------------------------------------

namespace {

// Malformed requests still get an answer so the client is never left waiting.
std::string answer(const ReferenceProvider& provider, std::string_view line) {
  try {
    return encode_response(provider.handle(decode_request(line)));
  } catch (const ProtocolError& e) {
    std::int64_t id = 0;
    const json j = json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_object() && j.contains("id") && j["id"].is_number_integer()) id = j["id"].get<std::int64_t>();
    return encode_response({id, false, json::object(), e.what()});
  }
}

}  // namespace

void serve_lines(const ReferenceProvider& provider, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << answer(provider, line);
    out.flush();
  }
}

void serve_tcp(const ReferenceProvider& provider, int port, int max_connections,
               const std::function<void(int)>& on_listening) {
  ignore_sigpipe();
  const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
  if (srv < 0) throw TransportError(std::string("socket() failed: ") + std::strerror(errno));
  const int yes = 1;
  ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(srv, 8) != 0) {
    ::close(srv);
    throw TransportError("cannot listen on port " + std::to_string(port) + ": " + std::strerror(errno));
  }
  socklen_t len = sizeof addr;
  ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listening) on_listening(ntohs(addr.sin_port));

  for (int served = 0; max_connections <= 0 || served < max_connections; ++served) {
    const int fd = ::accept(srv, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    std::string buffer;
    try {
      for (;;) {
        const std::string line = read_line(fd, buffer, std::chrono::hours(24), "client");
        if (line.empty()) continue;
        write_all(fd, answer(provider, line), "client");
      }
    } catch (const TransportError&) {
      // client went away
    }
    ::close(fd);
  }
  ::close(srv);
}

}  // namespace anicurate::providers
