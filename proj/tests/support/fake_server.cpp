#include "fake_server.hpp"

#include "saleval/protocol.hpp"

#include <json.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <csignal>
#include <string>

namespace fake {

namespace {

bool write_line(int fd, const std::string& line) {
  const std::string data = line + "\n";
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n <= 0) return false;
    done += static_cast<std::size_t>(n);
  }
  return true;
}

bool read_line(int fd, std::string& buffer, std::string& line) {
  for (;;) {
    const auto nl = buffer.find('\n');
    if (nl != std::string::npos) {
      line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      return true;
    }
    char chunk[65536];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n <= 0) return false;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string reply(const std::string& line, const Options& options) {
  using saleval::ScoreVector;
  std::optional<std::uint64_t> id;
  saleval::protocol::ScoreRequest req;
  try {
    req = saleval::protocol::parse_score_request(line, &id);
  } catch (const std::exception& e) {
    return saleval::protocol::error_response(id.value_or(0), e.what());
  }
  std::vector<ScoreVector> scores;
  for (const auto& img : req.images) {
    // Only single-pixel images carry a sentinel.
    const double first = img.size() == 1 ? img(0, 0, 0) : -1.0;
    if (first == 1.0) std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    if (first == 0.0) return saleval::protocol::error_response(req.id, "sentinel error");
    if (first == 0.5) return "this is not json";
    const double z = logit(img.interleaved());
    ScoreVector s(2);
    if (options.logits) {
      s << 0.0, z;
    } else {
      const double p = 1.0 / (1.0 + std::exp(-z));
      s << 1.0 - p, p;
    }
    if (first == 0.25) s(0) += 0.1;
    scores.push_back(s);
  }
  return saleval::protocol::score_response(req.id, scores);
}

}  // namespace

double logit(const std::vector<double>& pixels) {
  double sum = 0.0;
  for (double v : pixels) sum += static_cast<float>(v);
  return 4.0 * (sum / static_cast<double>(pixels.size()) - 0.5);
}

void serve(int in_fd, int out_fd, const Options& options) {
  std::string buffer, line;
  while (read_line(in_fd, buffer, line)) {
    std::string out;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.value("op", "") == "hello") {
        out = nlohmann::json{{"version", 1},
                             {"categories", 2},
                             {"output", options.logits ? "logits" : "probabilities"},
                             {"batch", options.batch}}
                  .dump();
      } else {
        out = reply(line, options);
      }
    } catch (const nlohmann::json::exception&) {
      out = saleval::protocol::error_response(0, "malformed request");
    }
    if (!write_line(out_fd, out)) return;
  }
}

TcpServer::TcpServer(Options options) : options_(options) {
  std::signal(SIGPIPE, SIG_IGN);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    throw std::runtime_error("fake server: cannot listen");
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] {
    while (!stop_) {
      pollfd p{listen_fd_, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      ++connections_;
      workers_.emplace_back([fd, this] {
        serve(fd, fd, options_);
        ::close(fd);
      });
    }
  });
}

TcpServer::~TcpServer() {
  stop_ = true;
  acceptor_.join();
  ::close(listen_fd_);
  for (auto& w : workers_) w.join();
}

}  // namespace fake
