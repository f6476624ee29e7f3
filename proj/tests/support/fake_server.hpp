#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

// Test double for an external model. Scores are a two-category logistic on
// the mean pixel: z = 4 * (mean - 0.5), reply (1 - sigmoid(z), sigmoid(z)).
//
// A single-pixel image selects a misbehaviour by its value:
//   exactly 1.0 -> sleep 1.5 s before answering
//   exactly 0.0 -> error object with the request id
//   exactly 0.5 -> a line that is not JSON
//   exactly 0.25 -> scores that do not sum to 1
namespace fake {

struct Options {
  bool logits = false;    // reply with (0, z) and declare "logits"
  bool batch = true;      // declare batch support
};

double logit(const std::vector<double>& pixels);

/// Serves one connection until EOF on `in_fd`.
void serve(int in_fd, int out_fd, const Options& options);

/// Listens on 127.0.0.1 with an ephemeral port; each accepted connection is
/// served on its own thread.
class TcpServer {
 public:
  explicit TcpServer(Options options);
  ~TcpServer();
  std::uint16_t port() const { return port_; }
  int connections() const { return connections_.load(); }

 private:
  Options options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::atomic<int> connections_{0};
  std::vector<std::thread> workers_;
  std::thread acceptor_;
};

}  // namespace fake
