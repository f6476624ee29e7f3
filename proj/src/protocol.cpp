#include "saleval/protocol.hpp"

#include <json.hpp>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <bit>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <sstream>

namespace saleval::protocol {

using nlohmann::json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

[[noreturn]] void malformed(const std::string& what) {
  throw ScorerError(ScorerErrc::kMalformedResponse, what);
}

json parse_json_line(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) malformed("not a JSON object: " + line.substr(0, 80));
  return j;
}

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

void write_all(int fd, const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ScorerError(ScorerErrc::kProtocol, std::string("write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

std::string read_line_fd(int fd, std::string& buffer, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (const auto nl = buffer.find('\n'); nl != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw ScorerError(ScorerErrc::kTimeout, "no reply in time");
    pollfd p{fd, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw ScorerError(ScorerErrc::kProtocol, std::string("poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) throw ScorerError(ScorerErrc::kTimeout, "no reply in time");
    std::array<char, 65536> chunk{};
    const ssize_t n = ::read(fd, chunk.data(), chunk.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ScorerError(ScorerErrc::kProtocol, std::string("read failed: ") + std::strerror(errno));
    }
    if (n == 0) throw ScorerError(ScorerErrc::kProtocol, "peer closed the connection");
    buffer.append(chunk.data(), static_cast<std::size_t>(n));
  }
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rem = bytes.size() - i; rem > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rem == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rem == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) malformed("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    const int pad = last ? (text[i + 3] == '=') + (text[i + 2] == '=') : 0;
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + static_cast<std::size_t>(k)];
      const int d = (k >= 4 - pad) ? 0 : decode_char(c);
      if (d < 0) malformed("invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

std::vector<std::uint8_t> pack_pixels(std::span<const Image> images) {
  std::vector<std::uint8_t> out;
  for (const auto& img : images) {
    for (double v : img.interleaved()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  return out;
}

std::string hello_message() { return json{{"op", "hello"}, {"version", kVersion}}.dump(); }

std::string score_request(std::uint64_t id, std::span<const Image> images) {
  if (images.empty()) throw std::invalid_argument("score request needs at least one image");
  const Image& first = images.front();
  for (const auto& img : images) {
    if (!img.same_shape(first)) {
      throw ScorerError(ScorerErrc::kDimensionMismatch, "batched images must share a shape");
    }
  }
  json j;
  j["id"] = id;
  if (images.size() == 1) {
    j["op"] = "score";
    j["shape"] = {first.height(), first.width(), first.channels()};
  } else {
    j["op"] = "score_batch";
    j["shape"] = {images.size(), first.height(), first.width(), first.channels()};
  }
  j["dtype"] = "f32";
  j["data"] = base64_encode(pack_pixels(images));
  return j.dump();
}

Handshake parse_handshake(const std::string& line) {
  const json j = parse_json_line(line);
  Handshake h;
  try {
    if (j.at("version").get<int>() != kVersion) {
      throw ScorerError(ScorerErrc::kProtocol, "unsupported protocol version");
    }
    h.categories = j.at("categories").get<Index>();
    const std::string output = j.at("output").get<std::string>();
    if (output == "probabilities") {
      h.output = OutputKind::kProbabilities;
    } else if (output == "logits") {
      h.output = OutputKind::kLogits;
    } else {
      malformed("unknown output kind '" + output + "'");
    }
    h.batch = j.value("batch", false);
  } catch (const json::exception& e) {
    malformed(std::string("bad handshake: ") + e.what());
  }
  if (h.categories < 1) malformed("handshake declares no categories");
  return h;
}

ScoreRequest parse_score_request(const std::string& line, std::optional<std::uint64_t>* id_out) {
  const json j = parse_json_line(line);
  ScoreRequest req;
  try {
    req.id = j.at("id").get<std::uint64_t>();
    if (id_out) *id_out = req.id;
    const std::string op = j.at("op").get<std::string>();
    if (op != "score" && op != "score_batch") malformed("unknown op '" + op + "'");
    req.batch = op == "score_batch";
    if (j.value("dtype", std::string("f32")) != "f32") malformed("only f32 is supported");
    const auto shape = j.at("shape").get<std::vector<std::int64_t>>();
    if (shape.size() != (req.batch ? 4u : 3u)) malformed("shape has wrong rank");
    for (auto d : shape)
      if (d < 1 || d > (1 << 20)) malformed("shape entries must be positive");
    const std::int64_t n = req.batch ? shape[0] : 1;
    const std::int64_t h = shape[req.batch ? 1 : 0], w = shape[req.batch ? 2 : 1],
                       c = shape[req.batch ? 3 : 2];
    const auto bytes = base64_decode(j.at("data").get<std::string>());
    if (static_cast<std::int64_t>(bytes.size()) != 4 * n * h * w * c) {
      malformed("payload length does not match shape");
    }
    std::vector<double> px(static_cast<std::size_t>(h * w * c));
    std::size_t off = 0;
    for (std::int64_t b = 0; b < n; ++b) {
      for (double& v : px) {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) bits |= std::uint32_t{bytes[off++]} << (8 * k);
        v = std::bit_cast<float>(bits);
      }
      req.images.push_back(Image::from_interleaved(h, w, c, px));
    }
  } catch (const json::exception& e) {
    malformed(std::string("bad request: ") + e.what());
  } catch (const DimensionError& e) {
    malformed(e.what());
  }
  return req;
}

std::string score_response(std::uint64_t id, const std::vector<ScoreVector>& scores) {
  json rows = json::array();
  for (const auto& s : scores) rows.push_back(std::vector<double>(s.data(), s.data() + s.size()));
  return json{{"id", id}, {"scores", rows}}.dump();
}

std::string error_response(std::uint64_t id, const std::string& message) {
  return json{{"id", id}, {"error", message}}.dump();
}

std::vector<ScoreVector> parse_score_response(const std::string& line, std::uint64_t expected_id,
                                              std::size_t expected_count, Index categories) {
  const json j = parse_json_line(line);
  std::vector<ScoreVector> out;
  try {
    const auto id = j.at("id").get<std::uint64_t>();
    if (id != expected_id) {
      throw ScorerError(ScorerErrc::kProtocol, "reply id " + std::to_string(id) +
                                                   " does not match request " +
                                                   std::to_string(expected_id));
    }
    if (j.contains("error")) {
      throw ScorerError(ScorerErrc::kRemoteError, j["error"].dump());
    }
    const auto rows = j.at("scores").get<std::vector<std::vector<double>>>();
    if (rows.size() != expected_count) malformed("wrong number of score rows");
    for (const auto& r : rows) {
      if (static_cast<Index>(r.size()) != categories) malformed("wrong number of categories");
      out.push_back(Eigen::Map<const Eigen::VectorXd>(r.data(), categories));
    }
  } catch (const json::exception& e) {
    malformed(std::string("bad reply: ") + e.what());
  }
  return out;
}

std::vector<std::string> split_command(const std::string& command) {
  std::istringstream is(command);
  std::vector<std::string> argv;
  for (std::string word; is >> word;) argv.push_back(word);
  return argv;
}

SubprocessTransport::SubprocessTransport(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ScorerError(ScorerErrc::kConfig, "empty command line");
  ignore_sigpipe();
  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw ScorerError(ScorerErrc::kProtocol, "pipe failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw ScorerError(ScorerErrc::kProtocol, "pipe failed");
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_ = ::fork();
  if (pid_ < 0) throw ScorerError(ScorerErrc::kProtocol, "fork failed");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

SubprocessTransport::~SubprocessTransport() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    // Closing stdin asks a well-behaved child to exit; give it a moment.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
      ::usleep(2000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
}

void SubprocessTransport::write_line(const std::string& line) { write_all(to_child_, line + "\n"); }

std::string SubprocessTransport::read_line(std::chrono::milliseconds timeout) {
  return read_line_fd(from_child_, buffer_, timeout);
}

TcpTransport::TcpTransport(const std::string& host, std::uint16_t port,
                           std::chrono::milliseconds timeout) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) {
    throw ScorerError(ScorerErrc::kProtocol, "cannot resolve " + host);
  }
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    fd_ = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd_ < 0) continue;
    timeval tv{static_cast<time_t>(timeout.count() / 1000),
               static_cast<suseconds_t>((timeout.count() % 1000) * 1000)};
    ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    if (::connect(fd_, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) {
    throw ScorerError(ScorerErrc::kProtocol, "cannot connect to " + host + ":" + std::to_string(port));
  }
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpTransport::write_line(const std::string& line) { write_all(fd_, line + "\n"); }

std::string TcpTransport::read_line(std::chrono::milliseconds timeout) {
  return read_line_fd(fd_, buffer_, timeout);
}

ProtocolScorer::ProtocolScorer(TransportFactory connect, std::string id, std::size_t batch_size,
                               std::chrono::milliseconds timeout)
    : connect_(std::move(connect)),
      id_(std::move(id)),
      batch_size_(std::max<std::size_t>(1, batch_size)),
      timeout_(timeout) {
  ensure_connected();
}

void ProtocolScorer::ensure_connected() {
  if (transport_) return;
  auto t = connect_();
  t->write_line(hello_message());
  const Handshake h = parse_handshake(t->read_line(timeout_));
  if (handshake_.categories != 0 && h.categories != handshake_.categories) {
    throw ScorerError(ScorerErrc::kProtocol, "category count changed after reconnect");
  }
  handshake_ = h;
  transport_ = std::move(t);
}

std::vector<ScoreVector> ProtocolScorer::request(std::span<const Image> images, bool batch) {
  ensure_connected();
  const std::uint64_t id = next_id_++;
  std::vector<ScoreVector> scores;
  try {
    transport_->write_line(batch ? score_request(id, images) : score_request(id, images.first(1)));
    scores = parse_score_response(transport_->read_line(timeout_), id, images.size(),
                                  handshake_.categories);
  } catch (const ScorerError& e) {
    // A complete reply line keeps the stream in sync; timeouts and broken
    // framing do not.
    if (e.code() == ScorerErrc::kTimeout || e.code() == ScorerErrc::kProtocol) transport_.reset();
    throw;
  }
  for (auto& s : scores) {
    if (handshake_.output == OutputKind::kLogits) {
      if (!s.allFinite()) malformed("non-finite logits");
      s = softmax(s);
    }
    validate_probabilities(s);
  }
  return scores;
}

ScoreVector ProtocolScorer::score(const Image& image) {
  return request(std::span<const Image>(&image, 1), false).front();
}

std::vector<ScoreVector> ProtocolScorer::score_batch(std::span<const Image> images) {
  std::vector<ScoreVector> out;
  out.reserve(images.size());
  if (!handshake_.batch) {
    for (const auto& img : images) out.push_back(score(img));
    return out;
  }
  for (std::size_t start = 0; start < images.size(); start += batch_size_) {
    const auto chunk = images.subspan(start, std::min(batch_size_, images.size() - start));
    auto part = request(chunk, chunk.size() > 1);
    for (auto& s : part) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace saleval::protocol
