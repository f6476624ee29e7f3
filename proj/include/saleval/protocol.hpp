#pragma once

#include "saleval/scorer.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Scorer wire protocol: newline-delimited JSON objects over a child's stdio
// or a TCP stream.
//
//   engine -> {"op":"hello","version":1}
//   scorer -> {"version":1,"categories":K,"output":"probabilities"|"logits","batch":true|false}
//   engine -> {"id":N,"op":"score","shape":[H,W,C],"dtype":"f32","data":"<base64>"}
//   engine -> {"id":N,"op":"score_batch","shape":[B,H,W,C],"dtype":"f32","data":"<base64>"}
//   scorer -> {"id":N,"scores":[[...],...]}  or  {"id":N,"error":"..."}
//
// Pixel data is float32 little-endian, row-major, channel-last.
namespace saleval::protocol {

constexpr int kVersion = 1;

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// float32 little-endian bytes of the images, concatenated.
std::vector<std::uint8_t> pack_pixels(std::span<const Image> images);

std::string hello_message();
std::string score_request(std::uint64_t id, std::span<const Image> images);

struct Handshake {
  Index categories = 0;
  OutputKind output = OutputKind::kProbabilities;
  bool batch = false;
};

Handshake parse_handshake(const std::string& line);

struct ScoreRequest {
  std::uint64_t id = 0;
  bool batch = false;
  std::vector<Image> images;
};

/// Server-side decoding of a score/score_batch line. Throws ScorerError
/// kMalformedResponse on bad input; `id` is filled when it could be read.
ScoreRequest parse_score_request(const std::string& line, std::optional<std::uint64_t>* id = nullptr);

std::string score_response(std::uint64_t id, const std::vector<ScoreVector>& scores);
std::string error_response(std::uint64_t id, const std::string& message);

/// Client-side decoding; throws ScorerError on id mismatch, error replies and
/// shape problems.
std::vector<ScoreVector> parse_score_response(const std::string& line, std::uint64_t expected_id,
                                              std::size_t expected_count, Index categories);

/// Bidirectional line channel.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void write_line(const std::string& line) = 0;
  /// Throws kTimeout when no full line arrives in time, kProtocol on EOF.
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

/// Spawns argv[0] with pipes on stdin/stdout. The child is killed and reaped
/// on destruction.
class SubprocessTransport final : public LineTransport {
 public:
  explicit SubprocessTransport(const std::vector<std::string>& argv);
  ~SubprocessTransport() override;
  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  void write_line(const std::string& line) override;
  std::string read_line(std::chrono::milliseconds timeout) override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

class TcpTransport final : public LineTransport {
 public:
  TcpTransport(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void write_line(const std::string& line) override;
  std::string read_line(std::chrono::milliseconds timeout) override;

 private:
  int fd_ = -1;
  std::string buffer_;
};

/// Splits "a b  c" on whitespace; no quoting.
std::vector<std::string> split_command(const std::string& command);

using TransportFactory = std::function<std::unique_ptr<LineTransport>()>;

/// Scorer backed by an external process or socket. After a timeout or
/// protocol failure the connection is dropped and re-established on the next
/// request, so one bad image does not poison a batch run.
class ProtocolScorer final : public Scorer {
 public:
  ProtocolScorer(TransportFactory connect, std::string id, std::size_t batch_size,
                 std::chrono::milliseconds timeout);

  ScoreVector score(const Image& image) override;
  std::vector<ScoreVector> score_batch(std::span<const Image> images) override;
  Index categories() const override { return handshake_.categories; }
  std::string id() const override { return id_; }

  const Handshake& handshake() const { return handshake_; }

 private:
  void ensure_connected();
  std::vector<ScoreVector> request(std::span<const Image> images, bool batch);

  TransportFactory connect_;
  std::unique_ptr<LineTransport> transport_;
  Handshake handshake_;
  std::string id_;
  std::size_t batch_size_;
  std::chrono::milliseconds timeout_;
  std::uint64_t next_id_ = 1;
};

}  // namespace saleval::protocol
