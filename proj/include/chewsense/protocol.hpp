#pragma once

#include "chewsense/feedback.hpp"
#include "chewsense/learn.hpp"
#include "chewsense/realtime.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace chewsense::protocol {

// Client -> server:
//   hello,<session>,<sample_rate>,<reference>,<mu0>,<delta0>,<r_ref>
//   samples,<start_index>,<v1>,<v2>,...
//   bye
// Server -> client:
//   hello,<session>,ok
//   rate,<t>,<rate>             once per second of sample clock
//   level,<t>,<Level>           on every feedback level transition
//   event,<onset>,<termination>,<duration>
//   bye,<event count>
//   error,<message>             followed by close
//   error,slowdown,<index>      samples frame rejected; resend from <index>

struct Hello {
  std::string session;
  double sample_rate = 1024.0;
  realtime::CalibrationProfile profile;
  double r_ref = 1.5;
};

std::string hello_line(const Hello& h);
Hello parse_hello(std::string_view line);
std::string samples_line(long long start_index, std::span<const double> values);

struct SamplesFrame {
  long long start_index = 0;
  std::vector<double> values;
};
SamplesFrame parse_samples(std::string_view line);

/// Frame kind: the text before the first comma.
std::string_view frame_kind(std::string_view line);

/// Per-connection protocol state machine. Pure: lines in, reply lines out.
class Session {
 public:
  Session(std::shared_ptr<const learn::LinearModel> model, realtime::RtConfig config = {});

  std::vector<std::string> handle(std::string_view line);

  bool closed() const { return state_ == State::Closed; }
  bool started() const { return detector_.has_value(); }
  const std::string& id() const { return hello_.session; }
  const std::vector<ChewEvent>& events() const;
  long long next_index() const { return next_index_; }

 private:
  enum class State { AwaitHello, Streaming, Closed };

  void fail(std::vector<std::string>& out, const std::string& msg);

  std::shared_ptr<const learn::LinearModel> model_;
  realtime::RtConfig config_;
  State state_ = State::AwaitHello;
  Hello hello_;
  std::optional<realtime::ChewDetector> detector_;
  feedback::LevelTracker levels_;
  long long next_index_ = 0;
};

/// Bounded hand-off between a connection's reader and its worker, measured
/// in pending samples.
class FrameQueue {
 public:
  explicit FrameQueue(std::size_t max_samples);

  /// False when accepting `samples` more would exceed the limit.
  bool try_push(std::string line, std::size_t samples);
  /// Blocks; nullopt once closed and drained.
  std::optional<std::string> pop();
  void close();
  std::size_t pending() const;
  void set_capacity(std::size_t max_samples);

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::pair<std::string, std::size_t>> items_;
  std::size_t pending_ = 0;
  std::size_t max_;
  bool closed_ = false;
};

struct ServerOptions {
  std::uint16_t port = 7878;  // 0 picks a free port
  std::filesystem::path log_dir;  // empty: no event logs
  double max_backlog = 10.0;  // seconds of queued samples
  realtime::RtConfig config;
};

/// TCP server, one thread per connection; the model is shared read-only.
class Server {
 public:
  Server(std::shared_ptr<const learn::LinearModel> model, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Bind and listen; returns the bound port.
  std::uint16_t listen();
  /// Accept loop; returns after stop().
  void run();
  void start();  // listen() + run() on a background thread
  void stop();
  std::uint16_t port() const { return port_; }
  std::size_t sessions_served() const { return served_.load(); }

 private:
  void handle_connection(int fd);

  std::shared_ptr<const learn::LinearModel> model_;
  ServerOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> served_{0};
  std::thread accept_thread_;
  std::mutex threads_mu_;
  std::vector<std::thread> threads_;
  std::vector<int> open_fds_;
};

struct ClientOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7878;
  double speed = 1.0;  // pacing factor against the sample clock; 0 = unpaced
  int frame_samples = 64;
  int connect_retries = 3;
  std::chrono::milliseconds retry_delay{200};
  std::function<void(const std::string&)> on_line;  // called for every received line
};

/// Replay the masseter channel of a recording to a server. Returns every line
/// the server sent, in order.
std::vector<std::string> stream_client(const RawRecording& rec, const Hello& hello,
                                       const ClientOptions& options);

}  // namespace chewsense::protocol
