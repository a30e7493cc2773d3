#include "chewsense/protocol.hpp"

#include "chewsense/io.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>

namespace chewsense::protocol {

namespace {

std::string_view strip_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

long long parse_index(std::string_view s) {
  const double v = io::parse_double(s, "sample index");
  if (v < 0 || v != std::floor(v)) throw FormatError("invalid sample index '" + std::string(s) + "'");
  return static_cast<long long>(v);
}

}  // namespace

std::string_view frame_kind(std::string_view line) {
  line = strip_cr(line);
  return line.substr(0, line.find(','));
}

std::string hello_line(const Hello& h) {
  return "hello," + h.session + ',' + io::format_double(h.sample_rate) + ',' +
         io::format_double(h.profile.reference_amplitude) + ',' + io::format_double(h.profile.baseline.mu0) +
         ',' + io::format_double(h.profile.baseline.delta0) + ',' + io::format_double(h.r_ref);
}

Hello parse_hello(std::string_view line) {
  const auto f = io::split(strip_cr(line), ',');
  if (f.size() != 7 || f[0] != "hello") {
    throw FormatError("hello: expected 'hello,<session>,<fs>,<ref>,<mu0>,<delta0>,<r_ref>'");
  }
  if (f[1].empty()) throw FormatError("hello: empty session id");
  // Session ids name log files, so keep them to a safe character set.
  const bool safe = f[1].front() != '.' && std::all_of(f[1].begin(), f[1].end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
  if (!safe) throw FormatError("hello: session id may only use letters, digits, '_', '-' and '.'");
  Hello h;
  h.session = std::string(f[1]);
  h.sample_rate = io::parse_double(f[2], "sample rate");
  h.profile.reference_amplitude = io::parse_double(f[3], "reference amplitude");
  h.profile.baseline.mu0 = io::parse_double(f[4], "mu0");
  h.profile.baseline.delta0 = io::parse_double(f[5], "delta0");
  h.r_ref = io::parse_double(f[6], "r_ref");
  h.profile.source = "hello:" + h.session;
  if (!(h.sample_rate > 0.0)) throw FormatError("hello: sample rate must be > 0");
  if (!(h.profile.reference_amplitude > 0.0)) throw FormatError("hello: reference amplitude must be > 0");
  if (!(h.r_ref > 0.0)) throw FormatError("hello: r_ref must be > 0");
  return h;
}

std::string samples_line(long long start_index, std::span<const double> values) {
  std::string s = "samples," + std::to_string(start_index);
  for (double v : values) {
    s += ',';
    s += io::format_double(v);
  }
  return s;
}

SamplesFrame parse_samples(std::string_view line) {
  const auto f = io::split(strip_cr(line), ',');
  if (f.size() < 3 || f[0] != "samples") throw FormatError("samples: expected 'samples,<index>,<v1>,...'");
  SamplesFrame s;
  s.start_index = parse_index(f[1]);
  s.values.reserve(f.size() - 2);
  for (std::size_t i = 2; i < f.size(); ++i) {
    const double v = io::parse_double(f[i], "sample");
    if (!std::isfinite(v)) throw FormatError("samples: non-finite value");
    s.values.push_back(v);
  }
  return s;
}

// --- Session ----------------------------------------------------------------

Session::Session(std::shared_ptr<const learn::LinearModel> model, realtime::RtConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
  if (!model_) throw ParameterError("session: no model");
}

const std::vector<ChewEvent>& Session::events() const {
  static const std::vector<ChewEvent> none;
  return detector_ ? detector_->log() : none;
}

void Session::fail(std::vector<std::string>& out, const std::string& msg) {
  out.push_back("error," + msg);
  state_ = State::Closed;
}

std::vector<std::string> Session::handle(std::string_view line) {
  std::vector<std::string> out;
  if (state_ == State::Closed) return out;
  line = strip_cr(line);
  const auto kind = frame_kind(line);
  try {
    if (kind == "hello") {
      if (state_ != State::AwaitHello) {
        fail(out, "duplicate hello");
        return out;
      }
      hello_ = parse_hello(line);
      realtime::RtConfig cfg = config_;
      cfg.preprocess.filter.sample_rate = hello_.sample_rate;
      detector_.emplace(model_, hello_.profile, cfg);
      state_ = State::Streaming;
      out.push_back("hello," + hello_.session + ",ok");
    } else if (kind == "samples") {
      if (state_ != State::Streaming) {
        fail(out, "samples before hello");
        return out;
      }
      const auto frame = parse_samples(line);
      if (frame.start_index != next_index_) {
        fail(out, "non-contiguous samples: expected index " + std::to_string(next_index_) + ", got " +
                      std::to_string(frame.start_index));
        return out;
      }
      for (double v : frame.values) {
        const auto step = detector_->push(std::span<const double>(&v, 1));
        for (const auto& e : step.events) out.push_back(io::event_line(e));
        for (const auto& r : step.rates) {
          out.push_back("rate," + io::format_fixed(r.t, 3) + ',' + io::format_fixed(r.rate, 6));
          const double norm = feedback::normalize_rate(r.rate, {hello_.r_ref});
          if (const auto level = levels_.update(norm)) {
            out.push_back("level," + io::format_fixed(r.t, 3) + ',' + std::string(feedback::to_string(*level)));
          }
        }
      }
      next_index_ += static_cast<long long>(frame.values.size());
    } else if (kind == "bye") {
      if (line != "bye") {
        fail(out, "malformed bye");
        return out;
      }
      out.push_back("bye," + std::to_string(events().size()));
      state_ = State::Closed;
    } else {
      fail(out, "unknown frame kind '" + std::string(kind) + "'");
    }
  } catch (const Error& e) {
    fail(out, e.what());
  }
  return out;
}

// --- FrameQueue -------------------------------------------------------------

FrameQueue::FrameQueue(std::size_t max_samples) : max_(max_samples) {}

void FrameQueue::set_capacity(std::size_t max_samples) {
  std::lock_guard lock(mu_);
  max_ = max_samples;
}

bool FrameQueue::try_push(std::string line, std::size_t samples) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return false;
    if (samples > 0 && pending_ + samples > max_) return false;
    pending_ += samples;
    items_.emplace_back(std::move(line), samples);
  }
  cv_.notify_one();
  return true;
}

std::optional<std::string> FrameQueue::pop() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return closed_ || !items_.empty(); });
  if (items_.empty()) return std::nullopt;
  auto [line, n] = std::move(items_.front());
  items_.pop_front();
  pending_ -= n;
  return std::move(line);
}

void FrameQueue::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::size_t FrameQueue::pending() const {
  std::lock_guard lock(mu_);
  return pending_;
}

// --- sockets ----------------------------------------------------------------

namespace {

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

/// Buffered line reader over a socket.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  std::optional<std::string> next() {
    for (;;) {
      const auto nl = buf_.find('\n', scan_);
      if (nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        scan_ = 0;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      scan_ = buf_.size();
      char chunk[8192];
      const auto n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        if (buf_.empty()) return std::nullopt;
        std::string line = std::move(buf_);
        buf_.clear();
        scan_ = 0;
        return line;
      }
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buf_;
  std::size_t scan_ = 0;
};

std::size_t count_samples(std::string_view line, long long& start) {
  const auto f = io::split(line, ',');
  if (f.size() < 3) return 0;
  try {
    start = parse_index(f[1]);
  } catch (const FormatError&) {
    return 0;
  }
  return f.size() - 2;
}

}  // namespace

Server::Server(std::shared_ptr<const learn::LinearModel> model, ServerOptions options)
    : model_(std::move(model)), options_(std::move(options)) {
  if (!model_) throw ParameterError("server: no model");
  options_.config.validate();
  if (!(options_.max_backlog > 0.0)) throw ParameterError("server: max backlog must be > 0");
  if (!options_.log_dir.empty()) std::filesystem::create_directories(options_.log_dir);
}

Server::~Server() { stop(); }

std::uint16_t Server::listen() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(std::string("server: socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(options_.port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(listen_fd_, 16) < 0) {
    const std::string msg = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("server: cannot listen on port " + std::to_string(options_.port) + ": " + msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  return port_;
}

void Server::run() {
  if (listen_fd_ < 0) listen();
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (stopping_) {
      ::close(fd);
      break;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(threads_mu_);
    open_fds_.push_back(fd);
    threads_.emplace_back([this, fd] { handle_connection(fd); });
  }
}

void Server::start() {
  if (listen_fd_ < 0) listen();
  accept_thread_ = std::thread([this] { run(); });
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(threads_mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    threads.swap(threads_);
  }
  for (auto& t : threads) t.join();
}

void Server::handle_connection(int fd) {
  std::mutex write_mu;
  auto send_lines = [&](const std::vector<std::string>& lines) {
    if (lines.empty()) return;
    std::string block;
    for (const auto& l : lines) block += l + '\n';
    std::lock_guard lock(write_mu);
    send_all(fd, block);
  };

  Session session(model_, options_.config);
  FrameQueue queue(
      static_cast<std::size_t>(options_.max_backlog * options_.config.preprocess.filter.sample_rate));

  std::thread worker([&] {
    while (auto line = queue.pop()) {
      send_lines(session.handle(*line));
      if (session.closed()) break;
    }
    ::shutdown(fd, SHUT_RDWR);
  });

  LineReader reader(fd);
  long long resync = -1;
  while (auto line = reader.next()) {
    const auto kind = frame_kind(*line);
    if (kind == "hello") {
      try {
        queue.set_capacity(static_cast<std::size_t>(options_.max_backlog * parse_hello(*line).sample_rate));
      } catch (const FormatError&) {
        // the session reports it
      }
    }
    long long start = -1;
    const std::size_t n = kind == "samples" ? count_samples(*line, start) : 0;
    if (resync >= 0) {
      // Discard until the client resends the rejected frame.
      if (kind != "samples" || start != resync) continue;
      resync = -1;
    }
    if (kind != "samples") {
      if (!queue.try_push(std::move(*line), 0)) break;
      continue;
    }
    if (!queue.try_push(*line, n)) {
      send_lines({"error,slowdown," + std::to_string(start)});
      resync = start;
    }
  }
  queue.close();
  worker.join();

  if (!options_.log_dir.empty() && session.started()) {
    std::ofstream log(options_.log_dir / (session.id() + ".events"));
    io::write_event_log(session.events(), log);
  }
  {
    std::lock_guard lock(threads_mu_);
    std::erase(open_fds_, fd);
  }
  ::close(fd);
  ++served_;
}

// --- client -----------------------------------------------------------------

namespace {

int connect_to(const ClientOptions& o) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  std::string last_error = "unknown error";
  for (int attempt = 0; attempt <= o.connect_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(o.retry_delay);
    addrinfo* res = nullptr;
    const int rc = ::getaddrinfo(o.host.c_str(), std::to_string(o.port).c_str(), &hints, &res);
    if (rc != 0) {
      last_error = ::gai_strerror(rc);
      continue;
    }
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return fd;
    }
    last_error = std::strerror(errno);
    if (fd >= 0) ::close(fd);
    ::freeaddrinfo(res);
  }
  throw Error("connection to " + o.host + ":" + std::to_string(o.port) + " failed: " + last_error);
}

}  // namespace

std::vector<std::string> stream_client(const RawRecording& rec, const Hello& hello, const ClientOptions& options) {
  if (options.frame_samples < 1) throw ParameterError("client: frame size must be >= 1");
  if (options.speed < 0.0) throw ParameterError("client: speed must be >= 0");
  const int fd = connect_to(options);

  std::vector<std::string> received;
  std::mutex rx_mu;
  std::atomic<long long> rewind{-1};
  std::atomic<bool> server_done{false};
  std::thread rx([&] {
    LineReader reader(fd);
    while (auto line = reader.next()) {
      if (line->starts_with("error,slowdown,")) {
        rewind = parse_index(std::string_view(*line).substr(15));
      }
      if (options.on_line) options.on_line(*line);
      std::lock_guard lock(rx_mu);
      received.push_back(std::move(*line));
    }
    server_done = true;
  });

  bool ok = send_all(fd, hello_line(hello) + '\n');
  const auto& x = rec.channel(Channel::Masseter);
  const auto t0 = std::chrono::steady_clock::now();
  long long i = 0;
  while (ok && !server_done) {
    if (const long long r = rewind.exchange(-1); r >= 0) {
      // The server drops everything up to the rejected frame, including a bye.
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      i = r;
    }
    if (i >= x.size()) {
      if (i == x.size()) ok = send_all(fd, "bye\n");
      i = x.size() + 1;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      continue;
    }
    const long long n = std::min<long long>(options.frame_samples, x.size() - i);
    if (options.speed > 0.0) {
      const double due = static_cast<double>(i + n) / hello.sample_rate / options.speed;
      std::this_thread::sleep_until(t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                              std::chrono::duration<double>(due)));
    }
    ok = send_all(fd, samples_line(i, std::span<const double>(x.data() + i, static_cast<std::size_t>(n))) + '\n');
    i += n;
  }
  ::shutdown(fd, SHUT_WR);
  rx.join();
  ::close(fd);
  return received;
}

}  // namespace chewsense::protocol
