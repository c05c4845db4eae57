// Heartbeat reporting to a competition Technical Director (TD) server.
//
// Wire format (ASCII, CRLF terminated):
//
//   $RXHRB,<ddmmyy>,<hhmmss>,<lat>,<N|S>,<lon>,<E|W>,<team>,<mode>*<CS>\r\n
//
// lat/lon are unsigned decimal degrees with exactly six fraction digits,
// mode is 1 (remote), 2 (autonomous) or 3 (killed), and CS is the XOR of all
// bytes between '$' and '*' as two uppercase hex digits.
#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace usvnav::heartbeat {

inline constexpr std::string_view kTag = "RXHRB";

enum class SystemMode : int { Remote = 1, Autonomous = 2, Killed = 3 };

struct HeartbeatSentence {
  std::string date = "000000";   // ddmmyy
  std::string time = "000000";   // hhmmss
  std::uint32_t lat_udeg = 0;    // micro-degrees, <= 90e6
  char lat_hemi = 'N';
  std::uint32_t lon_udeg = 0;    // micro-degrees, <= 180e6
  char lon_hemi = 'E';
  std::string team_id = "OUXT";
  SystemMode mode = SystemMode::Autonomous;

  /// Throws std::invalid_argument for any out-of-grammar field.
  void validate() const;
  bool operator==(const HeartbeatSentence&) const = default;
};

/// XOR of every byte in payload.
std::uint8_t checksum(std::string_view payload);

/// Full line including the trailing CRLF. Validates first.
std::string encode(const HeartbeatSentence& s);

enum class DecodeErrorKind { Framing, FieldCount, Range, Checksum };
std::string_view to_string(DecodeErrorKind k);

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  DecodeErrorKind kind() const { return kind_; }

 private:
  DecodeErrorKind kind_;
};

/// Parses one line; a trailing CR/LF is tolerated. Throws DecodeError.
HeartbeatSentence decode(std::string_view line);

/// Flat-earth conversion from the local ENU frame (x east, y north).
struct GeoDatum {
  double lat0 = 21.3099;    // [deg]
  double lon0 = -157.8881;  // [deg]
  double m_per_deg = 111320.0;

  void to_latlon(double x, double y, double& lat, double& lon) const;
};

/// Vehicle state handed from the simulation to the heartbeat thread.
struct VehicleSnapshot {
  double sim_time = 0.0;
  double x = 0.0;
  double y = 0.0;
  SystemMode mode = SystemMode::Autonomous;
};

struct SentenceClock {
  std::string date = "081122";
  int start_seconds_of_day = 0;
};

HeartbeatSentence make_sentence(const VehicleSnapshot& snap, const GeoDatum& datum,
                                const std::string& team_id, const SentenceClock& clock = {});

/// Splits a byte stream into lines, independent of how it was segmented.
class LineAssembler {
 public:
  /// Returns the complete lines (without CR/LF) contained so far.
  std::vector<std::string> feed(std::string_view bytes);
  std::size_t pending() const { return buffer_.size(); }

 private:
  std::string buffer_;
};

/// Single-slot mailbox: the consumer always sees the newest snapshot.
template <typename T>
class SnapshotChannel {
 public:
  void publish(T value) {
    std::lock_guard lock(mutex_);
    latest_ = std::move(value);
  }
  std::optional<T> latest() const {
    std::lock_guard lock(mutex_);
    return latest_;
  }

 private:
  mutable std::mutex mutex_;
  std::optional<T> latest_;
};

// ---------------------------------------------------------------------------

struct ClientConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 9000;
  double rate_hz = 1.0;
  std::string team_id = "OUXT";
  GeoDatum datum;
  SentenceClock clock;
  std::chrono::milliseconds backoff_initial{1000};
  std::chrono::milliseconds backoff_max{30000};
};

/// Background sender: one sentence per period built from the newest
/// snapshot, reconnecting with exponential backoff.
class HeartbeatClient {
 public:
  HeartbeatClient(ClientConfig config, const SnapshotChannel<VehicleSnapshot>& channel);
  ~HeartbeatClient();
  HeartbeatClient(const HeartbeatClient&) = delete;
  HeartbeatClient& operator=(const HeartbeatClient&) = delete;

  void start();
  void stop();

  std::size_t sent() const { return sent_.load(); }
  std::size_t connect_failures() const { return connect_failures_.load(); }
  std::size_t connections() const { return connections_.load(); }
  bool connected() const { return connected_.load(); }

 private:
  void run();
  /// Sleeps until deadline unless stopped; returns false when stopping.
  bool wait_until(std::chrono::steady_clock::time_point deadline);

  ClientConfig config_;
  const SnapshotChannel<VehicleSnapshot>& channel_;
  std::thread thread_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::atomic<std::size_t> sent_{0};
  std::atomic<std::size_t> connect_failures_{0};
  std::atomic<std::size_t> connections_{0};
  std::atomic<bool> connected_{false};
};

struct ServerRecord {
  std::size_t connection = 0;
  double recv_time = 0.0;  // seconds since server start
  std::string line;
  std::optional<HeartbeatSentence> sentence;
  std::optional<DecodeErrorKind> error;
};

/// Mock TD server: accepts any number of clients, decodes each line and
/// keeps a record. Optionally echoes records to a stream.
class MockServer {
 public:
  /// Port 0 binds an ephemeral port. Throws std::runtime_error if binding fails.
  explicit MockServer(std::uint16_t port = 0, std::ostream* display = nullptr);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

  std::vector<ServerRecord> records() const;
  /// Blocks until at least n records with a valid sentence exist or timeout.
  bool wait_for_valid(std::size_t n, std::chrono::milliseconds timeout) const;

 private:
  void accept_loop();
  void serve(int fd, std::size_t id);
  void add(ServerRecord rec);

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::ostream* display_;
  std::chrono::steady_clock::time_point start_;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex threads_mutex_;
  std::vector<std::thread> workers_;
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::vector<ServerRecord> records_;
};

}  // namespace usvnav::heartbeat
