#include "usvnav/heartbeat.hpp"

#include "usvnav/tcp.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace usvnav::heartbeat {

namespace {

bool all_digits(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int two(std::string_view s, std::size_t at) { return (s[at] - '0') * 10 + (s[at + 1] - '0'); }

bool valid_date(std::string_view d) {
  return d.size() == 6 && all_digits(d) && two(d, 0) <= 31 && two(d, 2) <= 12;
}

bool valid_time(std::string_view t) {
  return t.size() == 6 && all_digits(t) && two(t, 0) < 24 && two(t, 2) < 60 && two(t, 4) < 60;
}

bool valid_team(std::string_view t) {
  return !t.empty() && t.size() <= 16 &&
         std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isalnum(c) != 0; });
}

bool valid_mode(SystemMode m) {
  const int v = static_cast<int>(m);
  return v >= 1 && v <= 3;
}

std::string format_udeg(std::uint32_t udeg) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%u.%06u", udeg / 1000000u, udeg % 1000000u);
  return buf;
}

// "<int>.<6 digits>" to micro-degrees; nullopt on bad grammar or overflow.
std::optional<std::uint32_t> parse_udeg(std::string_view s, std::uint32_t max_udeg) {
  const auto dot = s.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot > 3) return std::nullopt;
  const std::string_view ip = s.substr(0, dot);
  const std::string_view fp = s.substr(dot + 1);
  if (fp.size() != 6 || !all_digits(ip) || !all_digits(fp)) return std::nullopt;
  std::uint32_t whole = 0, frac = 0;
  for (char c : ip) whole = whole * 10 + static_cast<std::uint32_t>(c - '0');
  for (char c : fp) frac = frac * 10 + static_cast<std::uint32_t>(c - '0');
  const std::uint64_t v = static_cast<std::uint64_t>(whole) * 1000000u + frac;
  if (v > max_udeg) return std::nullopt;
  return static_cast<std::uint32_t>(v);
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

constexpr std::uint32_t kMaxLat = 90'000'000u;
constexpr std::uint32_t kMaxLon = 180'000'000u;

}  // namespace

void HeartbeatSentence::validate() const {
  if (!valid_date(date)) throw std::invalid_argument("heartbeat: date must be ddmmyy");
  if (!valid_time(time)) throw std::invalid_argument("heartbeat: time must be hhmmss");
  if (lat_udeg > kMaxLat || (lat_hemi != 'N' && lat_hemi != 'S'))
    throw std::invalid_argument("heartbeat: latitude out of range");
  if (lon_udeg > kMaxLon || (lon_hemi != 'E' && lon_hemi != 'W'))
    throw std::invalid_argument("heartbeat: longitude out of range");
  if (!valid_team(team_id)) throw std::invalid_argument("heartbeat: team id must be 1-16 alphanumerics");
  if (!valid_mode(mode)) throw std::invalid_argument("heartbeat: invalid system mode");
}

std::uint8_t checksum(std::string_view payload) {
  std::uint8_t cs = 0;
  for (char c : payload) cs ^= static_cast<std::uint8_t>(c);
  return cs;
}

std::string encode(const HeartbeatSentence& s) {
  s.validate();
  std::string payload(kTag);
  payload += ',' + s.date + ',' + s.time + ',' + format_udeg(s.lat_udeg) + ',' + s.lat_hemi + ',' +
             format_udeg(s.lon_udeg) + ',' + s.lon_hemi + ',' + s.team_id + ',' +
             std::to_string(static_cast<int>(s.mode));
  char cs[3];
  std::snprintf(cs, sizeof cs, "%02X", checksum(payload));
  return '$' + payload + '*' + cs + "\r\n";
}

std::string_view to_string(DecodeErrorKind k) {
  switch (k) {
    case DecodeErrorKind::Framing: return "framing";
    case DecodeErrorKind::FieldCount: return "field_count";
    case DecodeErrorKind::Range: return "range";
    case DecodeErrorKind::Checksum: return "checksum";
  }
  return "?";
}

HeartbeatSentence decode(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.empty() || line.front() != '$')
    throw DecodeError(DecodeErrorKind::Framing, "missing '$' start");
  const auto star = line.rfind('*');
  if (star == std::string_view::npos || line.size() - star - 1 != 2)
    throw DecodeError(DecodeErrorKind::Framing, "missing '*hh' checksum suffix");
  const int hi = hex_value(line[star + 1]);
  const int lo = hex_value(line[star + 2]);
  if (hi < 0 || lo < 0) throw DecodeError(DecodeErrorKind::Framing, "checksum is not uppercase hex");
  const std::string_view payload = line.substr(1, star - 1);
  if (checksum(payload) != hi * 16 + lo)
    throw DecodeError(DecodeErrorKind::Checksum, "checksum mismatch");

  const auto f = split(payload, ',');
  if (f.size() != 9) throw DecodeError(DecodeErrorKind::FieldCount, "expected 9 fields");
  if (f[0] != kTag) throw DecodeError(DecodeErrorKind::Framing, "unexpected sentence tag");

  HeartbeatSentence s;
  const auto range = [](const char* what) { return DecodeError(DecodeErrorKind::Range, what); };
  if (!valid_date(f[1])) throw range("bad date");
  if (!valid_time(f[2])) throw range("bad time");
  s.date = std::string(f[1]);
  s.time = std::string(f[2]);
  const auto lat = parse_udeg(f[3], kMaxLat);
  if (!lat || f[4].size() != 1 || (f[4][0] != 'N' && f[4][0] != 'S')) throw range("bad latitude");
  const auto lon = parse_udeg(f[5], kMaxLon);
  if (!lon || f[6].size() != 1 || (f[6][0] != 'E' && f[6][0] != 'W')) throw range("bad longitude");
  s.lat_udeg = *lat;
  s.lat_hemi = f[4][0];
  s.lon_udeg = *lon;
  s.lon_hemi = f[6][0];
  if (!valid_team(f[7])) throw range("bad team id");
  s.team_id = std::string(f[7]);
  if (f[8].size() != 1 || f[8][0] < '1' || f[8][0] > '3') throw range("bad system mode");
  s.mode = static_cast<SystemMode>(f[8][0] - '0');
  return s;
}

void GeoDatum::to_latlon(double x, double y, double& lat, double& lon) const {
  constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
  lat = lat0 + y / m_per_deg;
  lon = lon0 + x / (m_per_deg * std::cos(lat0 * kDegToRad));
}

HeartbeatSentence make_sentence(const VehicleSnapshot& snap, const GeoDatum& datum,
                                const std::string& team_id, const SentenceClock& clock) {
  double lat = 0.0, lon = 0.0;
  datum.to_latlon(snap.x, snap.y, lat, lon);
  HeartbeatSentence s;
  s.date = clock.date;
  const long secs =
      (clock.start_seconds_of_day + static_cast<long>(std::floor(snap.sim_time))) % 86400;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02ld%02ld%02ld", secs / 3600, (secs / 60) % 60, secs % 60);
  s.time = buf;
  s.lat_hemi = lat < 0.0 ? 'S' : 'N';
  s.lon_hemi = lon < 0.0 ? 'W' : 'E';
  s.lat_udeg = static_cast<std::uint32_t>(std::min(std::llround(std::abs(lat) * 1e6), 90'000'000LL));
  s.lon_udeg = static_cast<std::uint32_t>(std::min(std::llround(std::abs(lon) * 1e6), 180'000'000LL));
  s.team_id = team_id;
  s.mode = snap.mode;
  return s;
}

std::vector<std::string> LineAssembler::feed(std::string_view bytes) {
  buffer_.append(bytes);
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (;;) {
    const auto nl = buffer_.find('\n', start);
    if (nl == std::string::npos) break;
    std::string line = buffer_.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
    start = nl + 1;
  }
  buffer_.erase(0, start);
  return lines;
}

// ---------------------------------------------------------------------------

HeartbeatClient::HeartbeatClient(ClientConfig config, const SnapshotChannel<VehicleSnapshot>& channel)
    : config_(std::move(config)), channel_(channel) {
  if (!(config_.rate_hz > 0.0)) throw std::invalid_argument("heartbeat: rate must be > 0");
  if (!valid_team(config_.team_id)) throw std::invalid_argument("heartbeat: invalid team id");
}

HeartbeatClient::~HeartbeatClient() { stop(); }

void HeartbeatClient::start() {
  if (thread_.joinable()) return;
  {
    std::lock_guard lock(mutex_);
    stopping_ = false;
  }
  thread_ = std::thread([this] { run(); });
}

void HeartbeatClient::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

bool HeartbeatClient::wait_until(std::chrono::steady_clock::time_point deadline) {
  std::unique_lock lock(mutex_);
  return !cv_.wait_until(lock, deadline, [this] { return stopping_; });
}

void HeartbeatClient::run() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(1.0 / config_.rate_hz));
  auto backoff = config_.backoff_initial;
  tcp::UniqueFd fd;
  auto next_send = clock::now();
  for (;;) {
    {
      std::lock_guard lock(mutex_);
      if (stopping_) break;
    }
    if (!fd.valid()) {
      try {
        fd = tcp::connect_to(config_.host, config_.port);
        tcp::set_nodelay(fd.get());
        ++connections_;
        connected_ = true;
        backoff = config_.backoff_initial;
        next_send = clock::now();
      } catch (const std::exception&) {
        ++connect_failures_;
        if (!wait_until(clock::now() + backoff)) break;
        backoff = std::min(backoff * 2, config_.backoff_max);
        continue;
      }
    }
    if (tcp::peer_closed(fd.get())) {
      fd.reset();
      connected_ = false;
      continue;
    }
    if (const auto snap = channel_.latest()) {
      const std::string line =
          encode(make_sentence(*snap, config_.datum, config_.team_id, config_.clock));
      if (!tcp::send_all(fd.get(), line)) {
        fd.reset();
        connected_ = false;
        continue;
      }
      ++sent_;
    }
    next_send += period;
    if (next_send < clock::now()) next_send = clock::now() + period;
    if (!wait_until(next_send)) break;
  }
  connected_ = false;
}

// ---------------------------------------------------------------------------

MockServer::MockServer(std::uint16_t port, std::ostream* display)
    : display_(display), start_(std::chrono::steady_clock::now()) {
  listen_fd_ = tcp::listen_on(port, port_).release();
  accept_thread_ = std::thread([this] { accept_loop(); });
}

MockServer::~MockServer() { stop(); }

void MockServer::stop() {
  if (stopping_.exchange(true)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  {
    std::lock_guard lock(threads_mutex_);
    for (auto& t : workers_)
      if (t.joinable()) t.join();
    workers_.clear();
  }
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

void MockServer::accept_loop() {
  std::size_t next_id = 0;
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const std::size_t id = next_id++;
    std::lock_guard lock(threads_mutex_);
    workers_.emplace_back([this, fd, id] { serve(fd, id); });
  }
}

void MockServer::serve(int raw_fd, std::size_t id) {
  tcp::UniqueFd fd(raw_fd);
  LineAssembler assembler;
  char buf[1024];
  while (!stopping_) {
    pollfd p{fd.get(), POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const ssize_t n = ::recv(fd.get(), buf, sizeof buf, 0);
    if (n <= 0) break;
    const double t =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    for (std::string& line : assembler.feed(std::string_view(buf, static_cast<std::size_t>(n)))) {
      ServerRecord rec{id, t, std::move(line), std::nullopt, std::nullopt};
      try {
        rec.sentence = decode(rec.line);
      } catch (const DecodeError& e) {
        rec.error = e.kind();
      }
      add(std::move(rec));
    }
  }
}

void MockServer::add(ServerRecord rec) {
  std::lock_guard lock(mutex_);
  if (display_ != nullptr) {
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "%10.3f", rec.recv_time);
    *display_ << '[' << stamp << "] conn " << rec.connection << ' '
              << (rec.error ? "ERROR(" + std::string(to_string(*rec.error)) + ")" : std::string("OK"))
              << ' ' << rec.line << std::endl;
  }
  records_.push_back(std::move(rec));
  cv_.notify_all();
}

std::vector<ServerRecord> MockServer::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

bool MockServer::wait_for_valid(std::size_t n, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [&] {
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(),
                                                  [](const ServerRecord& r) { return r.sentence.has_value(); })) >= n;
  });
}

}  // namespace usvnav::heartbeat
