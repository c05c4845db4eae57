// Thin POSIX TCP helpers.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace usvnav::tcp {

/// Owning file descriptor.
class UniqueFd {
 public:
  UniqueFd() = default;
  explicit UniqueFd(int fd) : fd_(fd) {}
  ~UniqueFd() { reset(); }
  UniqueFd(UniqueFd&& o) noexcept : fd_(o.release()) {}
  UniqueFd& operator=(UniqueFd&& o) noexcept {
    if (this != &o) reset(o.release());
    return *this;
  }
  UniqueFd(const UniqueFd&) = delete;
  UniqueFd& operator=(const UniqueFd&) = delete;

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    const int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void reset(int fd = -1);

 private:
  int fd_ = -1;
};

/// Blocking connect; throws std::system_error on failure.
UniqueFd connect_to(const std::string& host, std::uint16_t port);

/// Listening socket on all interfaces with SO_REUSEADDR. Port 0 picks an
/// ephemeral port, reported through bound_port.
UniqueFd listen_on(std::uint16_t port, std::uint16_t& bound_port);

/// Writes every byte or returns false.
bool send_all(int fd, std::string_view data);

/// True when the peer has closed the connection (non-blocking check).
bool peer_closed(int fd);

void set_nodelay(int fd);

}  // namespace usvnav::tcp
