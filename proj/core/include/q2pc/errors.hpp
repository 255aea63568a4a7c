/**
 * @file
 * Error taxonomy shared by the protocol engines.
 */
#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace q2pc {

/// Pattern coordinates (row, column); column 0 is the input column.
struct Site {
    std::size_t row = 0;
    std::size_t col = 0;
    bool operator==(const Site &) const = default;
};

std::string to_string(const Site &site);

/// A party stopped the protocol. phase and site pinpoint where.
class ProtocolAbort : public std::runtime_error {
  public:
    ProtocolAbort(std::string phase, std::optional<Site> site, std::string cause);

    const std::string &phase() const { return phase_; }
    const std::optional<Site> &site() const { return site_; }
    const std::string &cause() const { return cause_; }

  private:
    std::string phase_;
    std::optional<Site> site_;
    std::string cause_;
};

/// Frame received out of order or for another session.
class TamperError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class PeerClosed : public std::runtime_error {
  public:
    PeerClosed() : std::runtime_error("peer closed the channel") {}
};

class FramingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace q2pc
