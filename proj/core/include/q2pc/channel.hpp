/**
 * @file
 * Classical channel between Alice and Bob.
 *
 * Frame layout (all integers little-endian unless noted):
 *   u32 big-endian length of the rest
 *   session id (16 bytes)
 *   seq (u64), global per session, starting at 0
 *   sender (u8: 0 = Alice, 1 = Bob)
 *   msg_type (u32 length + UTF-8)
 *   payload (u32 length + bytes)
 *
 * Both endpoints append every frame they send or receive to their
 * transcript, so two honest endpoints hold identical transcripts.
 */
#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "q2pc/errors.hpp"
#include "q2pc/primitives.hpp"

namespace q2pc::channel {

enum class Role : std::uint8_t { Alice = 0, Bob = 1 };

const char *to_string(Role r);
Role peer_of(Role r);

struct Message {
    SessionId session{};
    std::uint64_t seq = 0;
    Role sender = Role::Alice;
    std::string type;
    Bytes payload;

    bool operator==(const Message &) const = default;
};

/// Full frame including the length prefix.
Bytes frame(const Message &m);
/// Parses a full frame; throws FramingError on malformed input.
Message unframe(ByteView frame);

SessionId session_id_from_seed(const Seed &seed);

struct TranscriptHeader {
    SessionId session{};
    std::string profile;
    std::string mode;
    std::string command;
    std::uint64_t seed = 0;

    bool operator==(const TranscriptHeader &) const = default;
};

struct Transcript {
    TranscriptHeader header;
    std::vector<Message> messages;

    /// One JSON header line, then one hex-encoded frame per line.
    std::string to_ndjson() const;
    static Transcript from_ndjson(std::string_view text);
    void save(const std::string &path) const;
    static Transcript load(const std::string &path);
};

struct Divergence {
    std::uint64_t seq;
    std::string reason;
};

/// First point where two transcripts differ, or nullopt when identical.
std::optional<Divergence> first_divergence(const std::vector<Message> &expected, const std::vector<Message> &actual);

/// Bidirectional frame pipe.
class Link {
  public:
    virtual ~Link() = default;
    virtual void send_frame(Bytes frame) = 0;
    /// Blocks; throws PeerClosed when the peer is gone and nothing is queued.
    virtual Bytes recv_frame() = 0;
    virtual void close() = 0;
};

/// Connected pair of in-process links.
std::pair<std::unique_ptr<Link>, std::unique_ptr<Link>> make_inproc_pair();

/// Blocking TCP link. The listener accepts exactly one connection.
std::unique_ptr<Link> tcp_listen(const std::string &host, std::uint16_t port);
std::unique_ptr<Link> tcp_connect(const std::string &host, std::uint16_t port, int attempts = 50);
/// Parses "host:port".
std::pair<std::string, std::uint16_t> parse_host_port(std::string_view s);

/**
 * Stands in for the peer by serving recorded frames: recv returns the next
 * recorded peer message, send compares against the next recorded message of
 * the local role and throws TamperError on any difference.
 */
class ScriptedPeerLink final : public Link {
  public:
    ScriptedPeerLink(Role local, std::vector<Message> recorded);
    void send_frame(Bytes frame) override;
    Bytes recv_frame() override;
    void close() override {}
    bool finished() const { return next_ == recorded_.size(); }

  private:
    Role local_;
    std::vector<Message> recorded_;
    std::size_t next_ = 0;
};

/// Decorator rewriting outgoing messages below the endpoint, for scripted deviations.
class MutatingLink final : public Link {
  public:
    MutatingLink(std::unique_ptr<Link> inner, std::function<void(Message &)> mutate)
        : inner_(std::move(inner)), mutate_(std::move(mutate)) {}
    void send_frame(Bytes frame) override;
    Bytes recv_frame() override { return inner_->recv_frame(); }
    void close() override { inner_->close(); }

  private:
    std::unique_ptr<Link> inner_;
    std::function<void(Message &)> mutate_;
};

class Endpoint {
  public:
    Endpoint(Role role, SessionId session, std::unique_ptr<Link> link);

    Role role() const { return role_; }
    const SessionId &session() const { return session_; }

    void send(std::string type, Bytes payload);
    Message recv();
    /// Receives and checks the message type; throws ProtocolAbort otherwise.
    Bytes recv_expect(std::string_view type);
    void close();

    const std::vector<Message> &transcript() const { return transcript_; }

  private:
    Role role_;
    SessionId session_;
    std::unique_ptr<Link> link_;
    std::uint64_t next_seq_ = 0;
    std::vector<Message> transcript_;
};

/// Two endpoints joined by an in-process link.
std::pair<Endpoint, Endpoint> make_inproc_endpoints(const SessionId &session);

} // namespace q2pc::channel
