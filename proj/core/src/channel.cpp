#include "q2pc/channel.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "q2pc/session.hpp"
#include "q2pc/wire.hpp"

namespace q2pc {

std::string to_string(const Site &site) {
    return "(" + std::to_string(site.row) + "," + std::to_string(site.col) + ")";
}

ProtocolAbort::ProtocolAbort(std::string phase, std::optional<Site> site, std::string cause)
    : std::runtime_error("abort in " + phase + (site ? " at " + to_string(*site) : std::string()) + ": " + cause),
      phase_(std::move(phase)), site_(site), cause_(std::move(cause)) {}

Bytes encode_abort(const ProtocolAbort &a) {
    ByteWriter w;
    w.text(a.phase()).bit(a.site() ? 1 : 0);
    w.u32(a.site() ? static_cast<std::uint32_t>(a.site()->row) : 0);
    w.u32(a.site() ? static_cast<std::uint32_t>(a.site()->col) : 0);
    w.text(a.cause());
    return std::move(w).data();
}

PeerAbort decode_abort(ByteView payload) {
    try {
        ByteReader r(payload);
        std::string phase = r.text();
        const bool has_site = r.bit() == 1;
        const std::size_t row = r.u32(), col = r.u32();
        std::string cause = r.text();
        r.expect_end();
        return PeerAbort(std::move(phase), has_site ? std::optional<Site>(Site{row, col}) : std::nullopt,
                         "peer: " + cause);
    } catch (const WireError &) {
        return PeerAbort("channel", std::nullopt, "peer sent a malformed abort");
    }
}

Seed SessionSeeds::zk_key() const {
    crypto::Sha256 h;
    h.update("q2pc.zk.key").update(ByteView(root));
    return h.finish();
}

} // namespace q2pc

namespace q2pc::channel {

const char *to_string(Role r) { return r == Role::Alice ? "alice" : "bob"; }

Role peer_of(Role r) { return r == Role::Alice ? Role::Bob : Role::Alice; }

Bytes frame(const Message &m) {
    ByteWriter body;
    body.fixed(m.session).u64(m.seq).u8(static_cast<std::uint8_t>(m.sender)).text(m.type).bytes(m.payload);
    const Bytes &b = body.data();
    if (b.size() > 0xffffffffu) throw FramingError("frame too large");
    Bytes out;
    out.reserve(b.size() + 4);
    const auto n = static_cast<std::uint32_t>(b.size());
    out.push_back(static_cast<std::uint8_t>(n >> 24));
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    out.push_back(static_cast<std::uint8_t>(n >> 8));
    out.push_back(static_cast<std::uint8_t>(n));
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

Message unframe(ByteView f) {
    if (f.size() < 4) throw FramingError("frame shorter than its length prefix");
    const std::uint32_t n = (std::uint32_t{f[0]} << 24) | (std::uint32_t{f[1]} << 16) | (std::uint32_t{f[2]} << 8) | f[3];
    if (f.size() - 4 != n) throw FramingError("frame length prefix mismatch");
    try {
        ByteReader r(f.subspan(4));
        Message m;
        m.session = r.fixed<16>();
        m.seq = r.u64();
        const auto sender = r.u8();
        if (sender > 1) throw FramingError("unknown sender");
        m.sender = static_cast<Role>(sender);
        m.type = r.text();
        m.payload = r.bytes();
        r.expect_end();
        return m;
    } catch (const WireError &e) {
        throw FramingError(std::string("malformed frame: ") + e.what());
    }
}

SessionId session_id_from_seed(const Seed &seed) {
    crypto::Sha256 h;
    h.update("q2pc.session").update(ByteView(seed));
    const Digest d = h.finish();
    SessionId sid{};
    std::copy_n(d.begin(), sid.size(), sid.begin());
    return sid;
}

std::string Transcript::to_ndjson() const {
    nlohmann::ordered_json h;
    h["format"] = "q2pc-transcript/1";
    h["session_id"] = to_hex(header.session);
    h["profile"] = header.profile;
    h["mode"] = header.mode;
    h["command"] = header.command;
    h["seed"] = header.seed;
    std::string out = h.dump() + "\n";
    for (const auto &m : messages) out += to_hex(frame(m)) + "\n";
    return out;
}

Transcript Transcript::from_ndjson(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) throw FramingError("transcript: missing header line");
    Transcript t;
    try {
        const auto h = nlohmann::json::parse(line);
        if (h.at("format") != "q2pc-transcript/1") throw FramingError("transcript: unknown format");
        const Bytes sid = from_hex(h.at("session_id").get<std::string>());
        if (sid.size() != t.header.session.size()) throw FramingError("transcript: bad session id");
        std::copy(sid.begin(), sid.end(), t.header.session.begin());
        t.header.profile = h.at("profile").get<std::string>();
        t.header.mode = h.at("mode").get<std::string>();
        t.header.command = h.at("command").get<std::string>();
        t.header.seed = h.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception &e) {
        throw FramingError(std::string("transcript header: ") + e.what());
    } catch (const std::invalid_argument &e) {
        throw FramingError(std::string("transcript header: ") + e.what());
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            t.messages.push_back(unframe(from_hex(line)));
        } catch (const std::invalid_argument &e) {
            throw FramingError(std::string("transcript record: ") + e.what());
        }
    }
    return t;
}

void Transcript::save(const std::string &path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write transcript " + path);
    out << to_ndjson();
}

Transcript Transcript::load(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read transcript " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_ndjson(ss.str());
}

std::optional<Divergence> first_divergence(const std::vector<Message> &expected, const std::vector<Message> &actual) {
    const std::size_t n = std::min(expected.size(), actual.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto &a = expected[i], &b = actual[i];
        if (a == b) continue;
        std::string why = a.type != b.type           ? "message type " + a.type + " vs " + b.type
                          : a.sender != b.sender     ? "sender differs"
                          : a.session != b.session   ? "session id differs"
                          : a.seq != b.seq           ? "sequence number differs"
                                                     : "payload of " + a.type + " differs";
        return Divergence{a.seq, why};
    }
    if (expected.size() != actual.size()) {
        return Divergence{n, "transcript lengths differ (" + std::to_string(expected.size()) + " vs " +
                                 std::to_string(actual.size()) + ")"};
    }
    return std::nullopt;
}

namespace {

struct InprocQueue {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Bytes> frames;
    bool closed = false;
};

class InprocLink final : public Link {
  public:
    InprocLink(std::shared_ptr<InprocQueue> out, std::shared_ptr<InprocQueue> in) : out_(std::move(out)), in_(std::move(in)) {}
    ~InprocLink() override { close(); }

    void send_frame(Bytes f) override {
        std::lock_guard lock(out_->mu);
        if (out_->closed) throw PeerClosed();
        out_->frames.push_back(std::move(f));
        out_->cv.notify_one();
    }

    Bytes recv_frame() override {
        std::unique_lock lock(in_->mu);
        in_->cv.wait(lock, [&] { return !in_->frames.empty() || in_->closed; });
        if (in_->frames.empty()) throw PeerClosed();
        Bytes f = std::move(in_->frames.front());
        in_->frames.pop_front();
        return f;
    }

    void close() override {
        for (auto *q : {out_.get(), in_.get()}) {
            std::lock_guard lock(q->mu);
            q->closed = true;
            q->cv.notify_all();
        }
    }

  private:
    std::shared_ptr<InprocQueue> out_, in_;
};

void write_all(int fd, const std::uint8_t *data, std::size_t n) {
    while (n > 0) {
        const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw PeerClosed();
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

bool read_all(int fd, std::uint8_t *data, std::size_t n) {
    while (n > 0) {
        const ssize_t r = ::recv(fd, data, n, 0);
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) return false;
        data += r;
        n -= static_cast<std::size_t>(r);
    }
    return true;
}

class TcpLink final : public Link {
  public:
    explicit TcpLink(int fd) : fd_(fd) {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }
    ~TcpLink() override { close(); }

    void send_frame(Bytes f) override {
        if (fd_ < 0) throw PeerClosed();
        write_all(fd_, f.data(), f.size());
    }

    Bytes recv_frame() override {
        if (fd_ < 0) throw PeerClosed();
        std::uint8_t len[4];
        if (!read_all(fd_, len, 4)) throw PeerClosed();
        const std::uint32_t n = (std::uint32_t{len[0]} << 24) | (std::uint32_t{len[1]} << 16) |
                                (std::uint32_t{len[2]} << 8) | len[3];
        if (n > (1u << 28)) throw FramingError("frame length exceeds limit");
        Bytes f(4 + static_cast<std::size_t>(n));
        std::copy(len, len + 4, f.begin());
        if (!read_all(fd_, f.data() + 4, n)) throw PeerClosed();
        return f;
    }

    void close() override {
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }

  private:
    int fd_;
};

addrinfo *resolve(const std::string &host, std::uint16_t port, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo *res = nullptr;
    const std::string service = std::to_string(port);
    if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
        throw std::runtime_error("cannot resolve " + host + ":" + service);
    }
    return res;
}

} // namespace

std::pair<std::unique_ptr<Link>, std::unique_ptr<Link>> make_inproc_pair() {
    auto ab = std::make_shared<InprocQueue>(), ba = std::make_shared<InprocQueue>();
    return {std::make_unique<InprocLink>(ab, ba), std::make_unique<InprocLink>(ba, ab)};
}

std::unique_ptr<Link> tcp_listen(const std::string &host, std::uint16_t port) {
    addrinfo *res = resolve(host, port, true);
    const int server = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (server < 0) {
        ::freeaddrinfo(res);
        throw std::runtime_error("socket() failed");
    }
    int one = 1;
    ::setsockopt(server, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(server, res->ai_addr, res->ai_addrlen) != 0 || ::listen(server, 1) != 0) {
        ::freeaddrinfo(res);
        ::close(server);
        throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }
    ::freeaddrinfo(res);
    int fd;
    do {
        fd = ::accept(server, nullptr, nullptr);
    } while (fd < 0 && errno == EINTR);
    ::close(server);
    if (fd < 0) throw std::runtime_error("accept() failed");
    return std::make_unique<TcpLink>(fd);
}

std::unique_ptr<Link> tcp_connect(const std::string &host, std::uint16_t port, int attempts) {
    for (int i = 0; i < attempts; ++i) {
        addrinfo *res = resolve(host, port, false);
        const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
        if (fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
            ::freeaddrinfo(res);
            return std::make_unique<TcpLink>(fd);
        }
        if (fd >= 0) ::close(fd);
        ::freeaddrinfo(res);
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    throw std::runtime_error("cannot connect to " + host + ":" + std::to_string(port));
}

std::pair<std::string, std::uint16_t> parse_host_port(std::string_view s) {
    const auto colon = s.rfind(':');
    if (colon == std::string_view::npos) throw std::invalid_argument("expected host:port, got '" + std::string(s) + "'");
    const std::string port_text(s.substr(colon + 1));
    std::size_t used = 0;
    unsigned long port = 0;
    try {
        port = std::stoul(port_text, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used != port_text.size() || port == 0 || port > 65535) {
        throw std::invalid_argument("bad port in '" + std::string(s) + "'");
    }
    return {std::string(s.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

ScriptedPeerLink::ScriptedPeerLink(Role local, std::vector<Message> recorded)
    : local_(local), recorded_(std::move(recorded)) {}

void ScriptedPeerLink::send_frame(Bytes f) {
    const Message sent = unframe(f);
    if (next_ >= recorded_.size()) throw TamperError("replay: extra message " + sent.type);
    const Message &expected = recorded_[next_];
    if (expected.sender != local_) {
        throw TamperError("replay: sent " + sent.type + " where the peer's " + expected.type + " was recorded");
    }
    if (!(sent == expected)) {
        throw TamperError("replay: message " + std::to_string(expected.seq) + " (" + expected.type + ") differs");
    }
    ++next_;
}

Bytes ScriptedPeerLink::recv_frame() {
    if (next_ >= recorded_.size()) throw PeerClosed();
    const Message &m = recorded_[next_];
    if (m.sender == local_) {
        throw TamperError("replay: waiting for the peer but " + m.type + " was recorded from the local role");
    }
    ++next_;
    return frame(m);
}

void MutatingLink::send_frame(Bytes f) {
    Message m = unframe(f);
    mutate_(m);
    inner_->send_frame(frame(m));
}

Endpoint::Endpoint(Role role, SessionId session, std::unique_ptr<Link> link)
    : role_(role), session_(session), link_(std::move(link)) {}

void Endpoint::send(std::string type, Bytes payload) {
    Message m{session_, next_seq_++, role_, std::move(type), std::move(payload)};
    link_->send_frame(frame(m));
    transcript_.push_back(std::move(m));
}

Message Endpoint::recv() {
    Message m = unframe(link_->recv_frame());
    if (m.session != session_) throw TamperError("frame for another session");
    if (m.sender == role_) throw TamperError("frame claims to come from the local role");
    if (m.type == "abort") {
        transcript_.push_back(m);
        return m;
    }
    if (m.seq != next_seq_) {
        throw TamperError("sequence gap: expected " + std::to_string(next_seq_) + ", got " + std::to_string(m.seq));
    }
    ++next_seq_;
    transcript_.push_back(m);
    return m;
}

Bytes Endpoint::recv_expect(std::string_view type) {
    Message m = recv();
    if (m.type == "abort" && type != "abort") throw decode_abort(m.payload);
    if (m.type != type) {
        throw ProtocolAbort("channel", std::nullopt,
                            "expected " + std::string(type) + ", received " + m.type);
    }
    return std::move(m.payload);
}

void Endpoint::close() { link_->close(); }

std::pair<Endpoint, Endpoint> make_inproc_endpoints(const SessionId &session) {
    auto [a, b] = make_inproc_pair();
    return {Endpoint(Role::Alice, session, std::move(a)), Endpoint(Role::Bob, session, std::move(b))};
}

} // namespace q2pc::channel
