/**
 * @file
 * Running the two parties of a protocol: seeds, abort propagation and the
 * in-process runner.
 *
 * A party that aborts sends an `abort` message (phase, site, cause) and
 * closes its endpoint. `abort` frames are exempt from the sequence check,
 * since the peer may have sent further messages the aborting party never read.
 */
#pragma once

#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>

#include "q2pc/channel.hpp"
#include "q2pc/errors.hpp"
#include "q2pc/primitives.hpp"

namespace q2pc {

/// Abort reported by the peer.
class PeerAbort : public ProtocolAbort {
  public:
    using ProtocolAbort::ProtocolAbort;
};

Bytes encode_abort(const ProtocolAbort &a);
PeerAbort decode_abort(ByteView payload);

/// Party coin streams derived from one session seed.
struct SessionSeeds {
    Seed root{};

    static SessionSeeds from_u64(std::uint64_t seed) { return {crypto::seed_from_u64(seed)}; }
    crypto::CoinSource alice() const { return crypto::CoinSource(root, "alice"); }
    crypto::CoinSource bob() const { return crypto::CoinSource(root, "bob"); }
    crypto::CoinSource bob_measurements() const { return crypto::CoinSource(root, "bob.meas"); }
    SessionId session() const { return channel::session_id_from_seed(root); }
    /// Key of the ideal ZK functionality for this session.
    Seed zk_key() const;
};

template <typename T> struct PartyResult {
    std::optional<T> value;
    std::optional<ProtocolAbort> abort;  ///< this party's own abort, or the peer's
    std::string error;                   ///< any other failure
    bool ok() const { return value.has_value(); }
};

/// Runs one party, converting failures into a PartyResult. Always closes the endpoint.
template <typename T, typename Fn> PartyResult<T> run_party(channel::Endpoint &ep, Fn &&fn) {
    PartyResult<T> r;
    try {
        r.value.emplace(fn(ep));
    } catch (const PeerAbort &a) {
        r.abort = a;
    } catch (const ProtocolAbort &a) {
        r.abort = a;
        try {
            ep.send("abort", encode_abort(a));
        } catch (const std::exception &) {
        }
    } catch (const std::exception &e) {
        r.error = e.what();
    }
    ep.close();
    return r;
}

template <typename A, typename B> struct TwoPartyRun {
    PartyResult<A> alice;
    PartyResult<B> bob;
    std::vector<channel::Message> alice_transcript;
    std::vector<channel::Message> bob_transcript;

    bool completed() const { return alice.ok() && bob.ok(); }
};

/// Alice runs on the calling thread, Bob on a worker thread.
template <typename A, typename B, typename FA, typename FB>
TwoPartyRun<A, B> run_pair(channel::Endpoint &alice_ep, channel::Endpoint &bob_ep, FA &&alice_fn, FB &&bob_fn) {
    TwoPartyRun<A, B> run;
    std::thread bob_thread([&] { run.bob = run_party<B>(bob_ep, bob_fn); });
    run.alice = run_party<A>(alice_ep, alice_fn);
    bob_thread.join();
    run.alice_transcript = alice_ep.transcript();
    run.bob_transcript = bob_ep.transcript();
    return run;
}

template <typename A, typename B, typename FA, typename FB>
TwoPartyRun<A, B> run_inproc(const SessionId &session, FA &&alice_fn, FB &&bob_fn) {
    auto [alice_ep, bob_ep] = channel::make_inproc_endpoints(session);
    return run_pair<A, B>(alice_ep, bob_ep, alice_fn, bob_fn);
}

} // namespace q2pc
