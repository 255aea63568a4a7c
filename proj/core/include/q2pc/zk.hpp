/**
 * @file
 * Zero-knowledge arguments of knowledge through an ideal functionality.
 *
 * The functionality evaluates the relation on the prover's witness and
 * issues a token bound to (relation, statement hash, verdict, nonce) under an
 * HMAC key it alone holds. The witness never leaves the prover's process; it
 * is escrowed for extractors. Token layout:
 *
 *   relation name (u32 length + UTF-8) | SHA-256(statement) | verdict (u8)
 *   | nonce (16 bytes) | HMAC-SHA256 tag over everything before it
 *
 * Nonces are a function of (prover role, per-role proof counter), so the same
 * run produces the same tokens regardless of transport.
 */
#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "q2pc/channel.hpp"
#include "q2pc/primitives.hpp"

namespace q2pc::zk {

/// Statements and witnesses are canonical byte encodings.
struct Relation {
    std::string name;
    /// Throws WireError when the statement or witness does not parse.
    std::function<bool(ByteView statement, ByteView witness)> predicate;
    /// Decides statement truth without a witness, when that is computable.
    std::function<std::optional<bool>(ByteView statement)> decide;

    bool holds(ByteView statement, ByteView witness) const;
};

using ProofMessages = std::vector<Bytes>;

class ZkError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

struct Token {
    std::string relation;
    Digest statement_hash{};
    bool verdict = false;
    std::array<std::uint8_t, 16> nonce{};
    Digest tag{};
};

Bytes encode_token(const Token &t);
/// Throws WireError on malformed input.
Token decode_token(ByteView bytes);

class IdealZk {
  public:
    explicit IdealZk(const Seed &functionality_key);

    /// Issues a token for (relation, statement); a false witness yields a reject token.
    ProofMessages prove(channel::Role prover, const Relation &relation, ByteView statement, ByteView witness);
    /// Token for a statement without a witness, using Relation::decide or a registered witness.
    /// Throws ZkError when neither is available.
    ProofMessages simulate(channel::Role prover, const Relation &relation, ByteView statement);
    bool verify(const Relation &relation, ByteView statement, const ProofMessages &proof) const;
    /// Escrowed witness behind an accepting proof. Throws ZkError otherwise.
    Bytes extract(const Relation &relation, ByteView statement, const ProofMessages &proof) const;

    /// Trusted-party knowledge for simulate().
    void register_witness(const Relation &relation, ByteView statement, ByteView witness);

  private:
    Bytes issue(channel::Role prover, const Relation &relation, ByteView statement, bool verdict);
    std::optional<Token> check(const Relation &relation, ByteView statement, const ProofMessages &proof) const;
    Digest mac(const Token &t) const;

    Seed key_;
    mutable std::mutex mu_;
    std::uint64_t counters_[2] = {0, 0};
    std::map<std::array<std::uint8_t, 16>, Bytes> escrow_;
    std::map<std::pair<std::string, Digest>, Bytes> known_;
};

/// Single proof's lifecycle on one side: verdict set once, extract only after accept.
class ZkSession {
  public:
    enum class Verdict { Pending, Accept, Reject };

    ZkSession(IdealZk &zk, Relation relation, Bytes statement)
        : zk_(zk), relation_(std::move(relation)), statement_(std::move(statement)) {}

    ProofMessages prove(channel::Role prover, ByteView witness);
    Verdict verify(const ProofMessages &proof);
    Bytes extract() const;
    Verdict verdict() const { return verdict_; }

  private:
    IdealZk &zk_;
    Relation relation_;
    Bytes statement_;
    ProofMessages proof_;
    Verdict verdict_ = Verdict::Pending;
};

/// Sends each proof message as `zk.token`.
void send_proof(channel::Endpoint &ep, const ProofMessages &proof);
/// Receives a one-message proof.
ProofMessages recv_proof(channel::Endpoint &ep);

/// Knowledge of an opening: statement com (32 bytes), witness (dec, msg).
Relation opening_relation();
Bytes opening_statement(const crypto::Commitment &com);
Bytes opening_witness(const crypto::Opening &dec, ByteView msg);

} // namespace q2pc::zk
