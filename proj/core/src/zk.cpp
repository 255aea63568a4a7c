#include "q2pc/zk.hpp"

#include <algorithm>

#include "q2pc/wire.hpp"

namespace q2pc::zk {

bool Relation::holds(ByteView statement, ByteView witness) const {
    try {
        return predicate(statement, witness);
    } catch (const WireError &) {
        return false;
    }
}

Bytes encode_token(const Token &t) {
    ByteWriter w;
    w.text(t.relation).fixed(t.statement_hash).u8(t.verdict ? 1 : 0).fixed(t.nonce).fixed(t.tag);
    return std::move(w).data();
}

Token decode_token(ByteView bytes) {
    ByteReader r(bytes);
    Token t;
    t.relation = r.text();
    t.statement_hash = r.fixed<32>();
    t.verdict = r.bit() == 1;
    t.nonce = r.fixed<16>();
    t.tag = r.fixed<32>();
    r.expect_end();
    return t;
}

IdealZk::IdealZk(const Seed &functionality_key) : key_(functionality_key) {}

Digest IdealZk::mac(const Token &t) const {
    Token body = t;
    body.tag = {};
    Bytes enc = encode_token(body);
    enc.resize(enc.size() - body.tag.size());
    return crypto::hmac_sha256(key_, enc);
}

Bytes IdealZk::issue(channel::Role prover, const Relation &relation, ByteView statement, bool verdict) {
    Token t;
    t.relation = relation.name;
    t.statement_hash = crypto::sha256(statement);
    t.verdict = verdict;
    {
        std::lock_guard lock(mu_);
        crypto::Sha256 h;
        h.update("zk.nonce").update_u64(static_cast<std::uint64_t>(prover)).update_u64(counters_[static_cast<int>(prover)]++);
        const Digest d = h.finish();
        std::copy_n(d.begin(), t.nonce.size(), t.nonce.begin());
    }
    t.tag = mac(t);
    return encode_token(t);
}

ProofMessages IdealZk::prove(channel::Role prover, const Relation &relation, ByteView statement, ByteView witness) {
    const bool verdict = relation.holds(statement, witness);
    Bytes token = issue(prover, relation, statement, verdict);
    std::lock_guard lock(mu_);
    escrow_[decode_token(token).nonce] = Bytes(witness.begin(), witness.end());
    return {std::move(token)};
}

ProofMessages IdealZk::simulate(channel::Role prover, const Relation &relation, ByteView statement) {
    std::optional<bool> truth;
    if (relation.decide) truth = relation.decide(statement);
    if (!truth) {
        std::optional<Bytes> witness;
        {
            std::lock_guard lock(mu_);
            auto it = known_.find({relation.name, crypto::sha256(statement)});
            if (it != known_.end()) witness = it->second;
        }
        if (!witness) throw ZkError("statement truth unknown to the simulator");
        truth = relation.holds(statement, *witness);
    }
    return {issue(prover, relation, statement, *truth)};
}

void IdealZk::register_witness(const Relation &relation, ByteView statement, ByteView witness) {
    std::lock_guard lock(mu_);
    known_[{relation.name, crypto::sha256(statement)}] = Bytes(witness.begin(), witness.end());
}

std::optional<Token> IdealZk::check(const Relation &relation, ByteView statement, const ProofMessages &proof) const {
    if (proof.size() != 1) return std::nullopt;
    Token t;
    try {
        t = decode_token(proof[0]);
    } catch (const WireError &) {
        return std::nullopt;
    }
    const Digest expected = mac(t);
    if (!std::equal(expected.begin(), expected.end(), t.tag.begin())) return std::nullopt;
    if (t.relation != relation.name || t.statement_hash != crypto::sha256(statement) || !t.verdict) {
        return std::nullopt;
    }
    return t;
}

bool IdealZk::verify(const Relation &relation, ByteView statement, const ProofMessages &proof) const {
    const auto t = check(relation, statement, proof);
    if (!t) return false;
    std::optional<Bytes> witness;
    {
        std::lock_guard lock(mu_);
        auto it = escrow_.find(t->nonce);
        if (it != escrow_.end()) witness = it->second;
    }
    // Lock released: predicates may re-enter this functionality.
    return !witness || relation.holds(statement, *witness);
}

Bytes IdealZk::extract(const Relation &relation, ByteView statement, const ProofMessages &proof) const {
    const auto t = check(relation, statement, proof);
    if (!t) throw ZkError("extract: proof does not verify");
    std::lock_guard lock(mu_);
    auto it = escrow_.find(t->nonce);
    if (it == escrow_.end()) throw ZkError("extract: no escrowed witness (simulated or remote proof)");
    return it->second;
}

ProofMessages ZkSession::prove(channel::Role prover, ByteView witness) {
    proof_ = zk_.prove(prover, relation_, statement_, witness);
    return proof_;
}

ZkSession::Verdict ZkSession::verify(const ProofMessages &proof) {
    if (verdict_ != Verdict::Pending) throw ZkError("verdict already set");
    proof_ = proof;
    verdict_ = zk_.verify(relation_, statement_, proof) ? Verdict::Accept : Verdict::Reject;
    return verdict_;
}

Bytes ZkSession::extract() const {
    if (verdict_ != Verdict::Accept) throw ZkError("extract before an accepting verdict");
    return zk_.extract(relation_, statement_, proof_);
}

void send_proof(channel::Endpoint &ep, const ProofMessages &proof) {
    for (const auto &m : proof) ep.send("zk.token", m);
}

ProofMessages recv_proof(channel::Endpoint &ep) { return {ep.recv_expect("zk.token")}; }

Relation opening_relation() {
    return {"rel.opening",
            [](ByteView statement, ByteView witness) {
                ByteReader s(statement);
                const crypto::Commitment com{s.fixed<32>()};
                s.expect_end();
                ByteReader w(witness);
                const crypto::Opening dec = w.fixed<32>();
                const Bytes msg = w.bytes();
                w.expect_end();
                return crypto::verify_commitment(com, dec, msg);
            },
            nullptr};
}

Bytes opening_statement(const crypto::Commitment &com) {
    ByteWriter w;
    w.fixed(com.com);
    return std::move(w).data();
}

Bytes opening_witness(const crypto::Opening &dec, ByteView msg) {
    ByteWriter w;
    w.fixed(dec).bytes(msg);
    return std::move(w).data();
}

} // namespace q2pc::zk
