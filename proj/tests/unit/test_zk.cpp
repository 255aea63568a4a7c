#include <gtest/gtest.h>

#include "q2pc/zk.hpp"

using namespace q2pc;
using namespace q2pc::zk;
using channel::Role;

namespace {

struct Opened {
    Bytes statement;
    Bytes witness;
    Bytes msg;
};

Opened opened(std::uint64_t seed) {
    crypto::CoinSource coins(crypto::seed_from_u64(seed), "test.zk");
    Opened o;
    o.msg = coins.bytes(8);
    const auto c = crypto::commit(o.msg, coins);
    o.statement = opening_statement(c.commitment);
    o.witness = opening_witness(c.dec, o.msg);
    return o;
}

} // namespace

TEST(IdealZk, CompletenessOverManySessions) {
    IdealZk zk(crypto::seed_from_u64(1));
    const auto rel = opening_relation();
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto o = opened(s);
        ZkSession prover(zk, rel, o.statement), verifier(zk, rel, o.statement);
        const auto proof = prover.prove(Role::Alice, o.witness);
        ASSERT_EQ(verifier.verify(proof), ZkSession::Verdict::Accept) << s;
        EXPECT_EQ(verifier.extract(), o.witness);
    }
}

TEST(IdealZk, WrongWitnessYieldsRejectingProof) {
    IdealZk zk(crypto::seed_from_u64(2));
    const auto rel = opening_relation();
    const auto a = opened(1), b = opened(2);
    const auto proof = zk.prove(Role::Alice, rel, a.statement, b.witness);
    EXPECT_FALSE(zk.verify(rel, a.statement, proof));
    EXPECT_THROW(zk.extract(rel, a.statement, proof), ZkError);
}

TEST(IdealZk, ProofIsBoundToStatementAndRelation) {
    IdealZk zk(crypto::seed_from_u64(3));
    const auto rel = opening_relation();
    const auto a = opened(1), b = opened(2);
    const auto proof = zk.prove(Role::Alice, rel, a.statement, a.witness);
    EXPECT_TRUE(zk.verify(rel, a.statement, proof));
    EXPECT_FALSE(zk.verify(rel, b.statement, proof));
    Relation renamed = rel;
    renamed.name = "rel.other";
    EXPECT_FALSE(zk.verify(renamed, a.statement, proof));
}

TEST(IdealZk, ForgedOrForeignTokensAreRejected) {
    IdealZk zk(crypto::seed_from_u64(4)), other(crypto::seed_from_u64(5));
    const auto rel = opening_relation();
    const auto a = opened(1);
    auto proof = zk.prove(Role::Alice, rel, a.statement, a.witness);
    EXPECT_FALSE(other.verify(rel, a.statement, proof));
    Token t = decode_token(proof[0]);
    t.verdict = !t.verdict;
    EXPECT_FALSE(zk.verify(rel, a.statement, {encode_token(t)}));
    EXPECT_FALSE(zk.verify(rel, a.statement, {Bytes{1, 2, 3}}));
    EXPECT_FALSE(zk.verify(rel, a.statement, {}));
}

TEST(ZkSession, VerdictIsFinalAndExtractNeedsAccept) {
    IdealZk zk(crypto::seed_from_u64(6));
    const auto rel = opening_relation();
    const auto a = opened(1), b = opened(2);
    ZkSession rejecting(zk, rel, a.statement);
    const auto bad = zk.prove(Role::Alice, rel, a.statement, b.witness);
    EXPECT_EQ(rejecting.verify(bad), ZkSession::Verdict::Reject);
    EXPECT_THROW(rejecting.extract(), ZkError);
    const auto good = zk.prove(Role::Alice, rel, a.statement, a.witness);
    EXPECT_THROW(rejecting.verify(good), ZkError);
}

TEST(IdealZk, SimulationMatchesTruthOfStatement) {
    IdealZk zk(crypto::seed_from_u64(7));
    Relation parity;
    parity.name = "rel.parity";
    parity.predicate = [](ByteView s, ByteView) { return !s.empty() && s[0] % 2 == 0; };
    parity.decide = [](ByteView s) -> std::optional<bool> { return !s.empty() && s[0] % 2 == 0; };
    EXPECT_TRUE(zk.verify(parity, Bytes{4}, zk.simulate(Role::Bob, parity, Bytes{4})));
    EXPECT_FALSE(zk.verify(parity, Bytes{5}, zk.simulate(Role::Bob, parity, Bytes{5})));

    // No decision procedure: simulation needs a registered witness.
    const auto rel = opening_relation();
    const auto a = opened(3);
    EXPECT_THROW(zk.simulate(Role::Alice, rel, a.statement), ZkError);
    zk.register_witness(rel, a.statement, a.witness);
    EXPECT_TRUE(zk.verify(rel, a.statement, zk.simulate(Role::Alice, rel, a.statement)));
}

TEST(IdealZk, SimulatedTokensHaveRealTokenShape) {
    IdealZk zk(crypto::seed_from_u64(8));
    const auto rel = opening_relation();
    const auto a = opened(4);
    zk.register_witness(rel, a.statement, a.witness);
    const auto real = zk.prove(Role::Alice, rel, a.statement, a.witness);
    const auto sim = zk.simulate(Role::Alice, rel, a.statement);
    ASSERT_EQ(real.size(), sim.size());
    EXPECT_EQ(real[0].size(), sim[0].size());
    EXPECT_NE(real[0], sim[0]);
}

TEST(OpeningRelation, MalformedStatementDoesNotHold) {
    const auto rel = opening_relation();
    const auto a = opened(5);
    EXPECT_TRUE(rel.holds(a.statement, a.witness));
    EXPECT_FALSE(rel.holds(Bytes{1}, a.witness));
    EXPECT_FALSE(rel.holds(a.statement, Bytes{}));
}
