#include "q2pc/compilers.hpp"

#include <bit>
#include <cmath>

#include "q2pc/errors.hpp"
#include "q2pc/session.hpp"
#include "q2pc/wire.hpp"

namespace q2pc::compilers {

using channel::Endpoint;
using channel::Message;
using channel::Role;
using qsim::Bits;
using qsim::StateVector;

namespace {

constexpr std::size_t kMaxDescriptionQubits = 12;
constexpr std::size_t kMaxListEntries = 1u << 16;

crypto::Commitment read_commitment(ByteView payload, const char *what) {
    try {
        ByteReader r(payload);
        crypto::Commitment c{r.fixed<32>()};
        r.expect_end();
        return c;
    } catch (const WireError &e) {
        throw ProtocolAbort("commit", std::nullopt, std::string("malformed ") + what + ": " + e.what());
    }
}

Bytes commitment_bytes(const crypto::Commitment &c) {
    ByteWriter w;
    w.fixed(c.com);
    return std::move(w).data();
}

std::uint32_t read_count(ByteReader &r) {
    const std::uint32_t n = r.u32();
    if (n > kMaxListEntries || n > r.remaining()) throw WireError("list length out of range");
    return n;
}

void write_byte_list(ByteWriter &w, const std::vector<Bytes> &list) {
    w.u32(static_cast<std::uint32_t>(list.size()));
    for (const auto &b : list) w.bytes(b);
}

std::vector<Bytes> read_byte_list(ByteReader &r) {
    const std::uint32_t n = read_count(r);
    std::vector<Bytes> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(r.bytes());
    return out;
}

bool is_outcome(const Message &m) { return m.type == "q2pc.outcome"; }

} // namespace

// ------------------------------------------------------ full simulation ----

Bytes describe_state(const StateVector &state) {
    ByteWriter w;
    const auto amps = state.amplitudes();
    w.u32(static_cast<std::uint32_t>(amps.size()));
    for (const auto &a : amps) {
        w.u64(std::bit_cast<std::uint64_t>(a.real()));
        w.u64(std::bit_cast<std::uint64_t>(a.imag()));
    }
    return std::move(w).data();
}

StateVector state_from_description(ByteView description) {
    ByteReader r(description);
    const std::uint32_t count = r.u32();
    if (count == 0 || !std::has_single_bit(count) || count > (1u << kMaxDescriptionQubits))
        throw WireError("amplitude count must be a power of two within range");
    if (r.remaining() != std::size_t(count) * 16) throw WireError("amplitude list length mismatch");
    std::vector<qsim::Complex> amps(count);
    for (auto &a : amps) {
        const double re = std::bit_cast<double>(r.u64());
        const double im = std::bit_cast<double>(r.u64());
        if (!std::isfinite(re) || !std::isfinite(im)) throw WireError("non-finite amplitude");
        a = {re, im};
    }
    r.expect_end();
    try {
        return StateVector::from_amplitudes(std::move(amps));
    } catch (const std::exception &e) {
        throw WireError(std::string("invalid state description: ") + e.what());
    }
}

zk::Relation description_relation() {
    return {"rel.description",
            [](ByteView statement, ByteView witness) {
                ByteReader s(statement);
                const crypto::Commitment com{s.fixed<32>()};
                s.expect_end();
                ByteReader w(witness);
                const crypto::Opening dec = w.fixed<32>();
                const Bytes y = w.bytes();
                w.expect_end();
                if (!crypto::verify_commitment(com, dec, y)) return false;
                state_from_description(y);
                return true;
            },
            nullptr};
}

Bytes encode_consistency_statement(const ConsistencyStatement &s) {
    ByteWriter w;
    w.fixed(s.com_y.com).text(s.shape_json).u32(static_cast<std::uint32_t>(s.inner.size()));
    for (const auto &m : s.inner) w.bytes(channel::frame(m));
    return std::move(w).data();
}

ConsistencyStatement decode_consistency_statement(ByteView bytes) {
    ByteReader r(bytes);
    ConsistencyStatement s;
    s.com_y.com = r.fixed<32>();
    s.shape_json = r.text();
    const std::uint32_t n = read_count(r);
    s.inner.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const Bytes f = r.bytes();
        try {
            s.inner.push_back(channel::unframe(f));
        } catch (const FramingError &e) {
            throw WireError(std::string("inner message: ") + e.what());
        }
    }
    r.expect_end();
    return s;
}

Bytes encode_consistency_witness(const ConsistencyWitness &w) {
    ByteWriter out;
    out.bytes(w.description).fixed(w.dec_y).fixed(w.coins).bits(w.outcomes);
    return std::move(out).data();
}

ConsistencyWitness decode_consistency_witness(ByteView bytes) {
    ByteReader r(bytes);
    ConsistencyWitness w;
    w.description = r.bytes();
    w.dec_y = r.fixed<32>();
    w.coins = r.fixed<32>();
    w.outcomes = r.bits();
    r.expect_end();
    return w;
}

crypto::CoinSource fullsim_bob_coins(const Seed &seed) { return crypto::CoinSource(seed, "fullsim.bob"); }

zk::Relation consistency_relation(const protocols::RunConfig &cfg) {
    return {"rel.consistency",
            [cfg](ByteView statement, ByteView witness) {
                const auto s = decode_consistency_statement(statement);
                const auto w = decode_consistency_witness(witness);
                if (!crypto::verify_commitment(s.com_y, w.dec_y, w.description)) return false;
                if (s.inner.empty()) return false;
                try {
                    const auto shape = mbqc::from_json(s.shape_json);
                    const auto input = state_from_description(w.description);
                    auto link = std::make_unique<channel::ScriptedPeerLink>(Role::Bob, s.inner);
                    const auto *script = link.get();
                    Endpoint ep(Role::Bob, s.inner.front().session, std::move(link));
                    auto coins = fullsim_bob_coins(w.coins);
                    qsim::ReplayedOutcomes outcomes(w.outcomes);
                    protocols::q2pc_bob(ep, cfg, shape, input, coins, outcomes);
                    return script->finished() && outcomes.exhausted();
                } catch (const std::exception &) {
                    return false;
                }
            },
            nullptr};
}

const char *to_string(FullSimDeviation d) {
    switch (d) {
    case FullSimDeviation::None: return "none";
    case FullSimDeviation::WrongDescription: return "wrong-description";
    case FullSimDeviation::InconsistentMessages: return "inconsistent-messages";
    case FullSimDeviation::BadOpening: return "bad-opening";
    case FullSimDeviation::GarbageCommitment: return "garbage-commitment";
    }
    return "?";
}

std::vector<Message> fullsim_inner_messages(const std::vector<Message> &transcript) {
    std::size_t begin = transcript.size();
    for (std::size_t i = 0; i < transcript.size(); ++i) {
        if (transcript[i].type == "fs.zk") {
            begin = i + 1;
            break;
        }
    }
    std::vector<Message> inner;
    for (std::size_t i = begin; i < transcript.size() && transcript[i].type != "fs.zk"; ++i) {
        Message m = transcript[i];
        m.seq -= transcript[begin].seq;
        inner.push_back(std::move(m));
    }
    return inner;
}

std::function<void(Message &)> flip_first_outcome() {
    return [done = false](Message &m) mutable {
        if (done || !is_outcome(m) || m.payload.empty()) return;
        m.payload[0] ^= 1;
        done = true;
    };
}

FullSimAliceView fullsim_alice(Endpoint &ep, const protocols::RunConfig &cfg, const mbqc::Pattern &pattern,
                               crypto::CoinSource &coins) {
    if (!cfg.zk) throw std::invalid_argument("full simulation needs a zk functionality");
    const auto com_y = read_commitment(ep.recv_expect("fs.commit"), "fs.commit");
    const zk::ProofMessages description_proof{ep.recv_expect("fs.zk")};
    if (!cfg.zk->verify(description_relation(), commitment_bytes(com_y), description_proof))
        throw ProtocolAbort("zk", std::nullopt, "description proof rejected");

    FullSimAliceView v;
    v.inner = protocols::q2pc_alice(ep, cfg, pattern, coins);

    const zk::ProofMessages consistency_proof{ep.recv_expect("fs.zk")};
    const ConsistencyStatement stmt{com_y, mbqc::to_json(protocols::public_shape(pattern)),
                                    fullsim_inner_messages(ep.transcript())};
    if (!cfg.zk->verify(consistency_relation(cfg), encode_consistency_statement(stmt), consistency_proof))
        throw ProtocolAbort("zk", std::nullopt, "consistency proof rejected");
    return v;
}

FullSimBobView fullsim_bob(Endpoint &ep, const protocols::RunConfig &cfg, const mbqc::Pattern &shape,
                           const Bytes &description, const Seed &bob_seed, qsim::OutcomeSource &outcomes,
                           FullSimDeviation deviation, const std::optional<Bytes> &run_description) {
    if (!cfg.zk) throw std::invalid_argument("full simulation needs a zk functionality");
    if (deviation == FullSimDeviation::WrongDescription && !run_description)
        throw std::invalid_argument("wrong-description deviation needs the description actually run");

    crypto::CoinSource commit_coins(bob_seed, "fullsim.commit");
    auto committed = crypto::commit(description, commit_coins);
    if (deviation == FullSimDeviation::GarbageCommitment) committed.commitment.com = commit_coins.array<32>();
    ep.send("fs.commit", commitment_bytes(committed.commitment));
    const auto description_proof =
        cfg.zk->prove(Role::Bob, description_relation(), commitment_bytes(committed.commitment),
                      zk::opening_witness(committed.dec, description));
    ep.send("fs.zk", description_proof.at(0));

    const Bytes &run = run_description ? *run_description : description;
    const StateVector input = state_from_description(run);
    qsim::RecordingOutcomes recording(outcomes);
    auto coins = fullsim_bob_coins(bob_seed);
    FullSimBobView v;
    v.inner = protocols::q2pc_bob(ep, cfg, shape, input, coins, recording);
    v.outcomes = recording.record();

    const ConsistencyStatement stmt{committed.commitment, mbqc::to_json(shape), fullsim_inner_messages(ep.transcript())};
    ConsistencyWitness wit{description, committed.dec, bob_seed, v.outcomes};
    if (deviation == FullSimDeviation::BadOpening) wit.dec_y[0] ^= 1;
    const auto consistency_proof = cfg.zk->prove(Role::Bob, consistency_relation(cfg),
                                                 encode_consistency_statement(stmt), encode_consistency_witness(wit));
    ep.send("fs.zk", consistency_proof.at(0));
    return v;
}

// ------------------------------------------------------------ ToyCpoqk -----

Digest toy_target(const Bits &w) {
    crypto::Sha256 h;
    h.update("toy.witness").update_u64(w.size()).update(w);
    return h.finish();
}

bool check_message_independence(const VerifierFactory &factory, std::size_t rounds, const Seed &seed) {
    auto first = factory(seed);
    auto second = factory(seed);
    crypto::CoinSource alt(seed, "toy.independence");
    std::vector<Bytes> zeros, noise;
    for (std::size_t i = 0; i < rounds; ++i) {
        if (first->challenge(i, zeros) != second->challenge(i, noise)) return false;
        zeros.push_back(Bytes(16, 0));
        Bytes b = alt.bytes(16);
        b[0] |= 1;
        noise.push_back(std::move(b));
    }
    return true;
}

ToyVerifier::ToyVerifier(const Seed &seed, std::size_t witness_bits)
    : coins_(seed, "toy.verifier"), bits_(witness_bits) {}

Bytes ToyVerifier::challenge(std::size_t round, const std::vector<Bytes> &) {
    ByteWriter w;
    w.text("toy.challenge").u32(static_cast<std::uint32_t>(round)).u32(kMasksPerRound);
    for (std::size_t k = 0; k < kMasksPerRound; ++k) {
        Bits mask(bits_);
        for (auto &b : mask) b = static_cast<std::uint8_t>(coins_.bit());
        w.bits(mask);
    }
    return std::move(w).data();
}

Bytes AdaptiveMockVerifier::challenge(std::size_t round, const std::vector<Bytes> &prover_messages) {
    crypto::Sha256 h;
    h.update(seed_).update_u64(round);
    if (!prover_messages.empty()) h.update(prover_messages.back());
    const Digest d = h.finish();
    return Bytes(d.begin(), d.end());
}

Bytes toy_answer(std::size_t round, ByteView challenge, const Bits &w) {
    ByteReader r(challenge);
    if (r.text() != "toy.challenge") throw WireError("not a toy challenge");
    if (r.u32() != round) throw WireError("challenge for another round");
    const std::uint32_t masks = r.u32();
    if (masks > kMaxListEntries) throw WireError("mask count out of range");
    Bits parities(masks);
    for (auto &p : parities) {
        const Bits mask = r.bits();
        if (mask.size() != w.size()) throw WireError("mask width mismatch");
        for (std::size_t j = 0; j < w.size(); ++j) p ^= static_cast<std::uint8_t>(mask[j] & w[j]);
    }
    r.expect_end();
    ByteWriter out;
    out.text("toy.answer").u32(static_cast<std::uint32_t>(round)).bits(parities);
    return std::move(out).data();
}

Bytes toy_opening(const Bits &w) {
    ByteWriter out;
    out.text("toy.opening").bits(w);
    return std::move(out).data();
}

namespace {

std::optional<Bits> parse_opening(ByteView msg, std::size_t witness_bits) {
    try {
        ByteReader r(msg);
        if (r.text() != "toy.opening") return std::nullopt;
        Bits w = r.bits();
        r.expect_end();
        if (w.size() != witness_bits) return std::nullopt;
        return w;
    } catch (const WireError &) {
        return std::nullopt;
    }
}

} // namespace

std::optional<Bits> toy_extract(const Digest &target, std::size_t witness_bits, const std::vector<Bytes> &challenges,
                                const std::vector<Bytes> &prover_messages) {
    if (prover_messages.size() != challenges.size() + 1) return std::nullopt;
    auto w = parse_opening(prover_messages.back(), witness_bits);
    if (!w || toy_target(*w) != target) return std::nullopt;
    try {
        for (std::size_t i = 0; i < challenges.size(); ++i) {
            if (toy_answer(i, challenges[i], *w) != prover_messages[i]) return std::nullopt;
        }
    } catch (const WireError &) {
        return std::nullopt;
    }
    return w;
}

bool toy_accepts(const Digest &target, std::size_t witness_bits, const std::vector<Bytes> &challenges,
                 const std::vector<Bytes> &prover_messages) {
    return toy_extract(target, witness_bits, challenges, prover_messages).has_value();
}

// -------------------------------------------------------------- ZKPoQK -----

Bytes encode_final_statement(const FinalStatement &s) {
    ByteWriter w;
    w.fixed(s.session).fixed(s.com_sk.com).fixed(s.pub.target);
    w.u32(static_cast<std::uint32_t>(s.pub.witness_bits)).u32(static_cast<std::uint32_t>(s.pub.rounds));
    write_byte_list(w, s.challenges);
    write_byte_list(w, s.encrypted);
    return std::move(w).data();
}

FinalStatement decode_final_statement(ByteView bytes) {
    ByteReader r(bytes);
    FinalStatement s;
    s.session = r.fixed<16>();
    s.com_sk.com = r.fixed<32>();
    s.pub.target = r.fixed<32>();
    s.pub.witness_bits = r.u32();
    s.pub.rounds = r.u32();
    s.challenges = read_byte_list(r);
    s.encrypted = read_byte_list(r);
    r.expect_end();
    return s;
}

namespace {

std::vector<Bytes> decrypt_all(const crypto::SymKey &sk, const SessionId &session, const std::vector<Bytes> &enc) {
    std::vector<Bytes> out;
    out.reserve(enc.size());
    for (std::size_t i = 0; i < enc.size(); ++i) out.push_back(crypto::otp_decrypt(sk, session, i, enc[i]));
    return out;
}

Bytes final_witness(const crypto::SymKey &sk, const crypto::Opening &dec) {
    ByteWriter w;
    w.fixed(sk.sk).fixed(dec);
    return std::move(w).data();
}

} // namespace

zk::Relation final_relation() {
    return {"rel.zkpoqk",
            [](ByteView statement, ByteView witness) {
                const auto s = decode_final_statement(statement);
                ByteReader w(witness);
                crypto::SymKey sk;
                sk.sk = w.fixed<32>();
                const crypto::Opening dec = w.fixed<32>();
                w.expect_end();
                if (!crypto::verify_commitment(s.com_sk, dec, sk.sk)) return false;
                if (s.challenges.size() != s.pub.rounds || s.encrypted.size() != s.pub.rounds + 1) return false;
                return toy_accepts(s.pub.target, s.pub.witness_bits, s.challenges,
                                   decrypt_all(sk, s.session, s.encrypted));
            },
            nullptr};
}

const char *to_string(ProverStrategy s) {
    switch (s) {
    case ProverStrategy::Honest: return "honest";
    case ProverStrategy::WrongKey: return "wrong-key";
    case ProverStrategy::RandomCiphertexts: return "random-ciphertexts";
    }
    return "?";
}

void zkpoqk_prover(Endpoint &ep, zk::IdealZk &zk, const ZkpoqkPublic &pub, const StateVector &witness,
                   crypto::CoinSource &coins, qsim::OutcomeSource &outcomes, ProverStrategy strategy) {
    if (witness.num_qubits() != pub.witness_bits) throw std::invalid_argument("witness width mismatch");
    StateVector state = witness;
    Bits w(pub.witness_bits);
    for (auto &b : w) b = static_cast<std::uint8_t>(qsim::measure_z_inplace(state, 0, outcomes));

    const auto sk = crypto::SymKey::generate(coins);
    const auto committed = crypto::commit(sk.sk, coins);
    ep.send("zkpoqk.comsk", commitment_bytes(committed.commitment));
    zk::send_proof(ep, zk.prove(Role::Bob, zk::opening_relation(), zk::opening_statement(committed.commitment),
                                zk::opening_witness(committed.dec, sk.sk)));

    crypto::OtpEncryptor enc(strategy == ProverStrategy::WrongKey ? crypto::SymKey::generate(coins) : sk,
                             ep.session());
    const auto seal = [&](const Bytes &msg, std::uint64_t nonce) {
        return strategy == ProverStrategy::RandomCiphertexts ? coins.bytes(msg.size()) : enc.encrypt(msg, nonce);
    };
    FinalStatement stmt{ep.session(), committed.commitment, pub, {}, {}};
    for (std::size_t i = 0; i < pub.rounds; ++i) {
        Bytes challenge = ep.recv_expect("zkpoqk.vmsg");
        Bytes answer;
        try {
            answer = toy_answer(i, challenge, w);
        } catch (const WireError &e) {
            throw ProtocolAbort("protocol", std::nullopt, std::string("malformed zkpoqk.vmsg: ") + e.what());
        }
        stmt.encrypted.push_back(seal(answer, i));
        stmt.challenges.push_back(std::move(challenge));
        ep.send("zkpoqk.enc", stmt.encrypted.back());
    }
    stmt.encrypted.push_back(seal(toy_opening(w), pub.rounds));
    ep.send("zkpoqk.enc", stmt.encrypted.back());

    const auto proof = zk.prove(Role::Bob, final_relation(), encode_final_statement(stmt),
                                final_witness(sk, committed.dec));
    ep.send("zkpoqk.final", proof.at(0));
}

ZkpoqkVerifierView zkpoqk_verifier(Endpoint &ep, zk::IdealZk &zk, const ZkpoqkPublic &pub, const Seed &seed) {
    const auto com_sk = read_commitment(ep.recv_expect("zkpoqk.comsk"), "zkpoqk.comsk");
    if (!zk.verify(zk::opening_relation(), zk::opening_statement(com_sk), zk::recv_proof(ep)))
        throw ProtocolAbort("zk", std::nullopt, "key commitment proof rejected");

    ToyVerifier verifier(seed, pub.witness_bits);
    ZkpoqkVerifierView v;
    for (std::size_t i = 0; i < pub.rounds; ++i) {
        v.challenges.push_back(verifier.challenge(i, v.encrypted));
        ep.send("zkpoqk.vmsg", v.challenges.back());
        v.encrypted.push_back(ep.recv_expect("zkpoqk.enc"));
    }
    v.encrypted.push_back(ep.recv_expect("zkpoqk.enc"));

    const FinalStatement stmt{ep.session(), com_sk, pub, v.challenges, v.encrypted};
    const zk::ProofMessages proof{ep.recv_expect("zkpoqk.final")};
    if (!zk.verify(final_relation(), encode_final_statement(stmt), proof))
        throw ProtocolAbort("zk", std::nullopt, "final proof rejected");
    return v;
}

Bits zkpoqk_extract(const std::vector<Message> &transcript, zk::IdealZk &zk, const ZkpoqkPublic &pub) {
    std::optional<crypto::Commitment> com_sk;
    std::optional<zk::ProofMessages> key_proof, final_proof;
    FinalStatement stmt;
    stmt.pub = pub;
    for (const auto &m : transcript) {
        if (m.type == "zkpoqk.comsk" && !com_sk) {
            stmt.session = m.session;
            ByteReader r(m.payload);
            com_sk = crypto::Commitment{r.fixed<32>()};
        } else if (m.type == "zk.token" && !key_proof) {
            key_proof = zk::ProofMessages{m.payload};
        } else if (m.type == "zkpoqk.vmsg") {
            stmt.challenges.push_back(m.payload);
        } else if (m.type == "zkpoqk.enc") {
            stmt.encrypted.push_back(m.payload);
        } else if (m.type == "zkpoqk.final") {
            final_proof = zk::ProofMessages{m.payload};
        }
    }
    if (!com_sk || !key_proof || !final_proof) throw zk::ZkError("transcript is incomplete");
    stmt.com_sk = *com_sk;
    if (!zk.verify(final_relation(), encode_final_statement(stmt), *final_proof))
        throw zk::ZkError("transcript was not accepted");

    const Bytes key_witness = zk.extract(zk::opening_relation(), zk::opening_statement(*com_sk), *key_proof);
    ByteReader r(key_witness);
    r.fixed<32>();
    const Bytes sk_bytes = r.bytes();
    if (sk_bytes.size() != 32) throw zk::ZkError("extracted key has the wrong width");
    crypto::SymKey sk;
    std::copy(sk_bytes.begin(), sk_bytes.end(), sk.sk.begin());
    auto w = toy_extract(pub.target, pub.witness_bits, stmt.challenges, decrypt_all(sk, stmt.session, stmt.encrypted));
    if (!w) throw zk::ZkError("decrypted transcript does not yield a witness");
    return *w;
}

} // namespace q2pc::compilers
