/**
 * @file
 * Two protocol compilers.
 *
 * Full simulation: Bob commits to a classical description of his input,
 * proves he can open it, runs Q2PC, then proves every message he sent is what
 * an honest Bob with the committed input and some randomness would have sent.
 *
 * ZKPoQK: a proof of quantum knowledge whose prover messages travel encrypted
 * under a committed key, closed by a proof that the decrypted transcript
 * would have been accepted. The inner proof system is ToyCpoqk, a stand-in
 * whose witness is a basis state |w> with a public hash of w.
 */
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "q2pc/channel.hpp"
#include "q2pc/protocols.hpp"
#include "q2pc/qsim.hpp"
#include "q2pc/wire.hpp"
#include "q2pc/zk.hpp"

namespace q2pc::compilers {

// ------------------------------------------------------ full simulation ----

/// Amplitude list: u32 count, then (re, im) as IEEE-754 doubles.
Bytes describe_state(const qsim::StateVector &state);
/// Throws WireError on malformed or non-normalized input.
qsim::StateVector state_from_description(ByteView description);

/// "rel.description": statement com_y, witness (dec_y, y) with y a valid description.
zk::Relation description_relation();

/// Bob's inner messages, rebased to seq 0, with the commitment and the public shape.
struct ConsistencyStatement {
    crypto::Commitment com_y;
    std::string shape_json;
    std::vector<channel::Message> inner;
};
Bytes encode_consistency_statement(const ConsistencyStatement &s);
ConsistencyStatement decode_consistency_statement(ByteView bytes);

struct ConsistencyWitness {
    Bytes description;
    crypto::Opening dec_y{};
    Seed coins{};          ///< Bob's coin seed for the inner run
    qsim::Bits outcomes;   ///< Bob's measurement outcomes in order
};
Bytes encode_consistency_witness(const ConsistencyWitness &w);
ConsistencyWitness decode_consistency_witness(ByteView bytes);

/**
 * "rel.consistency": com_y opens to the description, and replaying Bob on
 * that input, coins and outcomes against Alice's recorded messages
 * reproduces every recorded Bob message. cfg supplies the public run
 * parameters and the functionalities the replay consults.
 */
zk::Relation consistency_relation(const protocols::RunConfig &cfg);

/// Coin stream of Bob's inner run under a seed.
crypto::CoinSource fullsim_bob_coins(const Seed &seed);

enum class FullSimDeviation {
    None,
    WrongDescription,      ///< commits to a description other than the input he runs on
    InconsistentMessages,  ///< honest locally; the caller rewrites one of his outcomes on the wire
    BadOpening,         ///< final proof uses an opening that does not match com_y
    GarbageCommitment,  ///< com_y has no known opening
};
const char *to_string(FullSimDeviation d);

struct FullSimAliceView {
    protocols::Q2pcAliceView inner;
};

struct FullSimBobView {
    protocols::Q2pcBobView inner;
    qsim::Bits outcomes;
};

/// Aborts in phase "zk" when either of Bob's proofs is rejected; the inner output is released only after both.
FullSimAliceView fullsim_alice(channel::Endpoint &ep, const protocols::RunConfig &cfg, const mbqc::Pattern &pattern,
                               crypto::CoinSource &coins);
/// MutatingLink rewrite flipping the first q2pc.outcome that passes through it.
std::function<void(channel::Message &)> flip_first_outcome();

/// description is Bob's committed input; the run uses state_from_description(description)
/// unless the deviation substitutes another.
FullSimBobView fullsim_bob(channel::Endpoint &ep, const protocols::RunConfig &cfg, const mbqc::Pattern &shape,
                           const Bytes &description, const Seed &bob_seed, qsim::OutcomeSource &outcomes,
                           FullSimDeviation deviation = FullSimDeviation::None,
                           const std::optional<Bytes> &run_description = std::nullopt);

/// Inner messages of a full-simulation transcript, rebased to seq 0.
std::vector<channel::Message> fullsim_inner_messages(const std::vector<channel::Message> &transcript);

// ------------------------------------------------------------ ToyCpoqk -----

/// Public hash target of witness w.
Digest toy_target(const qsim::Bits &w);

/// Classical verifier of a proof system; must expose a seeded deterministic mode.
class CpoqkVerifier {
  public:
    virtual ~CpoqkVerifier() = default;
    /// Message for round i given the prover messages received so far.
    virtual Bytes challenge(std::size_t round, const std::vector<Bytes> &prover_messages) = 0;
};
using VerifierFactory = std::function<std::unique_ptr<CpoqkVerifier>(const Seed &)>;

/**
 * Replays a verifier with one seed against two different prover message
 * sequences; true iff its messages are byte-identical.
 */
bool check_message_independence(const VerifierFactory &factory, std::size_t rounds, const Seed &seed);

/// Challenges drawn from the verifier's coins only.
class ToyVerifier final : public CpoqkVerifier {
  public:
    static constexpr std::size_t kMasksPerRound = 8;

    ToyVerifier(const Seed &seed, std::size_t witness_bits);
    Bytes challenge(std::size_t round, const std::vector<Bytes> &prover_messages) override;

  private:
    crypto::CoinSource coins_;
    std::size_t bits_;
};

/// Challenges hashed from the last prover message. Violates message independence.
class AdaptiveMockVerifier final : public CpoqkVerifier {
  public:
    explicit AdaptiveMockVerifier(const Seed &seed) : seed_(seed) {}
    Bytes challenge(std::size_t round, const std::vector<Bytes> &prover_messages) override;

  private:
    Seed seed_;
};

/// Prover answer to a challenge: "toy.answer", round, one parity per mask.
Bytes toy_answer(std::size_t round, ByteView challenge, const qsim::Bits &w);
/// Last prover message: "toy.opening", w.
Bytes toy_opening(const qsim::Bits &w);
/// Acceptance of a full inner transcript: N challenges, N answers and the opening.
bool toy_accepts(const Digest &target, std::size_t witness_bits, const std::vector<Bytes> &challenges,
                 const std::vector<Bytes> &prover_messages);
/// Witness recovered from an accepting inner transcript.
std::optional<qsim::Bits> toy_extract(const Digest &target, std::size_t witness_bits,
                                      const std::vector<Bytes> &challenges, const std::vector<Bytes> &prover_messages);

// -------------------------------------------------------------- ZKPoQK -----

struct ZkpoqkPublic {
    Digest target{};
    std::size_t witness_bits = 0;
    std::size_t rounds = 0;
};

/// "rel.zkpoqk": com_sk opens to sk, and the decrypted transcript is accepted.
struct FinalStatement {
    SessionId session{};
    crypto::Commitment com_sk;
    ZkpoqkPublic pub;
    std::vector<Bytes> challenges;
    std::vector<Bytes> encrypted;
};
Bytes encode_final_statement(const FinalStatement &s);
FinalStatement decode_final_statement(ByteView bytes);
zk::Relation final_relation();

enum class ProverStrategy {
    Honest,
    WrongKey,          ///< encrypts under a key other than the committed one
    RandomCiphertexts, ///< no witness: sends random bytes of the right length
};
const char *to_string(ProverStrategy s);

struct ZkpoqkVerifierView {
    std::vector<Bytes> challenges;
    std::vector<Bytes> encrypted;
};

/// Prover holds witness_bits qubits; measures them once to read w.
void zkpoqk_prover(channel::Endpoint &ep, zk::IdealZk &zk, const ZkpoqkPublic &pub, const qsim::StateVector &witness,
                   crypto::CoinSource &coins, qsim::OutcomeSource &outcomes,
                   ProverStrategy strategy = ProverStrategy::Honest);
/// Returns only on acceptance; every rejection is a ProtocolAbort in phase "zk".
ZkpoqkVerifierView zkpoqk_verifier(channel::Endpoint &ep, zk::IdealZk &zk, const ZkpoqkPublic &pub, const Seed &seed);

/**
 * Witness behind an accepted transcript: extracts sk from the key proof,
 * decrypts the prover messages and runs the toy extractor. Throws
 * zk::ZkError when the transcript was not accepted.
 */
qsim::Bits zkpoqk_extract(const std::vector<channel::Message> &transcript, zk::IdealZk &zk,
                          const ZkpoqkPublic &pub);

} // namespace q2pc::compilers
