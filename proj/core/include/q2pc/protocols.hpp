/**
 * @file
 * Interactive protocols as paired Alice/Bob procedures over an Endpoint.
 *
 * - OQFE, semi-honest: Alice learns M_Z Rx(-b pi/2)|psi> for her bit b and
 *   Bob's qubit |psi>, with b hidden from Bob.
 * - OQFE against a malicious Alice: the RSP key is derived from jointly tossed
 *   coins and proven well formed before Bob uses it.
 * - Q2PC: blind evaluation of Alice's private MBQC pattern on Bob's quantum input.
 * - Output delivery: Bob's classical output travels through Alice encrypted and
 *   authenticated under Bob's keys.
 *
 * Every procedure is single threaded and lock-step: a party reads everything
 * the peer has sent before sending. Aborts are ProtocolAbort with phase
 * "rsp", "zk", "commit", "protocol" or "output".
 */
#pragma once

#include <condition_variable>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "q2pc/channel.hpp"
#include "q2pc/lattice.hpp"
#include "q2pc/mbqc.hpp"
#include "q2pc/primitives.hpp"
#include "q2pc/qsim.hpp"
#include "q2pc/rsp.hpp"
#include "q2pc/zk.hpp"

namespace q2pc::protocols {

/// Real runs the lattice sub-protocol; Ideal hands |+_theta> over through an IdealDealer.
enum class RspMode { Real, Ideal };
const char *to_string(RspMode m);

/// Resources both parties of one run agree on.
struct RunConfig {
    lattice::LatticeParams params = lattice::profile_params("tiny");
    rsp::Backend backend = rsp::Backend::Quantum;
    RspMode rsp_mode = RspMode::Real;
    rsp::IdealDealer *dealer = nullptr;  ///< required in Ideal mode
    zk::IdealZk *zk = nullptr;           ///< required by every protocol with proofs
    rsp::PreimageOracle oracle;          ///< Bob's sibling lookup where public search is infeasible
};

// ---------------------------------------------------------------- OQFE ------

/// delta = 2 ((b + theta2 + 2 r_A) mod 4).
Angle8 oqfe_delta(int b, int theta2, int r_a);
/// s_b = s_bar ^ theta1 ^ r_A ^ (m0 & b).
int oqfe_decode(int s_bar, int theta1, int r_a, int m0, int b);
/// b* = ((delta/2 - theta2) mod 4) mod 2, delta on the quarter-turn grid.
int extracted_bit(Angle8 delta, int theta2);

/// Values forced in place of Alice's coins, for enumeration.
struct OqfeAliceOptions {
    std::optional<rsp::FourStateAngles> theta;  ///< Ideal mode only
    std::optional<int> r_a;
};

struct OqfeAliceView {
    int b = 0;
    int r_a = 0;
    rsp::FourStateAngles theta;
    Angle8 delta;
    int m0 = 0;
    int s_bar = 0;
    int s_b = 0;
};

struct OqfeBobView {
    Angle8 delta;
    int m0 = 0;
    int m1 = 0;  ///< stays with Bob
    int s_bar = 0;
};

OqfeAliceView oqfe_alice(channel::Endpoint &ep, const RunConfig &cfg, int b, crypto::CoinSource &coins,
                         const OqfeAliceOptions &opts = {});
OqfeBobView oqfe_bob(channel::Endpoint &ep, const RunConfig &cfg, const qsim::StateVector &psi,
                     crypto::CoinSource &coins, qsim::OutcomeSource &outcomes);

/// Bob's part after his RSP qubit arrived: receives delta, measures, sends the result.
OqfeBobView oqfe_bob_finish(channel::Endpoint &ep, const qsim::StateVector &psi, const qsim::StateVector &held,
                            qsim::OutcomeSource &outcomes);

// ---------------------------------------------- coin-tossed RSP keys -------

/// Seed for the key labelled tag under joint coins r_f.
Seed derive_key_seed(const Seed &r_f, std::string_view tag);
Seed xor_seeds(const Seed &a, const Seed &b);

/// Statement: the keys were generated from r_f^A XOR r_f^B, with r_f^A the content of com_f.
struct KeyStatement {
    crypto::Commitment com_f;
    Seed r_f_b{};
    std::vector<std::string> tags;
    std::vector<lattice::PublicKey> keys;
};
Bytes encode_key_statement(const KeyStatement &s);
KeyStatement decode_key_statement(ByteView bytes);
Bytes encode_key_witness(const Seed &r_f_a, const crypto::Opening &dec_f);
std::pair<Seed, crypto::Opening> decode_key_witness(ByteView bytes);
/// "rel.keygen".
zk::Relation key_relation();

// -------------------------------------------- OQFE, malicious Alice ---------

enum class AliceStrategy {
    Honest,
    BadKey,                  ///< key drawn from private coins instead of r_f
    InconsistentCommitment,  ///< key and witness use a share other than the committed one
};
const char *to_string(AliceStrategy s);

struct MalAliceOptions {
    AliceStrategy strategy = AliceStrategy::Honest;
    std::optional<int> r_a;
    std::optional<rsp::FourStateAngles> theta;  ///< Ideal mode only
};

struct MalAliceView {
    OqfeAliceView oqfe;
    Seed r_f_a{};
    crypto::CommitResult com_f;
};

struct MalBobOptions {
    bool flip_coin_after_send = false;  ///< verifies against a share differing from the one sent
};

MalAliceView oqfe_mal_alice(channel::Endpoint &ep, const RunConfig &cfg, int b, crypto::CoinSource &coins,
                            const MalAliceOptions &opts = {});
OqfeBobView oqfe_mal_bob(channel::Endpoint &ep, const RunConfig &cfg, const qsim::StateVector &psi,
                         crypto::CoinSource &coins, qsim::OutcomeSource &outcomes, const MalBobOptions &opts = {});

/// The extractor's verdict on one transcript.
struct Extraction {
    enum class Kind { Extracted, Aborted, Flagged };
    Kind kind = Kind::Aborted;
    int b_star = 0;
    std::string reason;
};
const char *to_string(Extraction::Kind k);

/**
 * Recovers Alice's effective input from a Real-mode transcript: extracts r_f^A
 * from her accepted key proof, rebuilds the key, decodes theta2 from Bob's
 * measurement and reads b* = ((delta/2 - theta2) mod 4) mod 2.
 */
Extraction extract_alice_input(const std::vector<channel::Message> &transcript, const RunConfig &cfg);

// ---------------------------------------------------------------- Q2PC ------

/// Sites Alice prepares through RSP, column-major over columns 1..m.
std::vector<Site> rsp_sites(const mbqc::Pattern &pattern);
/// The pattern with every angle zeroed; the part Bob may know.
mbqc::Pattern public_shape(const mbqc::Pattern &pattern);

/// Statement: delta at site equals phi' + theta + r pi for the phi committed in com.
struct DeltaStatement {
    Site site;
    Angle8 delta;
    int sz = 0;
    int sx = 0;
    crypto::Commitment com;
};
Bytes encode_delta_statement(const DeltaStatement &s);
DeltaStatement decode_delta_statement(ByteView bytes);
Bytes encode_delta_witness(int r, Angle8 theta, Angle8 phi, const crypto::Opening &dec);
/// "rel.delta".
zk::Relation delta_relation();
/// Committed form of an angle.
Bytes angle_message(Angle8 phi);

struct Q2pcAliceOptions {
    std::optional<std::vector<Angle8>> theta;  ///< per rsp_sites entry; Ideal mode only
    std::optional<std::vector<int>> r;         ///< per rsp_sites entry; output-column entries ignored
    std::optional<Site> tamper_delta_at;       ///< sends delta + 1 there, with a proof that cannot verify
};

struct Q2pcAliceView {
    qsim::Bits output;
    std::vector<Angle8> theta;
    std::vector<int> r;
    std::vector<Angle8> deltas;  ///< in sending order
};

struct Q2pcBobView {
    std::size_t measurements = 0;
};

Q2pcAliceView q2pc_alice(channel::Endpoint &ep, const RunConfig &cfg, const mbqc::Pattern &pattern,
                         crypto::CoinSource &coins, const Q2pcAliceOptions &opts = {});
/// shape carries no angles; input holds one qubit per row.
Q2pcBobView q2pc_bob(channel::Endpoint &ep, const RunConfig &cfg, const mbqc::Pattern &shape,
                     const qsim::StateVector &input, crypto::CoinSource &coins, qsim::OutcomeSource &outcomes);

// ----------------------------------------------------- output delivery ------

struct DeliveryKeys {
    crypto::MacKey k1;
    crypto::SymKey k2;
    static DeliveryKeys generate(crypto::CoinSource &coins);
};

/// ct || tag, ct = y XOR prg(k2), tag = MAC(k1, ct).
Bytes seal_output(const DeliveryKeys &keys, const SessionId &session, const qsim::Bits &y);
/// nullopt when the tag does not verify.
std::optional<qsim::Bits> open_output(const DeliveryKeys &keys, const SessionId &session, ByteView enc);

/// Classical toy second output: y_B[i] = table[x_A[i mod |x_A|]][x_B[i]].
struct ToyFunction {
    std::array<std::array<std::uint8_t, 2>, 2> table{{{0, 0}, {0, 1}}};
    qsim::Bits evaluate(const qsim::Bits &x_a, const qsim::Bits &x_b) const;
};

/**
 * Trusted evaluator of the extended functionality: takes Bob's classical input
 * with his keys and Alice's bits, hands Alice Enc_B.
 */
class OutputFunctionality {
  public:
    OutputFunctionality(ToyFunction f, SessionId session) : f_(f), session_(session) {}

    void bob_input(qsim::Bits x_b, DeliveryKeys keys);
    /// Blocks until Bob's input arrived.
    Bytes alice_request(const qsim::Bits &x_a);

  private:
    ToyFunction f_;
    SessionId session_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::optional<std::pair<qsim::Bits, DeliveryKeys>> bob_;
};

struct DeliveryAliceOptions {
    std::optional<std::size_t> flip_ciphertext_bit;
};

struct DeliveryAliceView {
    qsim::Bits y_a;
    Bytes enc_b;
};

/// Alice evaluates bit_flips(x_A) through Q2PC, then forwards Enc_B as `out.enc`.
DeliveryAliceView delivery_alice(channel::Endpoint &ep, const RunConfig &cfg, const qsim::Bits &x_a,
                                 OutputFunctionality &func, crypto::CoinSource &coins,
                                 const DeliveryAliceOptions &opts = {});
/// Aborts with phase "output" when Enc_B fails authentication.
qsim::Bits delivery_bob(channel::Endpoint &ep, const RunConfig &cfg, std::size_t input_bits,
                        const qsim::StateVector &input, const DeliveryKeys &keys, crypto::CoinSource &coins,
                        qsim::OutcomeSource &outcomes);

} // namespace q2pc::protocols
