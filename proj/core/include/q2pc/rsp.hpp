/**
 * @file
 * Remote state preparation from the two-to-one trapdoor family.
 *
 * Four-state run: Alice sends a public key; Bob prepares a preimage
 * superposition (|x> + |x'>)/sqrt2 for a random image y, copies the
 * hardcore bit into a target, measures the preimage register in the X basis
 * (outcomes w) and applies Rz(-pi/2) then H to the target. Bob returns
 * (y, w) and holds |+_theta> with theta = 2 theta2 + 4 theta1 (units of
 * pi/4), where
 *
 *   theta2 = h(x) xor h(x'),  theta1 = theta2 <w, x xor x'> xor h(x) h(x').
 *
 * Eight-state run: two four-state runs give qubits with alpha = 2 theta2 +
 * 4 theta1 and beta = 2 theta2' + 4 theta1'. Bob undoes the final H Rz(-pi/2)
 * on the second qubit, applies CNOT from the first to the second, measures
 * the second at angle pi/4 and reports t. The first qubit is then |+_theta>:
 *
 *   theta = alpha + 4 theta1'                  if theta2' = 1
 *   theta = alpha + 2 theta1' - 1 + 4 t        if theta2' = 0
 */
#pragma once

#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "q2pc/angle8.hpp"
#include "q2pc/channel.hpp"
#include "q2pc/lattice.hpp"
#include "q2pc/qsim.hpp"

namespace q2pc::rsp {

struct FourStateAngles {
    std::uint8_t theta1 = 0;
    std::uint8_t theta2 = 0;

    Angle8 angle() const { return Angle8(2 * theta2 + 4 * theta1); }
    bool operator==(const FourStateAngles &) const = default;
};

class NotInImage : public std::runtime_error {
  public:
    NotInImage() : std::runtime_error("y has no preimage pair") {}
};

/// Alice's angle formula for a known preimage pair.
FourStateAngles angles_from_pair(const lattice::LatticeParams &params, const lattice::PreimagePair &pair,
                                 const qsim::Bits &w);

/// Inverts y with the trapdoor and applies the angle formula. Throws NotInImage.
FourStateAngles alice_decode(const lattice::TrapdoorKeypair &kp, const lattice::ZqVector &y, const qsim::Bits &w);

/// Bob's reply: image point and X-basis outcomes on the preimage register.
struct Measurement {
    lattice::ZqVector y;
    qsim::Bits w;
    bool operator==(const Measurement &) const = default;
};

Bytes encode_measurement(const Measurement &m);
/// Checks dimensions and ranges against params; throws WireError.
Measurement decode_measurement(const lattice::LatticeParams &params, ByteView bytes);

Bytes encode_keys(const std::vector<lattice::PublicKey> &keys);
std::vector<lattice::PublicKey> decode_keys(ByteView bytes);

/// Returns all preimages of y. Empty function means: public search, which needs small q^n.
using PreimageOracle = std::function<std::vector<lattice::Preimage>(const lattice::ZqVector &)>;

struct CollapsedImage {
    lattice::ZqVector y;
    lattice::PreimagePair pair;
    std::size_t resamples = 0;  ///< images drawn with a preimage count other than 2
};

/// Uniform domain point, its image, and the image's preimage pair. Resamples non-pairs.
CollapsedImage collapse(const lattice::PublicKey &pk, crypto::CoinSource &coins, const PreimageOracle &oracle = {});

struct BobOutput {
    qsim::StateVector state;
    Measurement meas;
    std::size_t resamples = 0;
};

/// Preimage superposition of the collapsed image with the hardcore bit copied into a last target qubit.
qsim::SparseState prepare_register(const lattice::PublicKey &pk, const CollapsedImage &img);

/// Simulates the quantum circuit on the collapsed preimage register.
BobOutput bob_quantum_from(const lattice::PublicKey &pk, const CollapsedImage &img, qsim::OutcomeSource &outcomes);
BobOutput bob_quantum(const lattice::PublicKey &pk, crypto::CoinSource &coins, qsim::OutcomeSource &outcomes,
                      const PreimageOracle &oracle = {});

/// Samples w from the quantum outcome law and builds |+_theta> directly.
BobOutput bob_shortcut_from(const lattice::PublicKey &pk, const CollapsedImage &img, crypto::CoinSource &coins);
BobOutput bob_shortcut(const lattice::PublicKey &pk, crypto::CoinSource &coins, const PreimageOracle &oracle = {});

/// The shortcut's rule mapping a uniform w to an outcome string.
qsim::Bits shortcut_outcomes(const lattice::LatticeParams &params, const lattice::PreimagePair &pair, qsim::Bits w);

enum class Backend { Quantum, Shortcut };
const char *to_string(Backend b);
bool quantum_supported(const lattice::LatticeParams &params);

/// Eight-state combination of two four-state results.
Angle8 merge_angle(FourStateAngles first, FourStateAngles second, int t);
/// state holds the first qubit at index 0 and the second at index 1; leaves one qubit. Returns t.
int merge_qubits(qsim::StateVector &state, qsim::OutcomeSource &outcomes);

/// Bob-side resources for wire runs.
struct BobContext {
    Backend backend = Backend::Quantum;
    crypto::CoinSource *coins = nullptr;
    qsim::OutcomeSource *outcomes = nullptr;
    PreimageOracle oracle;
    std::size_t resamples = 0;
};

/// Alice: optionally sends `rsp.key`, receives `rsp.meas`, decodes. Aborts on undecodable y.
FourStateAngles alice_rsp4(channel::Endpoint &ep, const lattice::TrapdoorKeypair &kp, bool send_key = true);
qsim::StateVector bob_rsp4(channel::Endpoint &ep, BobContext &ctx, const std::optional<lattice::PublicKey> &known = {});

struct EightStateResult {
    Angle8 theta;
    FourStateAngles first, second;
    int t = 0;
};

/// Alice: optionally sends both keys in one `rsp.key`, then two `rsp.meas` and one `rsp.merge`.
EightStateResult alice_rsp8(channel::Endpoint &ep, const lattice::TrapdoorKeypair &k1,
                            const lattice::TrapdoorKeypair &k2, bool send_keys = true);
qsim::StateVector bob_rsp8(channel::Endpoint &ep, BobContext &ctx,
                           const std::optional<std::pair<lattice::PublicKey, lattice::PublicKey>> &known = {});

/**
 * Trusted dealer replacing the RSP sub-protocol: Alice deals an angle into a
 * slot, Bob takes |+_theta> out of it. Used for exact law enumeration where
 * the real sub-protocol's lattice randomness is not enumerable.
 */
class IdealDealer {
  public:
    void deal(std::size_t slot, Angle8 theta);
    /// Blocks until the slot is dealt; throws ProtocolAbort once closed with the slot empty.
    qsim::StateVector take(std::size_t slot);
    /// Releases every blocked and future take of an empty slot.
    void close();
    /// Angles delivered so far, by slot.
    std::map<std::size_t, Angle8> deliveries() const;

  private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::size_t, Angle8> dealt_;
    bool closed_ = false;
};

} // namespace q2pc::rsp
