#include "q2pc/rsp.hpp"

#include "q2pc/errors.hpp"
#include "q2pc/wire.hpp"

namespace q2pc::rsp {

using lattice::LatticeParams;
using lattice::Preimage;
using lattice::PreimagePair;
using lattice::PublicKey;
using lattice::TrapdoorKeypair;
using lattice::ZqVector;
using qsim::Bits;

namespace {

Bits pair_difference(const LatticeParams &params, const PreimagePair &pair) {
    Bits a = lattice::encode(params, pair.x);
    const Bits b = lattice::encode(params, pair.x_prime);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] ^= b[i];
    return a;
}

int parity(const Bits &w, const Bits &diff) {
    int p = 0;
    for (std::size_t i = 0; i < diff.size(); ++i) p ^= w[i] & diff[i];
    return p;
}

std::optional<PreimagePair> as_pair(std::vector<Preimage> all) {
    if (all.size() != 2 || all[0].c == all[1].c) return std::nullopt;
    if (all[0].c == 1) std::swap(all[0], all[1]);
    return PreimagePair{std::move(all[0]), std::move(all[1])};
}

} // namespace

FourStateAngles angles_from_pair(const LatticeParams &params, const PreimagePair &pair, const Bits &w) {
    const Bits diff = pair_difference(params, pair);
    if (w.size() != diff.size()) throw std::invalid_argument("outcome string has the wrong width");
    const std::uint8_t h = lattice::hardcore(pair.x), hp = lattice::hardcore(pair.x_prime);
    FourStateAngles a;
    a.theta2 = h ^ hp;
    a.theta1 = static_cast<std::uint8_t>((a.theta2 & parity(w, diff)) ^ (h & hp));
    return a;
}

FourStateAngles alice_decode(const TrapdoorKeypair &kp, const ZqVector &y, const Bits &w) {
    auto pair = lattice::invert(kp, y);
    if (!pair) throw NotInImage();
    return angles_from_pair(kp.pk.params, *pair, w);
}

Bytes encode_measurement(const Measurement &m) {
    ByteWriter w;
    w.u32s(m.y).bits(m.w);
    return std::move(w).data();
}

Measurement decode_measurement(const LatticeParams &params, ByteView bytes) {
    ByteReader r(bytes);
    Measurement m;
    m.y = r.u32s();
    m.w = r.bits();
    r.expect_end();
    if (m.y.size() != params.m || m.w.size() != params.preimage_width()) {
        throw WireError("rsp measurement has the wrong dimensions");
    }
    for (auto v : m.y) {
        if (v >= params.q) throw WireError("rsp image entry out of range");
    }
    return m;
}

Bytes encode_keys(const std::vector<PublicKey> &keys) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(keys.size()));
    for (const auto &k : keys) w.bytes(lattice::serialize(k));
    return std::move(w).data();
}

std::vector<PublicKey> decode_keys(ByteView bytes) {
    ByteReader r(bytes);
    const std::uint32_t n = r.u32();
    if (n > 16) throw WireError("too many keys");
    std::vector<PublicKey> keys;
    for (std::uint32_t i = 0; i < n; ++i) keys.push_back(lattice::deserialize_public_key(r.bytes()));
    r.expect_end();
    return keys;
}

CollapsedImage collapse(const PublicKey &pk, crypto::CoinSource &coins, const PreimageOracle &oracle) {
    CollapsedImage img;
    for (;;) {
        const Preimage z = lattice::sample_domain_point(pk.params, coins);
        ZqVector y = lattice::eval_f(pk, z);
        auto pair = as_pair(oracle ? oracle(y) : lattice::search_preimages(pk, y));
        if (pair) {
            img.y = std::move(y);
            img.pair = std::move(*pair);
            return img;
        }
        ++img.resamples;
    }
}

constexpr std::size_t kMaxQuantumWidth = 4096;

bool quantum_supported(const LatticeParams &params) { return params.preimage_width() + 1 <= kMaxQuantumWidth; }

qsim::SparseState prepare_register(const PublicKey &pk, const CollapsedImage &img) {
    const auto &params = pk.params;
    if (!quantum_supported(params)) throw std::invalid_argument("preimage register too wide for the quantum backend");
    const std::size_t width = params.preimage_width();
    auto reg = qsim::SparseState::from_two_term(
        qsim::TwoTermState(width, lattice::encode(params, img.pair.x), lattice::encode(params, img.pair.x_prime)));
    const std::size_t target = reg.add_qubit();
    // h(z) = d is the last encoded bit.
    reg.cnot(width - 1, target);
    return reg;
}

BobOutput bob_quantum_from(const PublicKey &pk, const CollapsedImage &img, qsim::OutcomeSource &outcomes) {
    const auto &params = pk.params;
    if (!quantum_supported(params)) throw std::invalid_argument("preimage register too wide for the quantum backend");
    const std::size_t width = params.preimage_width();
    auto reg = prepare_register(pk, img);
    BobOutput out;
    out.meas.y = img.y;
    out.meas.w.resize(width);
    for (std::size_t i = 0; i < width; ++i) {
        out.meas.w[i] = static_cast<std::uint8_t>(reg.measure_in_plane(0, Angle8(0), outcomes));
    }
    reg.rz(0, Angle8(-2));
    reg.h(0);
    out.state = reg.to_dense();
    out.resamples = img.resamples;
    return out;
}

BobOutput bob_quantum(const PublicKey &pk, crypto::CoinSource &coins, qsim::OutcomeSource &outcomes,
                      const PreimageOracle &oracle) {
    return bob_quantum_from(pk, collapse(pk, coins, oracle), outcomes);
}

Bits shortcut_outcomes(const LatticeParams &params, const PreimagePair &pair, Bits w) {
    const Bits diff = pair_difference(params, pair);
    const bool same_hardcore = lattice::hardcore(pair.x) == lattice::hardcore(pair.x_prime);
    if (same_hardcore && parity(w, diff) == 1) {
        for (std::size_t i = 0; i < diff.size(); ++i) {
            if (diff[i]) {
                w[i] ^= 1;
                break;
            }
        }
    }
    return w;
}

BobOutput bob_shortcut_from(const PublicKey &pk, const CollapsedImage &img, crypto::CoinSource &coins) {
    const std::size_t width = pk.params.preimage_width();
    Bits w(width);
    for (auto &b : w) b = static_cast<std::uint8_t>(coins.bit());
    BobOutput out;
    out.meas.y = img.y;
    out.meas.w = shortcut_outcomes(pk.params, img.pair, std::move(w));
    out.state = qsim::StateVector::plus_state(angles_from_pair(pk.params, img.pair, out.meas.w).angle());
    out.resamples = img.resamples;
    return out;
}

BobOutput bob_shortcut(const PublicKey &pk, crypto::CoinSource &coins, const PreimageOracle &oracle) {
    return bob_shortcut_from(pk, collapse(pk, coins, oracle), coins);
}

const char *to_string(Backend b) { return b == Backend::Quantum ? "quantum" : "shortcut"; }

Angle8 merge_angle(FourStateAngles first, FourStateAngles second, int t) {
    const Angle8 alpha = first.angle();
    if (second.theta2 == 1) return alpha + Angle8(4 * second.theta1);
    return alpha + Angle8(2 * second.theta1 - 1 + 4 * t);
}

int merge_qubits(qsim::StateVector &state, qsim::OutcomeSource &outcomes) {
    if (state.num_qubits() != 2) throw std::invalid_argument("merge_qubits expects two qubits");
    state.h(1);
    state.rz(1, Angle8(2));
    state.h(1);
    state.cz(0, 1);
    state.h(1);
    return qsim::measure_in_plane_inplace(state, 1, Angle8(1), outcomes);
}

namespace {

Measurement recv_measurement(channel::Endpoint &ep, const LatticeParams &params) {
    const Bytes payload = ep.recv_expect("rsp.meas");
    try {
        return decode_measurement(params, payload);
    } catch (const WireError &e) {
        throw ProtocolAbort("rsp", std::nullopt, std::string("malformed rsp.meas: ") + e.what());
    }
}

FourStateAngles decode_or_abort(const TrapdoorKeypair &kp, const Measurement &m) {
    try {
        return alice_decode(kp, m.y, m.w);
    } catch (const NotInImage &) {
        throw ProtocolAbort("rsp", std::nullopt, "image point has no preimage pair");
    }
}

std::vector<PublicKey> recv_keys(channel::Endpoint &ep, std::size_t count) {
    const Bytes payload = ep.recv_expect("rsp.key");
    std::vector<PublicKey> keys;
    try {
        keys = decode_keys(payload);
    } catch (const WireError &e) {
        throw ProtocolAbort("rsp", std::nullopt, std::string("malformed rsp.key: ") + e.what());
    }
    if (keys.size() != count) throw ProtocolAbort("rsp", std::nullopt, "unexpected number of keys");
    return keys;
}

BobOutput run_backend(const PublicKey &pk, BobContext &ctx) {
    if (!ctx.coins || !ctx.outcomes) throw std::logic_error("BobContext needs coins and an outcome source");
    BobOutput out = ctx.backend == Backend::Quantum ? bob_quantum(pk, *ctx.coins, *ctx.outcomes, ctx.oracle)
                                                    : bob_shortcut(pk, *ctx.coins, ctx.oracle);
    ctx.resamples += out.resamples;
    return out;
}

} // namespace

FourStateAngles alice_rsp4(channel::Endpoint &ep, const TrapdoorKeypair &kp, bool send_key) {
    if (send_key) ep.send("rsp.key", encode_keys({kp.pk}));
    return decode_or_abort(kp, recv_measurement(ep, kp.pk.params));
}

qsim::StateVector bob_rsp4(channel::Endpoint &ep, BobContext &ctx, const std::optional<PublicKey> &known) {
    const PublicKey pk = known ? *known : recv_keys(ep, 1).front();
    BobOutput out = run_backend(pk, ctx);
    ep.send("rsp.meas", encode_measurement(out.meas));
    return std::move(out.state);
}

EightStateResult alice_rsp8(channel::Endpoint &ep, const TrapdoorKeypair &k1, const TrapdoorKeypair &k2,
                            bool send_keys) {
    if (send_keys) ep.send("rsp.key", encode_keys({k1.pk, k2.pk}));
    EightStateResult r;
    r.first = decode_or_abort(k1, recv_measurement(ep, k1.pk.params));
    r.second = decode_or_abort(k2, recv_measurement(ep, k2.pk.params));
    const Bytes merge_payload = ep.recv_expect("rsp.merge");
    ByteReader merge(merge_payload);
    try {
        r.t = merge.bit();
        merge.expect_end();
    } catch (const WireError &e) {
        throw ProtocolAbort("rsp", std::nullopt, std::string("malformed rsp.merge: ") + e.what());
    }
    r.theta = merge_angle(r.first, r.second, r.t);
    return r;
}

qsim::StateVector bob_rsp8(channel::Endpoint &ep, BobContext &ctx,
                           const std::optional<std::pair<PublicKey, PublicKey>> &known) {
    std::pair<PublicKey, PublicKey> keys;
    if (known) {
        keys = *known;
    } else {
        auto received = recv_keys(ep, 2);
        keys = {std::move(received[0]), std::move(received[1])};
    }
    BobOutput first = run_backend(keys.first, ctx);
    ep.send("rsp.meas", encode_measurement(first.meas));
    BobOutput second = run_backend(keys.second, ctx);
    ep.send("rsp.meas", encode_measurement(second.meas));
    qsim::StateVector both = first.state.tensor(second.state);
    const int t = merge_qubits(both, *ctx.outcomes);
    ByteWriter w;
    w.bit(t);
    ep.send("rsp.merge", std::move(w).data());
    return both;
}

void IdealDealer::deal(std::size_t slot, Angle8 theta) {
    std::lock_guard lock(mu_);
    if (!dealt_.emplace(slot, theta).second) throw std::logic_error("slot dealt twice");
    cv_.notify_all();
}

qsim::StateVector IdealDealer::take(std::size_t slot) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || dealt_.count(slot) != 0; });
    if (dealt_.count(slot) == 0) throw ProtocolAbort("rsp", std::nullopt, "dealer closed before the slot was dealt");
    return qsim::StateVector::plus_state(dealt_.at(slot));
}

void IdealDealer::close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
}

std::map<std::size_t, Angle8> IdealDealer::deliveries() const {
    std::lock_guard lock(mu_);
    return dealt_;
}

} // namespace q2pc::rsp
