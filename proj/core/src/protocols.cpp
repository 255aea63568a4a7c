#include "q2pc/protocols.hpp"

#include <stdexcept>

#include "q2pc/errors.hpp"
#include "q2pc/session.hpp"
#include "q2pc/wire.hpp"

namespace q2pc::protocols {

using channel::Endpoint;
using channel::Role;
using qsim::Bits;
using qsim::StateVector;

namespace {

template <typename F>
auto parse_or_abort(const char *phase, std::optional<Site> site, const char *what, F &&parse) {
    try {
        return parse();
    } catch (const WireError &e) {
        throw ProtocolAbort(phase, site, std::string("malformed ") + what + ": " + e.what());
    }
}

/// Closes the dealer when Alice leaves, so Bob never waits on a slot she will not fill.
class DealerCloser {
  public:
    explicit DealerCloser(const RunConfig &cfg) : dealer_(cfg.rsp_mode == RspMode::Ideal ? cfg.dealer : nullptr) {}
    ~DealerCloser() {
        if (dealer_) dealer_->close();
    }
    DealerCloser(const DealerCloser &) = delete;
    DealerCloser &operator=(const DealerCloser &) = delete;

  private:
    rsp::IdealDealer *dealer_;
};

void require_dealer(const RunConfig &cfg) {
    if (cfg.rsp_mode == RspMode::Ideal && cfg.dealer == nullptr) {
        throw std::invalid_argument("ideal RSP mode needs a dealer");
    }
}

zk::IdealZk &require_zk(const RunConfig &cfg) {
    if (cfg.zk == nullptr) throw std::invalid_argument("protocol needs a ZK functionality");
    return *cfg.zk;
}

rsp::BobContext bob_context(const RunConfig &cfg, crypto::CoinSource &coins, qsim::OutcomeSource &outcomes) {
    rsp::BobContext ctx;
    ctx.backend = cfg.backend;
    ctx.coins = &coins;
    ctx.outcomes = &outcomes;
    ctx.oracle = cfg.oracle;
    return ctx;
}

std::vector<lattice::PublicKey> recv_keys(Endpoint &ep, std::size_t count, std::optional<Site> site,
                                          const lattice::LatticeParams &params) {
    const Bytes payload = ep.recv_expect("rsp.key");
    auto keys = parse_or_abort("rsp", site, "rsp.key", [&] { return rsp::decode_keys(payload); });
    if (keys.size() != count) throw ProtocolAbort("rsp", site, "unexpected number of keys");
    for (const auto &k : keys) {
        if (!(k.params == params)) throw ProtocolAbort("rsp", site, "key uses foreign parameters");
    }
    return keys;
}

int recv_bit(Endpoint &ep, const char *type, std::optional<Site> site) {
    const Bytes payload = ep.recv_expect(type);
    return parse_or_abort("protocol", site, type, [&] {
        ByteReader r(payload);
        const int b = r.bit();
        r.expect_end();
        return b;
    });
}

void send_bit(Endpoint &ep, const char *type, int b) {
    ByteWriter w;
    w.bit(b);
    ep.send(type, std::move(w).data());
}

void check_bit(int b, const char *what) {
    if (b != 0 && b != 1) throw std::invalid_argument(std::string(what) + " must be 0 or 1");
}

/// Sends delta and receives (m0, s_bar); fills the rest of the view.
void oqfe_alice_finish(Endpoint &ep, OqfeAliceView &v) {
    v.delta = oqfe_delta(v.b, v.theta.theta2, v.r_a);
    ByteWriter w;
    w.angle(v.delta);
    ep.send("oqfe.delta", std::move(w).data());
    const Bytes payload = ep.recv_expect("oqfe.result");
    parse_or_abort("protocol", std::nullopt, "oqfe.result", [&] {
        ByteReader r(payload);
        v.m0 = r.bit();
        v.s_bar = r.bit();
        r.expect_end();
        return 0;
    });
    v.s_b = oqfe_decode(v.s_bar, v.theta.theta1, v.r_a, v.m0, v.b);
}

rsp::FourStateAngles draw_angles(const std::optional<rsp::FourStateAngles> &forced, crypto::CoinSource &coins) {
    if (forced) {
        if (forced->theta1 > 1 || forced->theta2 > 1) throw std::invalid_argument("forced theta bits must be 0 or 1");
        return *forced;
    }
    rsp::FourStateAngles a;
    a.theta2 = static_cast<std::uint8_t>(coins.bit());
    a.theta1 = static_cast<std::uint8_t>(coins.bit());
    return a;
}

int draw_mask(const std::optional<int> &forced, crypto::CoinSource &coins) {
    if (forced) {
        check_bit(*forced, "r_A");
        return *forced;
    }
    return coins.bit();
}

Bytes encode_seed_list(const std::vector<Seed> &seeds) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(seeds.size()));
    for (const auto &s : seeds) w.fixed(s);
    return std::move(w).data();
}

std::vector<Seed> decode_seed_list(ByteView bytes, std::size_t expected) {
    ByteReader r(bytes);
    if (r.u32() != expected) throw WireError("unexpected number of coin shares");
    std::vector<Seed> out(expected);
    for (auto &s : out) s = r.fixed<32>();
    r.expect_end();
    return out;
}

} // namespace

const char *to_string(RspMode m) { return m == RspMode::Real ? "real" : "ideal"; }

// ---------------------------------------------------------------- OQFE ------

Angle8 oqfe_delta(int b, int theta2, int r_a) { return Angle8(2 * ((b + theta2 + 2 * r_a) % 4)); }

int oqfe_decode(int s_bar, int theta1, int r_a, int m0, int b) { return (s_bar ^ theta1 ^ r_a ^ (m0 & b)) & 1; }

int extracted_bit(Angle8 delta, int theta2) { return (((delta.value() / 2 - theta2) % 4 + 4) % 4) % 2; }

OqfeAliceView oqfe_alice(Endpoint &ep, const RunConfig &cfg, int b, crypto::CoinSource &coins,
                         const OqfeAliceOptions &opts) {
    check_bit(b, "b");
    require_dealer(cfg);
    DealerCloser closer(cfg);
    OqfeAliceView v;
    v.b = b;
    if (cfg.rsp_mode == RspMode::Ideal) {
        v.theta = draw_angles(opts.theta, coins);
        cfg.dealer->deal(0, v.theta.angle());
    } else {
        if (opts.theta) throw std::invalid_argument("theta can only be forced in ideal RSP mode");
        const auto kp = lattice::gen(cfg.params, coins);
        v.theta = rsp::alice_rsp4(ep, kp);
    }
    v.r_a = draw_mask(opts.r_a, coins);
    oqfe_alice_finish(ep, v);
    return v;
}

OqfeBobView oqfe_bob(Endpoint &ep, const RunConfig &cfg, const StateVector &psi, crypto::CoinSource &coins,
                     qsim::OutcomeSource &outcomes) {
    if (psi.num_qubits() != 1) throw std::invalid_argument("OQFE input is one qubit");
    require_dealer(cfg);
    StateVector held;
    if (cfg.rsp_mode == RspMode::Ideal) {
        held = cfg.dealer->take(0);
    } else {
        auto ctx = bob_context(cfg, coins, outcomes);
        held = rsp::bob_rsp4(ep, ctx);
    }
    return oqfe_bob_finish(ep, psi, held, outcomes);
}

OqfeBobView oqfe_bob_finish(Endpoint &ep, const StateVector &psi, const StateVector &held,
                            qsim::OutcomeSource &outcomes) {
    OqfeBobView v;
    const Bytes payload = ep.recv_expect("oqfe.delta");
    v.delta = parse_or_abort("protocol", std::nullopt, "oqfe.delta", [&] {
        ByteReader r(payload);
        const Angle8 a = r.angle();
        r.expect_end();
        return a;
    });
    // Qubits: 0 input, 1 RSP output, 2 fresh |+>.
    StateVector state = psi.tensor(held).tensor(StateVector::plus_state());
    state.cz(0, 1);
    state.cz(1, 2);
    v.m0 = qsim::measure_in_plane_inplace(state, 0, Angle8(0), outcomes);
    v.m1 = qsim::measure_in_plane_inplace(state, 0, v.delta, outcomes);
    if (v.m0) state.z(0);
    if (v.m1) state.x(0);
    v.s_bar = qsim::measure_z_inplace(state, 0, outcomes);
    ByteWriter w;
    w.bit(v.m0).bit(v.s_bar);
    ep.send("oqfe.result", std::move(w).data());
    return v;
}

// ---------------------------------------------- coin-tossed RSP keys -------

Seed derive_key_seed(const Seed &r_f, std::string_view tag) {
    crypto::Sha256 h;
    h.update("q2pc.keygen").update_u64(tag.size()).update(tag).update(ByteView(r_f));
    return h.finish();
}

Seed xor_seeds(const Seed &a, const Seed &b) {
    Seed out{};
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] ^ b[i];
    return out;
}

Bytes encode_key_statement(const KeyStatement &s) {
    if (s.tags.size() != s.keys.size()) throw std::invalid_argument("one tag per key");
    ByteWriter w;
    w.fixed(s.com_f.com).fixed(s.r_f_b).u32(static_cast<std::uint32_t>(s.keys.size()));
    for (std::size_t i = 0; i < s.keys.size(); ++i) w.text(s.tags[i]).bytes(lattice::serialize(s.keys[i]));
    return std::move(w).data();
}

KeyStatement decode_key_statement(ByteView bytes) {
    ByteReader r(bytes);
    KeyStatement s;
    s.com_f.com = r.fixed<32>();
    s.r_f_b = r.fixed<32>();
    const std::uint32_t count = r.u32();
    if (count > 16) throw WireError("too many keys in statement");
    for (std::uint32_t i = 0; i < count; ++i) {
        s.tags.push_back(r.text());
        const Bytes pk = r.bytes();
        s.keys.push_back(lattice::deserialize_public_key(pk));
    }
    r.expect_end();
    return s;
}

Bytes encode_key_witness(const Seed &r_f_a, const crypto::Opening &dec_f) {
    ByteWriter w;
    w.fixed(r_f_a).fixed(dec_f);
    return std::move(w).data();
}

std::pair<Seed, crypto::Opening> decode_key_witness(ByteView bytes) {
    ByteReader r(bytes);
    Seed a = r.fixed<32>();
    crypto::Opening dec = r.fixed<32>();
    r.expect_end();
    return {a, dec};
}

zk::Relation key_relation() {
    zk::Relation rel;
    rel.name = "rel.keygen";
    rel.predicate = [](ByteView statement, ByteView witness) {
        const KeyStatement s = decode_key_statement(statement);
        const auto [r_f_a, dec_f] = decode_key_witness(witness);
        if (!crypto::verify_commitment(s.com_f, dec_f, ByteView(r_f_a))) return false;
        const Seed r_f = xor_seeds(r_f_a, s.r_f_b);
        for (std::size_t i = 0; i < s.keys.size(); ++i) {
            const auto kp = lattice::gen_from_seed(s.keys[i].params, derive_key_seed(r_f, s.tags[i]));
            if (!(kp.pk == s.keys[i])) return false;
        }
        return true;
    };
    return rel;
}

// -------------------------------------------- OQFE, malicious Alice ---------

const char *to_string(AliceStrategy s) {
    switch (s) {
    case AliceStrategy::Honest: return "honest";
    case AliceStrategy::BadKey: return "bad-key";
    case AliceStrategy::InconsistentCommitment: return "inconsistent-commitment";
    }
    return "?";
}

MalAliceView oqfe_mal_alice(Endpoint &ep, const RunConfig &cfg, int b, crypto::CoinSource &coins,
                            const MalAliceOptions &opts) {
    check_bit(b, "b");
    require_dealer(cfg);
    auto &zk = require_zk(cfg);
    DealerCloser closer(cfg);
    MalAliceView v;
    v.oqfe.b = b;
    v.r_f_a = coins.array<32>();
    v.com_f = crypto::commit(ByteView(v.r_f_a), coins);
    ep.send("q2pc.commit", Bytes(v.com_f.commitment.com.begin(), v.com_f.commitment.com.end()));

    const Bytes coin_payload = ep.recv_expect("q2pc.coin");
    const Seed r_f_b = parse_or_abort("protocol", std::nullopt, "q2pc.coin", [&] {
        ByteReader r(coin_payload);
        Seed s = r.fixed<32>();
        r.expect_end();
        return s;
    });

    Seed share = v.r_f_a;
    if (opts.strategy == AliceStrategy::InconsistentCommitment) share = coins.array<32>();
    lattice::TrapdoorKeypair kp = opts.strategy == AliceStrategy::BadKey
                                      ? lattice::gen(cfg.params, coins)
                                      : lattice::gen_from_seed(cfg.params, derive_key_seed(xor_seeds(share, r_f_b), "oqfe"));
    ep.send("rsp.key", rsp::encode_keys({kp.pk}));
    const KeyStatement stmt{v.com_f.commitment, r_f_b, {"oqfe"}, {kp.pk}};
    zk::send_proof(ep, zk.prove(Role::Alice, key_relation(), encode_key_statement(stmt),
                                encode_key_witness(share, v.com_f.dec)));

    if (cfg.rsp_mode == RspMode::Ideal) {
        v.oqfe.theta = draw_angles(opts.theta, coins);
        cfg.dealer->deal(0, v.oqfe.theta.angle());
    } else {
        if (opts.theta) throw std::invalid_argument("theta can only be forced in ideal RSP mode");
        v.oqfe.theta = rsp::alice_rsp4(ep, kp, false);
    }
    v.oqfe.r_a = draw_mask(opts.r_a, coins);
    oqfe_alice_finish(ep, v.oqfe);
    return v;
}

OqfeBobView oqfe_mal_bob(Endpoint &ep, const RunConfig &cfg, const StateVector &psi, crypto::CoinSource &coins,
                         qsim::OutcomeSource &outcomes, const MalBobOptions &opts) {
    if (psi.num_qubits() != 1) throw std::invalid_argument("OQFE input is one qubit");
    require_dealer(cfg);
    auto &zk = require_zk(cfg);
    const Bytes com_payload = ep.recv_expect("q2pc.commit");
    crypto::Commitment com_f;
    com_f.com = parse_or_abort("commit", std::nullopt, "q2pc.commit", [&] {
        ByteReader r(com_payload);
        auto c = r.fixed<32>();
        r.expect_end();
        return c;
    });
    Seed r_f_b = coins.array<32>();
    ep.send("q2pc.coin", Bytes(r_f_b.begin(), r_f_b.end()));
    if (opts.flip_coin_after_send) r_f_b[0] ^= 1;

    const auto pk = recv_keys(ep, 1, std::nullopt, cfg.params).front();
    const auto proof = zk::recv_proof(ep);
    const KeyStatement stmt{com_f, r_f_b, {"oqfe"}, {pk}};
    if (!zk.verify(key_relation(), encode_key_statement(stmt), proof)) {
        throw ProtocolAbort("zk", std::nullopt, "key proof rejected");
    }

    StateVector held;
    if (cfg.rsp_mode == RspMode::Ideal) {
        held = cfg.dealer->take(0);
    } else {
        auto ctx = bob_context(cfg, coins, outcomes);
        held = rsp::bob_rsp4(ep, ctx, pk);
    }
    return oqfe_bob_finish(ep, psi, held, outcomes);
}

const char *to_string(Extraction::Kind k) {
    switch (k) {
    case Extraction::Kind::Extracted: return "extracted";
    case Extraction::Kind::Aborted: return "aborted";
    case Extraction::Kind::Flagged: return "flagged";
    }
    return "?";
}

Extraction extract_alice_input(const std::vector<channel::Message> &transcript, const RunConfig &cfg) {
    auto &zk = require_zk(cfg);
    const auto find = [&](std::string_view type) -> const channel::Message * {
        for (const auto &m : transcript) {
            if (m.type == type) return &m;
        }
        return nullptr;
    };
    Extraction out;
    if (find("abort") != nullptr) {
        out.reason = "run aborted";
        return out;
    }
    const auto *com = find("q2pc.commit");
    const auto *coin = find("q2pc.coin");
    const auto *key = find("rsp.key");
    const auto *token = find("zk.token");
    const auto *meas = find("rsp.meas");
    const auto *delta = find("oqfe.delta");
    if (!com || !coin || !key || !token || !delta) {
        out.reason = "transcript ends before delta";
        return out;
    }
    out.kind = Extraction::Kind::Flagged;
    try {
        KeyStatement stmt;
        ByteReader com_reader(com->payload);
        stmt.com_f.com = com_reader.fixed<32>();
        ByteReader coin_reader(coin->payload);
        stmt.r_f_b = coin_reader.fixed<32>();
        stmt.tags = {"oqfe"};
        stmt.keys = rsp::decode_keys(key->payload);
        if (stmt.keys.size() != 1) {
            out.reason = "expected one key";
            return out;
        }
        const Bytes statement = encode_key_statement(stmt);
        const zk::ProofMessages proof{token->payload};
        if (!zk.verify(key_relation(), statement, proof)) {
            out.kind = Extraction::Kind::Aborted;
            out.reason = "key proof rejected";
            return out;
        }
        const auto [r_f_a, dec_f] = decode_key_witness(zk.extract(key_relation(), statement, proof));
        if (!crypto::verify_commitment(stmt.com_f, dec_f, ByteView(r_f_a))) {
            out.reason = "extracted share does not open the commitment";
            return out;
        }
        const auto kp = lattice::gen_from_seed(stmt.keys[0].params,
                                               derive_key_seed(xor_seeds(r_f_a, stmt.r_f_b), "oqfe"));
        if (!(kp.pk == stmt.keys[0])) {
            out.reason = "key not derived from the joint coins";
            return out;
        }
        if (!meas) {
            out.reason = "no RSP measurement in transcript";
            return out;
        }
        const auto m = rsp::decode_measurement(kp.pk.params, meas->payload);
        const auto theta = rsp::alice_decode(kp, m.y, m.w);
        ByteReader delta_reader(delta->payload);
        const Angle8 d = delta_reader.angle();
        if (!d.is_even()) {
            out.reason = "delta outside the quarter-turn grid";
            return out;
        }
        out.kind = Extraction::Kind::Extracted;
        out.b_star = extracted_bit(d, theta.theta2);
        return out;
    } catch (const WireError &e) {
        out.reason = std::string("malformed transcript: ") + e.what();
    } catch (const rsp::NotInImage &) {
        out.reason = "Bob's image point has no preimage pair";
    } catch (const zk::ZkError &e) {
        out.reason = e.what();
    }
    return out;
}

// ---------------------------------------------------------------- Q2PC ------

std::vector<Site> rsp_sites(const mbqc::Pattern &pattern) {
    std::vector<Site> sites;
    for (std::size_t j = 1; j <= pattern.m; ++j) {
        for (std::size_t i = 0; i < pattern.n; ++i) sites.push_back({i, j});
    }
    return sites;
}

mbqc::Pattern public_shape(const mbqc::Pattern &pattern) {
    mbqc::Pattern shape = pattern;
    for (auto &row : shape.phi) {
        for (auto &a : row) a = Angle8(0);
    }
    return shape;
}

Bytes angle_message(Angle8 phi) { return Bytes{static_cast<std::uint8_t>(phi.value())}; }

Bytes encode_delta_statement(const DeltaStatement &s) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(s.site.row)).u32(static_cast<std::uint32_t>(s.site.col));
    w.angle(s.delta).bit(s.sz).bit(s.sx).fixed(s.com.com);
    return std::move(w).data();
}

DeltaStatement decode_delta_statement(ByteView bytes) {
    ByteReader r(bytes);
    DeltaStatement s;
    s.site.row = r.u32();
    s.site.col = r.u32();
    s.delta = r.angle();
    s.sz = r.bit();
    s.sx = r.bit();
    s.com.com = r.fixed<32>();
    r.expect_end();
    return s;
}

Bytes encode_delta_witness(int r, Angle8 theta, Angle8 phi, const crypto::Opening &dec) {
    ByteWriter w;
    w.bit(r).angle(theta).angle(phi).fixed(dec);
    return std::move(w).data();
}

zk::Relation delta_relation() {
    zk::Relation rel;
    rel.name = "rel.delta";
    rel.predicate = [](ByteView statement, ByteView witness) {
        const DeltaStatement s = decode_delta_statement(statement);
        ByteReader wr(witness);
        const int r = wr.bit();
        const Angle8 theta = wr.angle();
        const Angle8 phi = wr.angle();
        const crypto::Opening dec = wr.fixed<32>();
        wr.expect_end();
        if (!crypto::verify_commitment(s.com, dec, angle_message(phi))) return false;
        return mbqc::compute_delta(mbqc::compute_phi_prime(phi, s.sx, s.sz), theta, r) == s.delta;
    };
    return rel;
}

namespace {

struct SiteCommitments {
    std::vector<crypto::Commitment> phi;
    std::vector<crypto::Commitment> f;  ///< Real mode only
};

Bytes encode_site_commitments(const SiteCommitments &c) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(c.phi.size())).bit(c.f.empty() ? 0 : 1);
    for (std::size_t k = 0; k < c.phi.size(); ++k) {
        w.fixed(c.phi[k].com);
        if (!c.f.empty()) w.fixed(c.f[k].com);
    }
    return std::move(w).data();
}

SiteCommitments decode_site_commitments(ByteView bytes, std::size_t expected, bool with_f) {
    ByteReader r(bytes);
    if (r.u32() != expected) throw WireError("unexpected number of site commitments");
    if (r.bit() != (with_f ? 1 : 0)) throw WireError("commitment layout does not match the RSP mode");
    SiteCommitments c;
    for (std::size_t k = 0; k < expected; ++k) {
        c.phi.push_back({r.fixed<32>()});
        if (with_f) c.f.push_back({r.fixed<32>()});
    }
    r.expect_end();
    return c;
}

std::size_t site_index(const mbqc::Pattern &p, Site s) { return (s.col - 1) * p.n + s.row; }

const std::vector<std::string> &rsp8_tags() {
    static const std::vector<std::string> tags{"k1", "k2"};
    return tags;
}

} // namespace

Q2pcAliceView q2pc_alice(Endpoint &ep, const RunConfig &cfg, const mbqc::Pattern &pattern, crypto::CoinSource &coins,
                         const Q2pcAliceOptions &opts) {
    pattern.validate();
    require_dealer(cfg);
    auto &zk = require_zk(cfg);
    DealerCloser closer(cfg);
    const auto sites = rsp_sites(pattern);
    const std::size_t count = sites.size();
    const bool ideal = cfg.rsp_mode == RspMode::Ideal;
    if (opts.theta && (!ideal || opts.theta->size() != count)) {
        throw std::invalid_argument("forced theta needs ideal RSP mode and one angle per site");
    }
    if (opts.r && opts.r->size() != count) throw std::invalid_argument("forced r needs one bit per site");

    Q2pcAliceView v;
    v.theta.resize(count);
    v.r.resize(count);
    if (ideal) {
        for (std::size_t k = 0; k < count; ++k) {
            v.theta[k] = opts.theta ? (*opts.theta)[k] : Angle8(static_cast<int>(coins.uniform_below(8)));
            cfg.dealer->deal(k, v.theta[k]);
        }
    }
    for (std::size_t k = 0; k < count; ++k) {
        if (opts.r) check_bit((*opts.r)[k], "r");
        const int r = opts.r ? (*opts.r)[k] : coins.bit();
        v.r[k] = pattern.is_output(sites[k]) ? 0 : r;
    }

    SiteCommitments coms;
    std::vector<crypto::Opening> dec_phi(count), dec_f(count);
    std::vector<Seed> r_f_a(count);
    for (std::size_t k = 0; k < count; ++k) {
        auto c = crypto::commit(angle_message(pattern.angle(sites[k])), coins);
        coms.phi.push_back(c.commitment);
        dec_phi[k] = c.dec;
        if (!ideal) {
            r_f_a[k] = coins.array<32>();
            auto cf = crypto::commit(ByteView(r_f_a[k]), coins);
            coms.f.push_back(cf.commitment);
            dec_f[k] = cf.dec;
        }
    }
    ep.send("q2pc.commit", encode_site_commitments(coms));
    for (std::size_t k = 0; k < count; ++k) {
        zk::send_proof(ep, zk.prove(Role::Alice, zk::opening_relation(), zk::opening_statement(coms.phi[k]),
                                    zk::opening_witness(dec_phi[k], angle_message(pattern.angle(sites[k])))));
    }

    if (!ideal) {
        const Bytes coin_payload = ep.recv_expect("q2pc.coin");
        const auto r_f_b = parse_or_abort("protocol", std::nullopt, "q2pc.coin",
                                          [&] { return decode_seed_list(coin_payload, count); });
        for (std::size_t k = 0; k < count; ++k) {
            const Seed r_f = xor_seeds(r_f_a[k], r_f_b[k]);
            const auto k1 = lattice::gen_from_seed(cfg.params, derive_key_seed(r_f, rsp8_tags()[0]));
            const auto k2 = lattice::gen_from_seed(cfg.params, derive_key_seed(r_f, rsp8_tags()[1]));
            ep.send("rsp.key", rsp::encode_keys({k1.pk, k2.pk}));
            const KeyStatement stmt{coms.f[k], r_f_b[k], rsp8_tags(), {k1.pk, k2.pk}};
            zk::send_proof(ep, zk.prove(Role::Alice, key_relation(), encode_key_statement(stmt),
                                        encode_key_witness(r_f_a[k], dec_f[k])));
            try {
                v.theta[k] = rsp::alice_rsp8(ep, k1, k2, false).theta;
            } catch (const PeerAbort &) {
                throw;
            } catch (const ProtocolAbort &a) {
                throw ProtocolAbort(a.phase(), sites[k], a.cause());
            }
        }
    }

    mbqc::OutcomeBoard board(pattern.n, pattern.m);
    for (std::size_t i = 0; i < pattern.n; ++i) {
        const Site s{i, 0};
        board.record(s, recv_bit(ep, "q2pc.outcome", s), 0);
    }
    for (std::size_t j = 1; j < pattern.m; ++j) {
        for (std::size_t i = 0; i < pattern.n; ++i) {
            const Site s{i, j};
            const std::size_t k = site_index(pattern, s);
            const auto c = mbqc::accumulate_dependencies(board, pattern, s);
            const Angle8 phi = pattern.angle(s);
            Angle8 delta = mbqc::compute_delta(mbqc::compute_phi_prime(phi, c.sx, c.sz), v.theta[k], v.r[k]);
            if (opts.tamper_delta_at && *opts.tamper_delta_at == s) delta += Angle8(1);
            v.deltas.push_back(delta);
            ByteWriter w;
            w.angle(delta).bit(c.sz).bit(c.sx);
            ep.send("q2pc.delta", std::move(w).data());
            const DeltaStatement stmt{s, delta, c.sz, c.sx, coms.phi[k]};
            zk::send_proof(ep, zk.prove(Role::Alice, delta_relation(), encode_delta_statement(stmt),
                                        encode_delta_witness(v.r[k], v.theta[k], phi, dec_phi[k])));
            board.record(s, recv_bit(ep, "q2pc.outcome", s), v.r[k]);
        }
    }
    v.output.resize(pattern.n);
    for (std::size_t i = 0; i < pattern.n; ++i) {
        const Site s{i, pattern.m};
        int mask = 0;
        for (const Site &d : pattern.dependencies(s).x) {
            if (d.col >= 1) mask ^= v.r[site_index(pattern, d)];
        }
        v.output[i] = static_cast<std::uint8_t>(recv_bit(ep, "q2pc.outcome", s) ^ mask);
    }
    return v;
}

Q2pcBobView q2pc_bob(Endpoint &ep, const RunConfig &cfg, const mbqc::Pattern &shape, const StateVector &input,
                     crypto::CoinSource &coins, qsim::OutcomeSource &outcomes) {
    shape.validate();
    require_dealer(cfg);
    auto &zk = require_zk(cfg);
    if (input.num_qubits() != shape.n) throw std::invalid_argument("input state must have one qubit per row");
    const auto sites = rsp_sites(shape);
    const std::size_t count = sites.size();
    const bool ideal = cfg.rsp_mode == RspMode::Ideal;

    const Bytes com_payload = ep.recv_expect("q2pc.commit");
    const auto coms = parse_or_abort("commit", std::nullopt, "q2pc.commit",
                                     [&] { return decode_site_commitments(com_payload, count, !ideal); });
    for (std::size_t k = 0; k < count; ++k) {
        if (!zk.verify(zk::opening_relation(), zk::opening_statement(coms.phi[k]), zk::recv_proof(ep))) {
            throw ProtocolAbort("zk", sites[k], "commitment proof rejected");
        }
    }

    std::vector<StateVector> held(count);
    if (ideal) {
        for (std::size_t k = 0; k < count; ++k) held[k] = cfg.dealer->take(k);
    } else {
        std::vector<Seed> r_f_b(count);
        for (auto &s : r_f_b) s = coins.array<32>();
        ep.send("q2pc.coin", encode_seed_list(r_f_b));
        auto ctx = bob_context(cfg, coins, outcomes);
        for (std::size_t k = 0; k < count; ++k) {
            auto keys = recv_keys(ep, 2, sites[k], cfg.params);
            const KeyStatement stmt{coms.f[k], r_f_b[k], rsp8_tags(), keys};
            if (!zk.verify(key_relation(), encode_key_statement(stmt), zk::recv_proof(ep))) {
                throw ProtocolAbort("zk", sites[k], "key proof rejected");
            }
            try {
                held[k] = rsp::bob_rsp8(ep, ctx, std::make_pair(std::move(keys[0]), std::move(keys[1])));
            } catch (const PeerAbort &) {
                throw;
            } catch (const ProtocolAbort &a) {
                throw ProtocolAbort(a.phase(), sites[k], a.cause());
            }
        }
    }

    Q2pcBobView v;
    const std::size_t n = shape.n;
    mbqc::OutcomeBoard board(n, shape.m);
    StateVector state = input;
    for (std::size_t j = 1; j <= shape.m; ++j) {
        // Column j-1 occupies qubits 0..n-1, column j qubits n..2n-1.
        for (std::size_t i = 0; i < n; ++i) state = state.tensor(held[site_index(shape, {i, j})]);
        for (std::size_t i = 0; i < n; ++i) state.cz(i, n + i);
        for (const auto &e : shape.vertical) {
            if (e.col == j) state.cz(n + e.row, n + e.row + 1);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const Site s{i, j - 1};
            Angle8 angle(0);
            if (s.col >= 1) {
                const Bytes payload = ep.recv_expect("q2pc.delta");
                DeltaStatement stmt = parse_or_abort("protocol", s, "q2pc.delta", [&] {
                    ByteReader r(payload);
                    DeltaStatement d;
                    d.delta = r.angle();
                    d.sz = r.bit();
                    d.sx = r.bit();
                    r.expect_end();
                    return d;
                });
                stmt.site = s;
                stmt.com = coms.phi[site_index(shape, s)];
                if (!zk.verify(delta_relation(), encode_delta_statement(stmt), zk::recv_proof(ep))) {
                    throw ProtocolAbort("zk", s, "delta proof rejected");
                }
                angle = stmt.delta;
            }
            const int outcome = qsim::measure_in_plane_inplace(state, 0, angle, outcomes);
            ++v.measurements;
            board.record(s, outcome, 0);
            send_bit(ep, "q2pc.outcome", outcome);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Site s{i, shape.m};
        if (mbqc::raw_x_dependency(board, shape, s)) state.x(0);
        const int outcome = qsim::measure_z_inplace(state, 0, outcomes);
        ++v.measurements;
        send_bit(ep, "q2pc.outcome", outcome);
    }
    return v;
}

// ----------------------------------------------------- output delivery ------

DeliveryKeys DeliveryKeys::generate(crypto::CoinSource &coins) {
    DeliveryKeys k;
    k.k1 = crypto::MacKey::generate(coins);
    k.k2 = crypto::SymKey::generate(coins);
    return k;
}

Bytes seal_output(const DeliveryKeys &keys, const SessionId &session, const Bits &y) {
    const Bytes stream = crypto::prg_stream(keys.k2, session, 0, y.size());
    Bytes out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = static_cast<std::uint8_t>(y[i] ^ stream[i]);
    const auto tag = crypto::mac_tag(keys.k1, out);
    out.insert(out.end(), tag.begin(), tag.end());
    return out;
}

std::optional<Bits> open_output(const DeliveryKeys &keys, const SessionId &session, ByteView enc) {
    crypto::MacTag tag{};
    if (enc.size() < tag.size()) return std::nullopt;
    const ByteView ct = enc.first(enc.size() - tag.size());
    std::copy(enc.end() - static_cast<std::ptrdiff_t>(tag.size()), enc.end(), tag.begin());
    if (!crypto::mac_verify(keys.k1, ct, tag)) return std::nullopt;
    return crypto::otp_decrypt(keys.k2, session, 0, ct);
}

Bits ToyFunction::evaluate(const Bits &x_a, const Bits &x_b) const {
    if (x_a.empty() && !x_b.empty()) throw std::invalid_argument("toy function needs Alice bits");
    Bits y(x_b.size());
    for (std::size_t i = 0; i < x_b.size(); ++i) y[i] = table[x_a[i % x_a.size()] & 1][x_b[i] & 1];
    return y;
}

void OutputFunctionality::bob_input(Bits x_b, DeliveryKeys keys) {
    std::lock_guard lock(mu_);
    bob_.emplace(std::move(x_b), keys);
    cv_.notify_all();
}

Bytes OutputFunctionality::alice_request(const Bits &x_a) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return bob_.has_value(); });
    return seal_output(bob_->second, session_, f_.evaluate(x_a, bob_->first));
}

DeliveryAliceView delivery_alice(Endpoint &ep, const RunConfig &cfg, const Bits &x_a, OutputFunctionality &func,
                                 crypto::CoinSource &coins, const DeliveryAliceOptions &opts) {
    DeliveryAliceView v;
    v.y_a = q2pc_alice(ep, cfg, mbqc::library::bit_flips(x_a), coins).output;
    v.enc_b = func.alice_request(x_a);
    if (opts.flip_ciphertext_bit) {
        const std::size_t bit = *opts.flip_ciphertext_bit;
        if (bit / 8 >= v.enc_b.size()) throw std::invalid_argument("flip position beyond Enc_B");
        v.enc_b[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    }
    ep.send("out.enc", v.enc_b);
    return v;
}

Bits delivery_bob(Endpoint &ep, const RunConfig &cfg, std::size_t input_bits, const StateVector &input,
                  const DeliveryKeys &keys, crypto::CoinSource &coins, qsim::OutcomeSource &outcomes) {
    const auto shape = public_shape(mbqc::library::bit_flips(Bits(input_bits, 0)));
    q2pc_bob(ep, cfg, shape, input, coins, outcomes);
    const Bytes enc = ep.recv_expect("out.enc");
    auto y = open_output(keys, ep.session(), enc);
    if (!y) throw ProtocolAbort("output", std::nullopt, "Enc_B failed authentication");
    return *y;
}

} // namespace q2pc::protocols
