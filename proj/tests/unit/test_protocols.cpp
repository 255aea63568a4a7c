#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "q2pc/protocols.hpp"
#include "q2pc/session.hpp"

using namespace q2pc;
using namespace q2pc::protocols;
using qsim::Bits;
using qsim::StateVector;

namespace {

std::vector<StateVector> oqfe_inputs() {
    return {StateVector::from_amplitudes({1, 0}), StateVector::from_amplitudes({0, 1}),
            StateVector::plus_state(), StateVector::plus_state(Angle8(2)), oracle::seeded_qubit(11)};
}

struct Ideal {
    rsp::IdealDealer dealer;
    zk::IdealZk zk{crypto::seed_from_u64(5)};
    RunConfig cfg;
    Ideal() {
        cfg.rsp_mode = RspMode::Ideal;
        cfg.dealer = &dealer;
        cfg.zk = &zk;
    }
};

// Exact law of s_b under fixed Alice coins, over Bob's measurement branches.
oracle::Law oqfe_sh_branch_law(const StateVector &psi, int b, rsp::FourStateAngles theta, int r_a) {
    oracle::Law law;
    const auto leaves = qsim::explore_branches<int>([&](qsim::OutcomeSource &src) {
        Ideal env;
        crypto::CoinSource ac(crypto::seed_from_u64(1), "a"), bc(crypto::seed_from_u64(1), "b");
        auto run = run_inproc<OqfeAliceView, OqfeBobView>(
            SessionId{}, [&](channel::Endpoint &ep) { return oqfe_alice(ep, env.cfg, b, ac, {theta, r_a}); },
            [&](channel::Endpoint &ep) { return oqfe_bob(ep, env.cfg, psi, bc, src); });
        EXPECT_TRUE(run.completed());
        return run.alice.value->s_b;
    });
    for (const auto &leaf : leaves) law[Bits{static_cast<std::uint8_t>(leaf.result)}] += leaf.probability;
    return law;
}

oracle::Law oqfe_sh_law(const StateVector &psi, int b) {
    oracle::Law law;
    for (int t1 = 0; t1 < 2; ++t1) {
        for (int t2 = 0; t2 < 2; ++t2) {
            for (int r = 0; r < 2; ++r) {
                const rsp::FourStateAngles theta{static_cast<std::uint8_t>(t1), static_cast<std::uint8_t>(t2)};
                for (const auto &[k, p] : oqfe_sh_branch_law(psi, b, theta, r)) law[k] += p / 8;
            }
        }
    }
    return law;
}

} // namespace

TEST(OqfeArithmetic, DeltaStaysOnQuarterTurns) {
    for (int b = 0; b < 2; ++b) {
        for (int t2 = 0; t2 < 2; ++t2) {
            for (int r = 0; r < 2; ++r) {
                const Angle8 d = oqfe_delta(b, t2, r);
                EXPECT_TRUE(d.is_even());
                EXPECT_EQ(d, Angle8(2 * b + 2 * t2 + 4 * r));
            }
        }
    }
}

TEST(OqfeSemiHonest, EveryCoinBranchMatchesTargetLaw) {
    for (const auto &psi : oqfe_inputs()) {
        for (int b = 0; b < 2; ++b) {
            const auto target = oracle::oqfe_target(psi, b);
            for (int t1 = 0; t1 < 2; ++t1) {
                for (int t2 = 0; t2 < 2; ++t2) {
                    for (int r = 0; r < 2; ++r) {
                        const rsp::FourStateAngles theta{static_cast<std::uint8_t>(t1), static_cast<std::uint8_t>(t2)};
                        EXPECT_LE(oracle::tv(oqfe_sh_branch_law(psi, b, theta, r), target), 1e-9)
                            << "b=" << b << " theta1=" << t1 << " theta2=" << t2 << " r=" << r;
                    }
                }
            }
        }
    }
}

TEST(OqfeSemiHonest, ZeroInputWithBitZeroAlwaysGivesZero) {
    const auto law = oqfe_sh_law(StateVector::from_amplitudes({1, 0}), 0);
    ASSERT_EQ(law.size(), 1u);
    EXPECT_NEAR(law.at(Bits{0}), 1.0, 1e-12);
}

TEST(OqfeSemiHonest, DeltaMarginalIndependentOfB) {
    for (int b = 0; b < 2; ++b) {
        std::map<int, int> counts;
        for (int t2 = 0; t2 < 2; ++t2) {
            for (int r = 0; r < 2; ++r) ++counts[oqfe_delta(b, t2, r).value()];
        }
        EXPECT_EQ(counts, (std::map<int, int>{{0, 1}, {2, 1}, {4, 1}, {6, 1}}));
    }
}

TEST(OqfeSemiHonest, RealRspRunDecodesAndKeepsM1Local) {
    zk::IdealZk zk(crypto::seed_from_u64(3));
    RunConfig cfg;
    cfg.zk = &zk;
    for (auto backend : {rsp::Backend::Quantum, rsp::Backend::Shortcut}) {
        cfg.backend = backend;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto seeds = SessionSeeds::from_u64(seed);
            auto ac = seeds.alice(), bc = seeds.bob(), mc = seeds.bob_measurements();
            qsim::SampledOutcomes outs(mc);
            // |1> with b = 0 is deterministic: s_b = 1.
            auto run = run_inproc<OqfeAliceView, OqfeBobView>(
                seeds.session(), [&](channel::Endpoint &ep) { return oqfe_alice(ep, cfg, 0, ac); },
                [&](channel::Endpoint &ep) {
                    return oqfe_bob(ep, cfg, StateVector::from_amplitudes({0, 1}), bc, outs);
                });
            ASSERT_TRUE(run.completed()) << run.alice.error << run.bob.error;
            EXPECT_EQ(run.alice.value->s_b, 1);
            std::vector<std::string> types;
            for (const auto &m : run.alice_transcript) types.push_back(m.type);
            EXPECT_EQ(types, (std::vector<std::string>{"rsp.key", "rsp.meas", "oqfe.delta", "oqfe.result"}));
            EXPECT_EQ(run.alice_transcript.back().payload.size(), 2u);
        }
    }
}

TEST(OqfeMalicious, HonestRunLawEqualsSemiHonest) {
    const auto psi = oracle::seeded_qubit(4);
    for (int b = 0; b < 2; ++b) {
        oracle::Law law;
        for (int t1 = 0; t1 < 2; ++t1) {
            for (int t2 = 0; t2 < 2; ++t2) {
                for (int r = 0; r < 2; ++r) {
                    const auto leaves = qsim::explore_branches<int>([&](qsim::OutcomeSource &src) {
                        Ideal env;
                        crypto::CoinSource ac(crypto::seed_from_u64(2), "a"), bc(crypto::seed_from_u64(2), "b");
                        MalAliceOptions opts;
                        opts.r_a = r;
                        opts.theta = rsp::FourStateAngles{static_cast<std::uint8_t>(t1), static_cast<std::uint8_t>(t2)};
                        auto run = run_inproc<MalAliceView, OqfeBobView>(
                            SessionId{}, [&](channel::Endpoint &ep) { return oqfe_mal_alice(ep, env.cfg, b, ac, opts); },
                            [&](channel::Endpoint &ep) { return oqfe_mal_bob(ep, env.cfg, psi, bc, src); });
                        EXPECT_TRUE(run.completed());
                        return run.alice.value->oqfe.s_b;
                    });
                    for (const auto &leaf : leaves) law[Bits{static_cast<std::uint8_t>(leaf.result)}] += leaf.probability / 8;
                }
            }
        }
        EXPECT_LE(oracle::tv(law, oqfe_sh_law(psi, b)), 1e-12);
    }
}

namespace {

struct MalRun {
    TwoPartyRun<MalAliceView, OqfeBobView> run;
    Extraction extraction;
};

MalRun real_mal_run(std::uint64_t seed, int b, MalAliceOptions aopts, MalBobOptions bopts = {}) {
    const auto seeds = SessionSeeds::from_u64(seed);
    zk::IdealZk zk(seeds.zk_key());
    RunConfig cfg;
    cfg.zk = &zk;
    cfg.backend = rsp::Backend::Shortcut;
    auto ac = seeds.alice(), bc = seeds.bob(), mc = seeds.bob_measurements();
    qsim::SampledOutcomes outs(mc);
    MalRun r;
    r.run = run_inproc<MalAliceView, OqfeBobView>(
        seeds.session(), [&](channel::Endpoint &ep) { return oqfe_mal_alice(ep, cfg, b, ac, aopts); },
        [&](channel::Endpoint &ep) {
            return oqfe_mal_bob(ep, cfg, StateVector::plus_state(), bc, outs, bopts);
        });
    r.extraction = extract_alice_input(r.run.bob_transcript, cfg);
    return r;
}

} // namespace

TEST(OqfeMalicious, ExtractorRecoversBForHonestAndBiasedMasks) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const int b = static_cast<int>(seed % 2);
        MalAliceOptions opts;
        if (seed % 3 == 0) opts.r_a = 1;
        const auto r = real_mal_run(seed, b, opts);
        ASSERT_TRUE(r.run.completed()) << r.run.alice.error << r.run.bob.error;
        ASSERT_EQ(r.extraction.kind, Extraction::Kind::Extracted) << r.extraction.reason;
        EXPECT_EQ(r.extraction.b_star, b);
    }
}

TEST(OqfeMalicious, CheatingAlicesAreAborted) {
    for (auto s : {AliceStrategy::BadKey, AliceStrategy::InconsistentCommitment}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            MalAliceOptions opts;
            opts.strategy = s;
            const auto r = real_mal_run(seed, 1, opts);
            ASSERT_FALSE(r.run.bob.ok());
            ASSERT_TRUE(r.run.bob.abort.has_value());
            EXPECT_EQ(r.run.bob.abort->phase(), "zk");
            ASSERT_TRUE(r.run.alice.abort.has_value());
            EXPECT_EQ(r.extraction.kind, Extraction::Kind::Aborted);
            for (const auto &m : r.run.bob_transcript) EXPECT_NE(m.type, "rsp.meas");
        }
    }
}

TEST(OqfeMalicious, BobCoinTamperIsCaughtByKeyProof) {
    MalBobOptions bopts;
    bopts.flip_coin_after_send = true;
    const auto r = real_mal_run(9, 0, {}, bopts);
    ASSERT_TRUE(r.run.bob.abort.has_value());
    EXPECT_EQ(r.run.bob.abort->cause(), "key proof rejected");
}

TEST(KeyRelation, RejectsForeignShareAndWrongKey) {
    crypto::CoinSource coins(crypto::seed_from_u64(8), "t");
    const Seed a = coins.array<32>(), b = coins.array<32>();
    const auto com = crypto::commit(ByteView(a), coins);
    const auto params = lattice::profile_params("tiny");
    const auto kp = lattice::gen_from_seed(params, derive_key_seed(xor_seeds(a, b), "x"));
    const auto rel = key_relation();
    const KeyStatement stmt{com.commitment, b, {"x"}, {kp.pk}};
    EXPECT_TRUE(rel.holds(encode_key_statement(stmt), encode_key_witness(a, com.dec)));
    EXPECT_FALSE(rel.holds(encode_key_statement(stmt), encode_key_witness(b, com.dec)));
    KeyStatement other = stmt;
    other.tags = {"y"};
    EXPECT_FALSE(rel.holds(encode_key_statement(other), encode_key_witness(a, com.dec)));
    EXPECT_EQ(decode_key_statement(encode_key_statement(stmt)).keys[0], kp.pk);
}

// ---------------------------------------------------------------- Q2PC ------

namespace {

oracle::Law q2pc_branch_law(const mbqc::Pattern &p, const StateVector &input, const std::vector<Angle8> &theta,
                            const std::vector<int> &r) {
    oracle::Law law;
    const auto shape = public_shape(p);
    const auto leaves = qsim::explore_branches<Bits>([&](qsim::OutcomeSource &src) {
        Ideal env;
        crypto::CoinSource ac(crypto::seed_from_u64(1), "a"), bc(crypto::seed_from_u64(1), "b");
        Q2pcAliceOptions opts;
        opts.theta = theta;
        opts.r = r;
        auto run = run_inproc<Q2pcAliceView, Q2pcBobView>(
            SessionId{}, [&](channel::Endpoint &ep) { return q2pc_alice(ep, env.cfg, p, ac, opts); },
            [&](channel::Endpoint &ep) { return q2pc_bob(ep, env.cfg, shape, input, bc, src); });
        EXPECT_TRUE(run.completed()) << run.alice.error << run.bob.error;
        return run.alice.value ? run.alice.value->output : Bits{};
    });
    for (const auto &leaf : leaves) law[leaf.result] += leaf.probability;
    return law;
}

} // namespace

TEST(Q2pc, LibraryPatternsMatchCircuitOracleUnderSampledMasks) {
    crypto::CoinSource coins(crypto::seed_from_u64(21), "test.q2pc");
    for (const auto &name : mbqc::library_names()) {
        const auto p = mbqc::library_pattern(name);
        StateVector input = oracle::seeded_qubit(3);
        for (std::size_t i = 1; i < p.n; ++i) input = input.tensor(oracle::seeded_qubit(4 + static_cast<unsigned>(i)));
        const auto target = oracle::pattern_circuit(p, input);
        const std::size_t sites = rsp_sites(p).size();
        for (int trial = 0; trial < 3; ++trial) {
            std::vector<Angle8> theta(sites);
            std::vector<int> r(sites);
            for (auto &t : theta) t = Angle8(static_cast<int>(coins.uniform_below(8)));
            for (auto &x : r) x = coins.bit();
            EXPECT_LE(oracle::tv(q2pc_branch_law(p, input, theta, r), target), 1e-9) << name;
        }
    }
}

TEST(Q2pc, IdentityOnOneIsDeterministic) {
    const auto law = q2pc_branch_law(mbqc::library::identity(), StateVector::from_amplitudes({0, 1}),
                                     {Angle8(3), Angle8(6)}, {1, 0});
    ASSERT_EQ(law.size(), 1u);
    EXPECT_NEAR(law.at(Bits{1}), 1.0, 1e-12);
}

TEST(Q2pc, RxTeleportReproducesOqfe) {
    const auto psi = oracle::seeded_qubit(6);
    for (int b = 0; b < 2; ++b) {
        // phi = b pi/2 enters the pattern as -b pi/2 rotation about X.
        const auto law = q2pc_branch_law(mbqc::library::rx_teleport(Angle8(2 * b)), psi, {Angle8(5), Angle8(1)}, {1, 0});
        EXPECT_LE(oracle::tv(law, oqfe_sh_law(psi, b)), 1e-9) << b;
    }
}

TEST(Q2pc, TamperedDeltaAbortsBeforeMeasuring) {
    Ideal env;
    const auto p = mbqc::library::brick({{Angle8(1), Angle8(2), Angle8(0)}, {Angle8(3), Angle8(0), Angle8(6)}});
    const Site target{1, 2};
    crypto::CoinSource ac(crypto::seed_from_u64(1), "a"), bc(crypto::seed_from_u64(1), "b"), mc(crypto::seed_from_u64(1), "m");
    qsim::SampledOutcomes outs(mc);
    Q2pcAliceOptions opts;
    opts.tamper_delta_at = target;
    auto run = run_inproc<Q2pcAliceView, Q2pcBobView>(
        SessionId{}, [&](channel::Endpoint &ep) { return q2pc_alice(ep, env.cfg, p, ac, opts); },
        [&](channel::Endpoint &ep) {
            return q2pc_bob(ep, env.cfg, public_shape(p), StateVector::plus_state().tensor(StateVector::plus_state()), bc, outs);
        });
    ASSERT_TRUE(run.bob.abort.has_value());
    EXPECT_EQ(run.bob.abort->phase(), "zk");
    ASSERT_TRUE(run.bob.abort->site().has_value());
    EXPECT_EQ(*run.bob.abort->site(), target);
    ASSERT_TRUE(run.alice.abort.has_value());
    // Outcomes sent: column 0, column 1, and (0, 2); nothing after the rejected delta.
    std::size_t outcomes_after_reject = 0, outcomes = 0;
    bool rejected_seen = false;
    std::size_t deltas = 0;
    for (const auto &m : run.bob_transcript) {
        if (m.type == "q2pc.delta") ++deltas;
        if (deltas == 4) rejected_seen = true;
        if (m.type == "q2pc.outcome") (rejected_seen ? outcomes_after_reject : outcomes)++;
    }
    EXPECT_EQ(outcomes, 5u);
    EXPECT_EQ(outcomes_after_reject, 0u);
}

TEST(Q2pc, RealRspRunOnTinyProfile) {
    const auto seeds = SessionSeeds::from_u64(4);
    zk::IdealZk zk(seeds.zk_key());
    RunConfig cfg;
    cfg.zk = &zk;
    const auto p = mbqc::library::identity();
    auto ac = seeds.alice(), bc = seeds.bob(), mc = seeds.bob_measurements();
    qsim::SampledOutcomes outs(mc);
    auto run = run_inproc<Q2pcAliceView, Q2pcBobView>(
        seeds.session(), [&](channel::Endpoint &ep) { return q2pc_alice(ep, cfg, p, ac); },
        [&](channel::Endpoint &ep) { return q2pc_bob(ep, cfg, public_shape(p), StateVector::from_amplitudes({0, 1}), bc, outs); });
    ASSERT_TRUE(run.completed()) << run.alice.error << run.bob.error;
    EXPECT_EQ(run.alice.value->output, Bits{1});
    const auto merges = std::count_if(run.alice_transcript.begin(), run.alice_transcript.end(),
                                      [](const channel::Message &m) { return m.type == "rsp.merge"; });
    EXPECT_EQ(static_cast<std::size_t>(merges), p.n * p.m);
    EXPECT_EQ(run.alice_transcript, run.bob_transcript);
}

TEST(DeltaRelation, BindsCommittedAngle) {
    crypto::CoinSource coins(crypto::seed_from_u64(2), "t");
    const auto com = crypto::commit(angle_message(Angle8(3)), coins);
    const auto rel = delta_relation();
    const Angle8 delta = mbqc::compute_delta(mbqc::compute_phi_prime(Angle8(3), 1, 0), Angle8(5), 1);
    const DeltaStatement stmt{{0, 1}, delta, 0, 1, com.commitment};
    EXPECT_TRUE(rel.holds(encode_delta_statement(stmt), encode_delta_witness(1, Angle8(5), Angle8(3), com.dec)));
    EXPECT_FALSE(rel.holds(encode_delta_statement(stmt), encode_delta_witness(1, Angle8(5), Angle8(4), com.dec)));
    DeltaStatement shifted = stmt;
    shifted.delta += Angle8(1);
    EXPECT_FALSE(rel.holds(encode_delta_statement(shifted), encode_delta_witness(1, Angle8(5), Angle8(3), com.dec)));
}

// ----------------------------------------------------- output delivery ------

namespace {

struct DeliveryRun {
    TwoPartyRun<DeliveryAliceView, Bits> run;
    Bits expected_y_b;
};

DeliveryRun delivery_run(std::uint64_t seed, const Bits &x_a, const Bits &x_b, DeliveryAliceOptions aopts = {}) {
    const auto seeds = SessionSeeds::from_u64(seed);
    Ideal env;
    ToyFunction f;
    OutputFunctionality func(f, seeds.session());
    auto ac = seeds.alice(), bc = seeds.bob(), mc = seeds.bob_measurements();
    qsim::SampledOutcomes outs(mc);
    const auto keys = DeliveryKeys::generate(bc);
    func.bob_input(x_b, keys);
    StateVector input = StateVector::from_amplitudes({1, 0});
    for (std::size_t i = 1; i < x_a.size(); ++i) input = input.tensor(StateVector::from_amplitudes({1, 0}));
    DeliveryRun r;
    r.expected_y_b = f.evaluate(x_a, x_b);
    r.run = run_inproc<DeliveryAliceView, Bits>(
        seeds.session(), [&](channel::Endpoint &ep) { return delivery_alice(ep, env.cfg, x_a, func, ac, aopts); },
        [&](channel::Endpoint &ep) { return delivery_bob(ep, env.cfg, x_a.size(), input, keys, bc, outs); });
    return r;
}

} // namespace

TEST(OutputDelivery, HonestRunDeliversBothOutputs) {
    const Bits x_a{1, 0, 1}, x_b{1, 1, 0, 1};
    const auto r = delivery_run(3, x_a, x_b);
    ASSERT_TRUE(r.run.completed()) << r.run.alice.error << r.run.bob.error;
    EXPECT_EQ(r.run.alice.value->y_a, x_a);  // X^{x_A} on |0...0>
    EXPECT_EQ(*r.run.bob.value, r.expected_y_b);
    EXPECT_EQ(r.expected_y_b, (Bits{1, 0, 0, 1}));
}

TEST(OutputDelivery, FlippedCiphertextBitIsRejected) {
    DeliveryAliceOptions opts;
    opts.flip_ciphertext_bit = 3;
    const auto r = delivery_run(3, {1, 1}, {1, 0}, opts);
    ASSERT_TRUE(r.run.alice.ok());
    ASSERT_TRUE(r.run.bob.abort.has_value());
    EXPECT_EQ(r.run.bob.abort->phase(), "output");
}

TEST(OutputDelivery, EmptyOutputSealsToTagOnly) {
    crypto::CoinSource coins(crypto::seed_from_u64(1), "t");
    const auto keys = DeliveryKeys::generate(coins);
    const Bytes enc = seal_output(keys, SessionId{}, {});
    EXPECT_EQ(enc.size(), crypto::MacTag{}.size());
    const auto y = open_output(keys, SessionId{}, enc);
    ASSERT_TRUE(y.has_value());
    EXPECT_TRUE(y->empty());
    const auto r = delivery_run(5, {1}, {});
    ASSERT_TRUE(r.run.completed());
    EXPECT_TRUE(r.run.bob.value->empty());
}
