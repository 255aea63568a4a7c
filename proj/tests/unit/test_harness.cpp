#include <gtest/gtest.h>

#include <cstdlib>

#include "oracles.hpp"
#include "q2pc/harness.hpp"

using namespace q2pc;
using namespace q2pc::harness;
using qsim::Bits;
using qsim::StateVector;

namespace {

const lattice::LatticeParams &tiny() {
    static const auto params = lattice::profile_params("tiny");
    return params;
}

AliceKey key_for(std::uint64_t seed) {
    crypto::CoinSource coins(crypto::seed_from_u64(seed), "test.key");
    return sample_alice_key(tiny(), coins);
}

/// Key and image table shared by the tests that need a full enumeration.
struct Enumerated {
    AliceKey key;
    ImageTable images;
    explicit Enumerated(std::uint64_t seed) : key(key_for(seed)), images(key.kp) {}
};

const Enumerated &enumerated() {
    static const Enumerated e(3);
    return e;
}

} // namespace

TEST(Tv, ReferenceValues) {
    const Law uniform{{"a", 0.5}, {"b", 0.5}};
    EXPECT_DOUBLE_EQ(tv_distance(uniform, uniform), 0.0);
    EXPECT_DOUBLE_EQ(tv_distance(Law{{"a", 1.0}}, Law{{"b", 1.0}}), 1.0);
    EXPECT_NEAR(tv_distance(Law{{"a", 0.75}, {"b", 0.25}}, uniform), 0.25, 1e-15);
}

TEST(Tv, RejectsNonLaws) {
    EXPECT_THROW(tv_distance(Law{{"a", 0.5}}, Law{{"a", 1.0}}), std::invalid_argument);
    EXPECT_THROW(tv_distance(Law{{"a", 1.5}, {"b", -0.5}}, Law{{"a", 1.0}}), std::invalid_argument);
}

TEST(Tv, EmpiricalLaw) {
    const Law law = empirical_law({"x", "y", "x", "x"});
    EXPECT_DOUBLE_EQ(law.at("x"), 0.75);
    EXPECT_DOUBLE_EQ(law.at("y"), 0.25);
}

TEST(IdealLaw, MatchesCircuitOracle) {
    for (const auto &name : input_names()) {
        const StateVector psi = named_input(name, 4);
        for (int b = 0; b < 2; ++b) {
            const auto target = oracle::oqfe_target(psi, b);
            const Law law = ideal_oqfe_law(psi, b);
            for (int s = 0; s < 2; ++s) {
                const auto it = target.find(Bits{static_cast<std::uint8_t>(s)});
                const double want = it == target.end() ? 0.0 : it->second;
                const auto got = law.count(std::to_string(s)) ? law.at(std::to_string(s)) : 0.0;
                EXPECT_NEAR(got, want, 1e-12) << name << " b=" << b;
            }
        }
    }
}

TEST(Inputs, RandomInputIsSeeded) {
    const auto a = named_input("random", 9), b = named_input("random", 9), c = named_input("random", 10);
    EXPECT_EQ(a.amplitudes()[0], b.amplitudes()[0]);
    EXPECT_NE(a.amplitudes()[0], c.amplitudes()[0]);
    EXPECT_THROW(named_input("minus", 1), std::invalid_argument);
}

TEST(Profiles, NamesAndDefault) {
    EXPECT_TRUE(profile("tiny").enumeration_allowed);
    EXPECT_FALSE(profile("small").enumeration_allowed);
    EXPECT_THROW(profile("huge"), std::invalid_argument);
    ::setenv("Q2PC_PROFILE", "small", 1);
    EXPECT_EQ(default_profile_name(), "small");
    ::unsetenv("Q2PC_PROFILE");
    EXPECT_EQ(default_profile_name(), "tiny");
}

TEST(WorkerPool, KeepsOrderAndRethrows) {
    const auto out = run_trials<std::size_t>(100, 4, [](std::size_t i) { return i * i; });
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], i * i);
    EXPECT_THROW(run_trials<int>(10, 3,
                                 [](std::size_t i) -> int {
                                     if (i == 7) throw std::runtime_error("x");
                                     return 0;
                                 }),
                 std::runtime_error);
}

TEST(Extractor, TotalOnHonestDeltas) { EXPECT_TRUE(extractor_totality()); }

TEST(ImageTable, PairsAreTwoPreimagesWithOppositeC) {
    const auto &e = enumerated();
    ASSERT_GT(e.images.pair_count(), 0u);
    EXPECT_EQ(e.images.pair_count() + e.images.irregular_count(), e.images.image_size());
    crypto::CoinSource coins(crypto::seed_from_u64(1), "test.pick");
    for (int k = 0; k < 200; ++k) {
        const auto i = coins.uniform_below(e.images.pair_count());
        const auto pair = e.images.pair(i);
        EXPECT_EQ(pair.x.c, 0);
        EXPECT_EQ(pair.x_prime.c, 1);
        EXPECT_EQ(lattice::eval_f(e.key.kp.pk, pair.x), e.images.pair_image(i));
        EXPECT_EQ(lattice::eval_f(e.key.kp.pk, pair.x_prime), e.images.pair_image(i));
        const auto all = lattice::invert_all(e.key.kp, e.images.pair_image(i));
        EXPECT_EQ(all.size(), 2u);
    }
}

TEST(Simulator, CorrectedMatchesRealExactly) {
    const auto &e = enumerated();
    for (const auto &name : {"zero", "plus", "random"}) {
        const StateVector psi = named_input(name, 2);
        for (int b = 0; b < 2; ++b) {
            const ViewLaws laws = exact_view_laws(e.key.kp, e.images, b, psi);
            EXPECT_LT(tv_distance(laws.real, laws.corrected), 1e-12) << name << " b=" << b;
        }
    }
}

TEST(Simulator, LiteralDiffersWhenBIsZero) {
    const auto &e = enumerated();
    const ViewLaws laws = exact_view_laws(e.key.kp, e.images, 0, named_input("zero", 0));
    EXPECT_GT(tv_distance(laws.real, laws.literal), 0.1);
}

TEST(Simulator, DecodeIdentityHoldsForBothVariants) {
    crypto::CoinSource coins(crypto::seed_from_u64(8), "test.sim");
    const AliceKey key = key_for(5);
    for (auto variant : {SimulatorVariant::Literal, SimulatorVariant::Corrected}) {
        for (int i = 0; i < 40; ++i) {
            const int s_b = coins.bit();
            const auto v = simulate_semi_honest_alice(1, s_b, key, coins, variant);
            EXPECT_EQ(v.s_bar ^ v.theta1 ^ v.r_a ^ v.m0, s_b);
            EXPECT_EQ(v.w.size(), tiny().preimage_width());
            if (variant == SimulatorVariant::Corrected) EXPECT_FALSE(v.inversion_failed);
        }
    }
}

TEST(Simulator, CorrectedBZeroCarriesTheOutput) {
    crypto::CoinSource coins(crypto::seed_from_u64(12), "test.sim0");
    const AliceKey key = key_for(6);
    for (int i = 0; i < 40; ++i) {
        const int s_b = coins.bit();
        const auto v = simulate_semi_honest_alice(0, s_b, key, coins, SimulatorVariant::Corrected);
        EXPECT_EQ(v.s_bar ^ v.theta1 ^ v.r_a, s_b);
    }
}

TEST(Simulator, SampledKeyVariantIsDeterministic) {
    crypto::CoinSource a(crypto::seed_from_u64(2), "s"), b(crypto::seed_from_u64(2), "s");
    const auto va = simulate_semi_honest_alice(1, 0, tiny(), a, SimulatorVariant::Corrected);
    const auto vb = simulate_semi_honest_alice(1, 0, tiny(), b, SimulatorVariant::Corrected);
    EXPECT_EQ(va.key(), vb.key());
}

TEST(Backends, RegisterLawsMatchTwoTermOracle) {
    for (std::uint64_t seed : {1, 2, 3, 4}) {
        const AliceKey key = key_for(seed);
        crypto::CoinSource coins(crypto::seed_from_u64(seed), "test.collapse");
        const auto img = rsp::collapse(key.kp.pk, coins);
        const RegisterLaws laws = register_outcome_laws(key.kp.pk, img);
        const std::size_t width = tiny().preimage_width();
        ASSERT_EQ(laws.quantum.size(), std::size_t{1} << width);

        const Bits ex = lattice::encode(tiny(), img.pair.x), exp = lattice::encode(tiny(), img.pair.x_prime);
        std::uint64_t diff = 0;
        for (std::size_t i = 0; i < width; ++i) diff |= std::uint64_t(ex[i] ^ exp[i]) << i;
        const bool same_hardcore = lattice::hardcore(img.pair.x) == lattice::hardcore(img.pair.x_prime);
        const double unit = 1.0 / static_cast<double>(laws.quantum.size());
        double worst = 0.0;
        for (std::size_t w = 0; w < laws.quantum.size(); ++w) {
            const int parity = __builtin_popcountll(w & diff) & 1;
            const double want = same_hardcore ? unit * (parity ? 0.0 : 2.0) : unit;
            worst = std::max({worst, std::abs(laws.quantum[w] - want), std::abs(laws.shortcut[w] - want)});
        }
        EXPECT_LT(worst, 1e-12) << "seed " << seed;
    }
}

TEST(Experiments, DeltaExactIsZeroAndMaskMatters) {
    ExperimentOptions opts;
    const auto r = delta_uniformity_experiment(opts);
    EXPECT_TRUE(r.pass);
    EXPECT_LT(r.value, 1e-12);
    EXPECT_NEAR(r.metrics.at("tv.mask_forced_zero"), 0.5, 1e-12);
    EXPECT_EQ(r.frequencies.size(), 8u);
}

TEST(Experiments, ReportIndependentOfWorkerCount) {
    ExperimentOptions opts;
    opts.method = Method::Sampling;
    opts.trials = 300;
    opts.seed = 17;
    opts.workers = 1;
    const auto one = delta_uniformity_experiment(opts).to_json();
    opts.workers = 3;
    const auto three = delta_uniformity_experiment(opts).to_json();
    EXPECT_EQ(one, three);
    opts.seed = 18;
    EXPECT_NE(delta_uniformity_experiment(opts).to_json(), one);
}

TEST(Experiments, ReportCarriesAsymptoticAndScope) {
    ExperimentOptions opts;
    const auto r = run_experiment("delta-uniformity", opts);
    const auto json = r.to_json();
    for (const char *field : {"\"asymptotic\"", "\"scope\"", "\"statistic\"", "\"threshold\"", "\"pass\""})
        EXPECT_NE(json.find(field), std::string::npos) << field;
    EXPECT_THROW(run_experiment("nope", opts), std::invalid_argument);
}

TEST(Experiments, ExtractorSmallRun) {
    ExperimentOptions opts;
    opts.trials = 6;
    const auto r = extractor_experiment(opts);
    EXPECT_TRUE(r.pass) << r.to_json();
    EXPECT_EQ(r.counts.at("cheat.silent_wrong"), 0u);
}
