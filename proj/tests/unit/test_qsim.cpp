#include <gtest/gtest.h>

#include <cmath>

#include "q2pc/qsim.hpp"

using namespace q2pc;
using namespace q2pc::qsim;

namespace {

const double kS = 1.0 / std::sqrt(2.0);

StateVector random_state(std::size_t n, std::uint64_t seed) {
    crypto::CoinSource coins(crypto::seed_from_u64(seed), "state");
    std::vector<Complex> a(std::size_t{1} << n);
    double norm = 0;
    for (auto &x : a) {
        x = {coins.uniform01() - 0.5, coins.uniform01() - 0.5};
        norm += std::norm(x);
    }
    for (auto &x : a) x /= std::sqrt(norm);
    return StateVector::from_amplitudes(a);
}

// 2x2 matrix application on a dense vector, independent of StateVector.
std::vector<Complex> apply_1q(std::vector<Complex> v, std::size_t q, const Complex (&m)[2][2]) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i >> q & 1) continue;
        const std::size_t j = i | (std::size_t{1} << q);
        const Complex a = v[i], b = v[j];
        v[i] = m[0][0] * a + m[0][1] * b;
        v[j] = m[1][0] * a + m[1][1] * b;
    }
    return v;
}

} // namespace

TEST(Angle8, WrapsModEight) {
    EXPECT_EQ(Angle8(9).value(), 1);
    EXPECT_EQ(Angle8(-1).value(), 7);
    EXPECT_EQ((Angle8(6) + Angle8(5)).value(), 3);
    EXPECT_EQ((-Angle8(2)).value(), 6);
    EXPECT_TRUE(Angle8(4).is_even());
    for (int a = 0; a < 8; ++a) {
        EXPECT_NEAR(std::abs(Angle8(a).phase() - std::polar(1.0, a * M_PI / 4)), 0.0, 1e-15);
    }
}

TEST(StateVector, HadamardOnZero) {
    auto s = apply_gate(StateVector(1), Gate::H(), {0});
    EXPECT_NEAR(s.amplitude(0).real(), kS, 1e-15);
    EXPECT_NEAR(s.amplitude(1).real(), kS, 1e-15);
}

TEST(StateVector, CzOnOneOne) {
    auto s = apply_gate(apply_gate(StateVector(2), Gate::X(), {0}), Gate::X(), {1});
    s = apply_gate(s, Gate::CZ(), {0, 1});
    EXPECT_NEAR(s.amplitude(3).real(), -1.0, 1e-15);
}

TEST(StateVector, RzTwoGivesPlusHalfPi) {
    auto s = apply_gate(StateVector::plus_state(), Gate::Rz(Angle8(2)), {0});
    EXPECT_NEAR(std::abs(s.amplitude(1) - Complex(0, kS)), 0.0, 1e-15);
    EXPECT_NEAR(fidelity(s, StateVector::plus_state(Angle8(2))), 1.0, 1e-12);
}

TEST(StateVector, GateErrors) {
    EXPECT_THROW(apply_gate(StateVector(1), Gate::H(), {1}), std::out_of_range);
    EXPECT_THROW(apply_gate(StateVector(2), Gate::CZ(), {0}), std::invalid_argument);
    EXPECT_THROW(apply_gate(StateVector(2), Gate::CZ(), {1, 1}), std::invalid_argument);
    EXPECT_THROW(apply_gate(StateVector(2), Gate::H(), {0, 1}), std::invalid_argument);
    EXPECT_THROW(StateVector(25), std::invalid_argument);
    EXPECT_THROW(StateVector::from_amplitudes({1.0, 1.0}), std::invalid_argument);
    EXPECT_THROW(StateVector::from_amplitudes({1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST(StateVector, GatesMatchMatrixOracleAndPreserveNorm) {
    const Complex h[2][2] = {{kS, kS}, {kS, -kS}};
    for (int a = 0; a < 8; ++a) {
        const Complex rz[2][2] = {{1, 0}, {0, Angle8(a).phase()}};
        auto s = random_state(4, 100 + a);
        std::vector<Complex> v(s.amplitudes().begin(), s.amplitudes().end());
        s.rz(2, Angle8(a));
        s.h(1);
        v = apply_1q(apply_1q(v, 2, rz), 1, h);
        for (std::size_t i = 0; i < v.size(); ++i) ASSERT_NEAR(std::abs(s.amplitude(i) - v[i]), 0.0, 1e-12);
        EXPECT_NEAR(s.norm_squared(), 1.0, 1e-9);
    }
}

TEST(StateVector, RxEqualsHRzH) {
    for (int a = 0; a < 8; ++a) {
        auto s = random_state(2, 7);
        auto rx = apply_gate(s, Gate::Rx(Angle8(a)), {1});
        auto hrzh = apply_gate(apply_gate(apply_gate(s, Gate::H(), {1}), Gate::Rz(Angle8(a)), {1}), Gate::H(), {1});
        const std::vector<PlanStep> plan = {{0, std::nullopt}, {1, std::nullopt}};
        const auto b1 = enumerate_branches(rx, plan), b2 = enumerate_branches(hrzh, plan);
        for (std::size_t i = 0; i < b1.size(); ++i) EXPECT_NEAR(b1[i].probability, b2[i].probability, 1e-12);
    }
}

TEST(Measure, OneIsDeterministic) {
    crypto::CoinSource coins(crypto::seed_from_u64(1), "m");
    auto r = measure_z(apply_gate(StateVector(1), Gate::X(), {0}), 0, coins);
    EXPECT_EQ(r.outcome, 1);
    EXPECT_EQ(r.post_state.num_qubits(), 0u);
}

TEST(Measure, ProductStateLeavesZero) {
    crypto::CoinSource coins(crypto::seed_from_u64(2), "m");
    auto s = StateVector::plus_state().tensor(StateVector(1));
    int ones = 0;
    for (int t = 0; t < 1000; ++t) {
        auto r = measure_z(s, 0, coins);
        ones += r.outcome;
        ASSERT_NEAR(std::norm(r.post_state.amplitude(0)), 1.0, 1e-12);
    }
    EXPECT_NEAR(ones / 1000.0, 0.5, 0.06);
}

TEST(Measure, InPlaneEigenstates) {
    crypto::CoinSource coins(crypto::seed_from_u64(3), "m");
    for (int d = 0; d < 8; ++d) {
        EXPECT_EQ(measure_in_plane(StateVector::plus_state(Angle8(d)), 0, Angle8(d), coins).outcome, 0);
    }
    EXPECT_EQ(measure_in_plane(StateVector::plus_state(), 0, Angle8(4), coins).outcome, 1);
    const std::vector<PlanStep> plan = {{0, Angle8(0)}};
    EXPECT_NEAR(enumerate_branches(StateVector::plus_state(Angle8(2)), plan)[0].probability, 0.5, 1e-12);
}

TEST(Measure, RotatedBasisEquivalence) {
    for (int a = 0; a < 8; ++a) {
        auto s = random_state(3, 40 + a);
        const std::vector<PlanStep> in_plane = {{1, Angle8(a)}};
        auto rotated = apply_gate(apply_gate(s, Gate::Rz(-Angle8(a)), {1}), Gate::H(), {1});
        const std::vector<PlanStep> z = {{1, std::nullopt}};
        const auto b1 = enumerate_branches(s, in_plane), b2 = enumerate_branches(rotated, z);
        for (int o = 0; o < 2; ++o) {
            EXPECT_NEAR(b1[o].probability, b2[o].probability, 1e-12);
            EXPECT_NEAR(overlap(b1[o].residual, b2[o].residual), 1.0, 1e-9);
        }
    }
}


TEST(Enumerate, ZeroStateHasFlaggedBranch) {
    const std::vector<PlanStep> plan = {{0, std::nullopt}};
    const auto br = enumerate_branches(StateVector(1), plan);
    ASSERT_EQ(br.size(), 2u);
    EXPECT_NEAR(br[0].probability, 1.0, 1e-15);
    EXPECT_FALSE(br[0].impossible);
    EXPECT_TRUE(br[1].impossible);
    EXPECT_EQ(br[1].outcomes, (Bits{1}));
}

TEST(Enumerate, BellCorrelations) {
    auto s = StateVector(2);
    s.h(0);
    s.h(1);
    s.cz(0, 1);
    s.h(1);
    const std::vector<PlanStep> plan = {{0, std::nullopt}, {1, std::nullopt}};
    const auto br = enumerate_branches(s, plan);
    ASSERT_EQ(br.size(), 4u);
    EXPECT_NEAR(br[0].probability, 0.5, 1e-12);
    EXPECT_NEAR(br[1].probability, 0.0, 1e-12);
    EXPECT_NEAR(br[2].probability, 0.0, 1e-12);
    EXPECT_NEAR(br[3].probability, 0.5, 1e-12);
}

TEST(Enumerate, BornConsistencyWithSampling) {
    auto s = random_state(3, 77);
    s.cz(0, 2);
    const std::vector<PlanStep> plan = {{2, Angle8(3)}, {0, std::nullopt}, {1, Angle8(6)}};
    const auto br = enumerate_branches(s, plan);
    double total = 0;
    for (const auto &b : br) total += b.probability;
    EXPECT_NEAR(total, 1.0, 1e-9);

    constexpr int kN = 10000;
    std::vector<int> counts(8, 0);
    crypto::CoinSource coins(crypto::seed_from_u64(5), "born");
    for (int t = 0; t < kN; ++t) {
        auto st = s;
        SampledOutcomes src(coins);
        // Plan indices refer to the original qubits; removing qubit 2 then 0 leaves qubit 1 at index 0.
        const int o0 = measure_in_plane_inplace(st, 2, Angle8(3), src);
        const int o1 = measure_z_inplace(st, 0, src);
        const int o2 = measure_in_plane_inplace(st, 0, Angle8(6), src);
        ++counts[o0 * 4 + o1 * 2 + o2];
    }
    for (int i = 0; i < 8; ++i) {
        const double p = br[i].probability;
        EXPECT_NEAR(counts[i] / double(kN), p, 3 * std::sqrt(p * (1 - p) / kN) + 1e-12) << i;
    }
}

TEST(ExploreBranches, CoversAllPathsWithBornWeights) {
    auto leaves = explore_branches<int>([](OutcomeSource &src) {
        auto s = StateVector::plus_state().tensor(StateVector::plus_state(Angle8(2)));
        const int a = measure_z_inplace(s, 0, src);
        const int b = measure_in_plane_inplace(s, 0, Angle8(2), src);
        return a * 2 + b;
    });
    ASSERT_EQ(leaves.size(), 2u);
    double total = 0;
    for (const auto &l : leaves) {
        EXPECT_EQ(l.result % 2, 0);
        total += l.probability;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(TwoTerm, PlusAndPhasedBell) {
    auto plus = two_term_to_dense(TwoTermState(1, {0}, {1}));
    EXPECT_NEAR(fidelity(plus, StateVector::plus_state()), 1.0, 1e-12);
    auto bell = two_term_to_dense(TwoTermState(2, {0, 0}, {1, 1}, -1.0));
    EXPECT_NEAR(bell.amplitude(0).real(), kS, 1e-15);
    EXPECT_NEAR(bell.amplitude(3).real(), -kS, 1e-15);
    EXPECT_NEAR(bell.norm_squared(), 1.0, 1e-12);
    EXPECT_THROW(TwoTermState(1, {0}, {0}), std::invalid_argument);
    EXPECT_THROW(TwoTermState(1, {0}, {1}, 2.0), std::invalid_argument);
    EXPECT_THROW(two_term_to_dense(TwoTermState(25, Bits(25, 0), Bits(25, 1))), std::invalid_argument);
}

TEST(Sparse, MatchesDenseOnMixedCircuit) {
    auto sp = SparseState::from_two_term(TwoTermState(3, {1, 0, 0}, {0, 1, 1}, Complex(0, 1)));
    const auto t = sp.add_qubit();
    sp.cnot(0, t);
    sp.h(1);
    sp.rz(t, Angle8(3));
    sp.x(2);
    sp.z(0);

    auto dn = two_term_to_dense(TwoTermState(3, {1, 0, 0}, {0, 1, 1}, Complex(0, 1))).tensor(StateVector(1));
    dn.h(3);
    dn.cz(0, 3);
    dn.h(3);
    dn.h(1);
    dn.rz(3, Angle8(3));
    dn.x(2);
    dn.z(0);
    EXPECT_NEAR(fidelity(sp.to_dense(), dn), 1.0, 1e-12);
    for (std::size_t q = 0; q < 4; ++q) EXPECT_NEAR(sp.probability_zero(q), dn.probability_zero(q), 1e-12);
}

TEST(Sparse, XStringExpectation) {
    auto sp = SparseState::from_two_term(TwoTermState(2, {0, 0}, {1, 1}));
    EXPECT_NEAR(sp.x_string_expectation(0b11), 1.0, 1e-12);
    EXPECT_NEAR(sp.x_string_expectation(0b01), 0.0, 1e-12);
    EXPECT_NEAR(sp.x_string_expectation(0), 1.0, 1e-12);
}

TEST(Sparse, WideRegisterAcrossWordBoundary) {
    // |0...0> + |bits> on 130 qubits; qubit 0 is measured away until 3 remain.
    const std::size_t width = 130;
    Bits b(width, 0);
    b[width - 1] = 1;
    b[width - 2] = 1;
    b[64] = 1;
    auto sp = SparseState::from_two_term(TwoTermState(width, Bits(width, 0), b));
    Bits mask(width, 0);
    mask[64] = mask[width - 2] = mask[width - 1] = 1;
    EXPECT_NEAR(sp.x_string_expectation(mask), 1.0, 1e-12);
    mask[64] = 0;
    EXPECT_NEAR(sp.x_string_expectation(mask), 0.0, 1e-12);
    EXPECT_NEAR(sp.probability_zero(64), 0.5, 1e-12);

    ScriptedOutcomes zeros(Bits(width - 3, 0));
    for (std::size_t i = 0; i + 3 < width; ++i) {
        if (i == 64) {
            EXPECT_EQ(sp.measure_z(0, zeros), 0);
        } else {
            sp.measure_in_plane(0, Angle8(0), zeros);
        }
    }
    ASSERT_EQ(sp.num_qubits(), 3u);
    // Collapsed to |000> (bit 64 measured 0); X-measuring earlier zeros leaves no phase.
    EXPECT_NEAR(std::norm(sp.to_dense().amplitude(0)), 1.0, 1e-12);
}

TEST(Measure, ReplayRejectsImpossibleOutcome) {
    ReplayedOutcomes replay({1});
    auto s = StateVector(1);
    EXPECT_THROW(measure_z_inplace(s, 0, replay), ImpossibleOutcome);
}
