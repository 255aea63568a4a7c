#include <gtest/gtest.h>

#include <cstdio>

#include "oracles.hpp"
#include "q2pc/mbqc.hpp"

using namespace q2pc;
using namespace q2pc::mbqc;
using qsim::StateVector;

namespace {

StateVector basis(int bit) {
    StateVector s(1);
    if (bit) s.x(0);
    return s;
}

} // namespace

TEST(PhiPrime, Examples) {
    EXPECT_EQ(compute_phi_prime(Angle8(2), 0, 0), Angle8(2));
    EXPECT_EQ(compute_phi_prime(Angle8(2), 1, 0), Angle8(6));
    EXPECT_EQ(compute_phi_prime(Angle8(1), 1, 1), Angle8(3));
}

TEST(Delta, ExamplesAndOqfeSpecialisation) {
    EXPECT_EQ(compute_delta(Angle8(0), Angle8(0), 0), Angle8(0));
    EXPECT_EQ(compute_delta(Angle8(2), Angle8(2), 1), Angle8(0));
    for (int b = 0; b < 2; ++b)
        for (int t2 = 0; t2 < 2; ++t2)
            for (int r = 0; r < 2; ++r)
                for (int sz = 0; sz < 2; ++sz) {
                    const Angle8 d = compute_delta(compute_phi_prime(Angle8(2 * b), 0, 0), Angle8(2 * t2), r);
                    EXPECT_EQ(d.value(), 2 * ((b + t2 + 2 * r) % 4));
                }
}

TEST(Dependencies, EmptyAndSingle) {
    const Pattern p = library::identity();
    OutcomeBoard board(1, 2);
    const auto c0 = accumulate_dependencies(board, p, {0, 0});
    EXPECT_EQ(c0.sx, 0);
    EXPECT_EQ(c0.sz, 0);
    EXPECT_THROW(accumulate_dependencies(board, p, {0, 1}), std::logic_error);
    board.record({0, 0}, 1, 0);
    EXPECT_EQ(accumulate_dependencies(board, p, {0, 1}).sx, 1);
}

TEST(Dependencies, LinearChainFlow) {
    const auto deps = flow_dependencies(2, 2, {});
    EXPECT_EQ(deps[0][1].x, (std::vector<Site>{{0, 0}}));
    EXPECT_TRUE(deps[0][1].z.empty());
    EXPECT_EQ(deps[1][2].x, (std::vector<Site>{{1, 1}}));
    EXPECT_EQ(deps[1][2].z, (std::vector<Site>{{1, 0}}));
}

TEST(Dependencies, VerticalEdgesFeedZ) {
    const auto deps = flow_dependencies(2, 4, {{0, 1}, {0, 3}});
    EXPECT_EQ(deps[0][1].z, (std::vector<Site>{{1, 0}}));
    EXPECT_EQ(deps[1][1].z, (std::vector<Site>{{0, 0}}));
    EXPECT_EQ(deps[0][3].z, (std::vector<Site>{{0, 1}, {1, 2}}));
}

TEST(Board, CorrectedIsRawXorMask) {
    OutcomeBoard board(2, 3);
    board.record({1, 2}, 1, 1);
    EXPECT_EQ(*board.corrected({1, 2}), 0);
    EXPECT_EQ(*board.raw({1, 2}), 1);
    EXPECT_FALSE(board.corrected({0, 0}).has_value());
}

TEST(Pattern, ValidationRejectsBadShapes) {
    EXPECT_THROW(make_pattern("x", {{Angle8(0), Angle8(1)}}), std::invalid_argument);
    EXPECT_THROW(make_pattern("x", {{Angle8(0), Angle8(0)}}, {{0, 1}}), std::invalid_argument);
    Pattern p = library::identity();
    p.deps[0][1].x = {{0, 1}};
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Reference, ZeroAnglesOnPlusGiveZero) {
    for (std::size_t m : {2u, 3u, 4u}) {
        const Pattern p = make_pattern("wire", {std::vector<Angle8>(m, Angle8(0))});
        // An even number of H's leaves |+> as |+>; M_Z then is uniform. Feed |0> through H instead.
        const auto law = reference_distribution(p, StateVector::plus_state());
        const auto expected = oracle::pattern_circuit(p, StateVector::plus_state());
        EXPECT_LT(oracle::tv(law, expected), 1e-9);
    }
    // [0,0] is the identity wire on |+> rotated into Z: H H H |+> = |0>.
    const auto law = reference_distribution(library::hadamard(), StateVector::plus_state());
    EXPECT_NEAR(law.at({0}), 1.0, 1e-12);
}

TEST(Reference, IdentityWireOnBasisStates) {
    for (int bit = 0; bit < 2; ++bit) {
        const auto law = reference_distribution(library::identity(), basis(bit));
        EXPECT_NEAR(law.at({static_cast<std::uint8_t>(bit)}), 1.0, 1e-12);
    }
}

TEST(Reference, RxTeleportMatchesCircuitModel) {
    for (int phi = 0; phi < 8; ++phi) {
        for (unsigned seed = 0; seed < 3; ++seed) {
            const auto psi = oracle::seeded_qubit(seed);
            const auto law = reference_distribution(library::rx_teleport(Angle8(phi)), psi);
            EXPECT_LT(oracle::tv(law, oracle::pattern_circuit(library::rx_teleport(Angle8(phi)), psi)), 1e-9);
            if (phi % 2 == 0) {
                EXPECT_LT(oracle::tv(law, oracle::oqfe_target(psi, phi / 2)), 1e-9);
            }
        }
    }
}

TEST(Reference, LibraryMatchesCircuitModel) {
    for (const auto &name : library_names()) {
        const Pattern p = library_pattern(name);
        for (unsigned seed = 0; seed < 2; ++seed) {
            StateVector in = oracle::seeded_qubit(seed);
            for (std::size_t i = 1; i < p.n; ++i) in = in.tensor(oracle::seeded_qubit(seed + 5 + i));
            EXPECT_LT(oracle::tv(reference_distribution(p, in), oracle::pattern_circuit(p, in)), 1e-9) << name;
        }
    }
}

TEST(Reference, BrickWithAllAnglesMatchesCircuit) {
    for (int a = 0; a < 8; ++a) {
        const Pattern p = library::brick({{Angle8(a), Angle8(a + 1), Angle8(a + 3)}, {Angle8(7 - a), Angle8(2), Angle8(a)}});
        const StateVector in = oracle::seeded_qubit(a).tensor(oracle::seeded_qubit(a + 9));
        EXPECT_LT(oracle::tv(reference_distribution(p, in), oracle::pattern_circuit(p, in)), 1e-9);
    }
}

TEST(Reference, CliffordPatternsAreBranchIndependent) {
    // Deterministic output for every intermediate branch: identity and Hadamard on eigenstates.
    const auto leaves = qsim::explore_branches<qsim::Bits>([](qsim::OutcomeSource &src) {
        return reference_evaluate(library::hadamard(), StateVector::plus_state(), src);
    });
    EXPECT_GT(leaves.size(), 1u);
    for (const auto &leaf : leaves) EXPECT_EQ(leaf.result, (qsim::Bits{0}));
}

TEST(Reference, BitFlips) {
    const Pattern p = library::bit_flips({1, 0, 1});
    StateVector in(3);
    in.x(1);
    const auto law = reference_distribution(p, in);
    EXPECT_NEAR(law.at({1, 1, 1}), 1.0, 1e-12);
}

TEST(PatternJson, RoundTripAndFile) {
    for (const auto &name : library_names()) {
        const Pattern p = library_pattern(name);
        EXPECT_EQ(from_json(to_json(p)), p);
    }
    const std::string path = ::testing::TempDir() + "pattern.json";
    save_pattern(library::brick({{Angle8(1), Angle8(2), Angle8(3)}, {Angle8(4), Angle8(5), Angle8(6)}}), path);
    EXPECT_EQ(load_pattern(path).vertical.size(), 2u);
    std::remove(path.c_str());
}

TEST(PatternJson, RejectsMalformed) {
    EXPECT_THROW(from_json("{}"), std::invalid_argument);
    std::string text = to_json(library::identity());
    const auto pos = text.find("q2pc-pattern/1");
    text.replace(pos, 14, "q2pc-pattern/9");
    EXPECT_THROW(from_json(text), std::invalid_argument);
    EXPECT_THROW(from_json("not json"), std::invalid_argument);
}
