/**
 * @file
 * Two-to-one trapdoor function family built from a gadget-trapdoor
 * injective function.
 *
 *   f_k(s, e, c, d) = K' s + e + c y0 + d (q/2) e_1  (mod q)
 *
 * K' = [A ; R A + G^T] where A is uniform, R has entries in {-1, 0, 1} with
 * bounded row weight and G is the base-2 gadget. y0 = K' s0 + e0 + d0 (q/2) e_1
 * for a secret z0 = (s0, e0, d0), so f_k(s, e, 1, d) = f_k(s + s0, e + e0, 0,
 * d xor d0) and image points come in pairs whose hardcore bits differ by d0.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "q2pc/primitives.hpp"
#include "q2pc/qsim.hpp"

namespace q2pc::lattice {

struct LatticeParams {
    std::size_t n = 0;           ///< secret dimension
    std::size_t m = 0;           ///< output dimension
    std::uint32_t q = 0;         ///< modulus, power of two
    std::int32_t sigma0 = 0;     ///< box radius of e0
    std::int32_t sigma = 0;      ///< box radius of e
    std::size_t trapdoor_row_weight = 1;

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;

    std::size_t log2q() const;
    std::size_t gadget_rows() const { return n * log2q(); }
    std::size_t random_rows() const { return m - gadget_rows(); }
    std::size_t error_bits() const;
    /// Width of the canonical preimage encoding.
    std::size_t preimage_width() const { return n * log2q() + m * error_bits() + 2; }
    /// Number of domain points q^n (2 sigma + 1)^m 4, saturating at UINT64_MAX.
    std::uint64_t domain_size() const;

    bool operator==(const LatticeParams &) const = default;
};

/// Named parameter sets: "tiny", "small", "demo".
LatticeParams profile_params(std::string_view name);

using ZqVector = std::vector<std::uint32_t>;

struct ZqMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint32_t> data;  ///< row-major

    std::uint32_t at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    bool operator==(const ZqMatrix &) const = default;
};

struct Preimage {
    ZqVector s;
    std::vector<std::int32_t> e;
    std::uint8_t c = 0;
    std::uint8_t d = 0;

    bool operator==(const Preimage &) const = default;
};

/// s limbs (log2 q bits each, little-endian), then each e_i + sigma in
/// error_bits() bits little-endian, then c, then d.
qsim::Bits encode(const LatticeParams &params, const Preimage &z);
Preimage decode(const LatticeParams &params, const qsim::Bits &bits);
bool in_domain(const LatticeParams &params, const Preimage &z);

struct PublicKey {
    LatticeParams params;
    ZqMatrix k_prime;  ///< m x n
    ZqVector y0;

    bool operator==(const PublicKey &) const = default;
};

struct Trapdoor {
    /// gadget_rows x random_rows, entries in {-1, 0, 1}.
    std::vector<std::int8_t> r;
    Preimage z0;  ///< (s0, e0, 0, d0)
};

struct TrapdoorKeypair {
    PublicKey pk;
    Trapdoor td;
    std::uint8_t hp = 0;  ///< hardcore bit, equal to d0
};

TrapdoorKeypair gen(const LatticeParams &params, crypto::CoinSource &coins);
/// Key derived from 32 bytes of coins; this is what coin-tossed keys use.
TrapdoorKeypair gen_from_seed(const LatticeParams &params, const Seed &coins);

ZqVector eval_f(const PublicKey &pk, const Preimage &z);

inline std::uint8_t hardcore(const Preimage &z) { return z.d; }

struct PreimagePair {
    Preimage x;        ///< c = 0
    Preimage x_prime;  ///< c = 1
};

/// All preimages of y within the error box, c = 0 first, then by d.
std::vector<Preimage> invert_all(const TrapdoorKeypair &kp, const ZqVector &y);
/// The preimage pair of y, or nullopt when y does not have exactly two preimages.
std::optional<PreimagePair> invert(const TrapdoorKeypair &kp, const ZqVector &y);

/// Exhaustive preimage search over the domain. Only feasible for tiny parameters.
std::vector<Preimage> brute_force_preimages(const PublicKey &pk, const ZqVector &y);

/// Preimages of y from the public key alone, by enumerating (s, c, d) and
/// solving for e. Requires q^n <= 2^20. Same order as invert_all.
std::vector<Preimage> search_preimages(const PublicKey &pk, const ZqVector &y);
bool public_search_feasible(const LatticeParams &params);

/// Calls visit(z) for every domain point in a fixed order.
template <typename Visit> void for_each_domain_point(const LatticeParams &params, Visit &&visit);

/// Domain point with the given index in the for_each_domain_point order.
Preimage domain_point(const LatticeParams &params, std::uint64_t index);

Preimage sample_domain_point(const LatticeParams &params, crypto::CoinSource &coins);

/// Little-endian canonical byte layout.
Bytes serialize(const PublicKey &pk);
PublicKey deserialize_public_key(ByteView bytes);

struct RegularityReport {
    std::uint64_t domain_points = 0;
    std::uint64_t image_points = 0;
    std::uint64_t two_preimage_points = 0;
    std::uint64_t other_points = 0;
    double irregular_fraction = 0.0;
};

/// Exhaustive count of preimages per image point.
RegularityReport measure_regularity(const PublicKey &pk);

template <typename Visit> void for_each_domain_point(const LatticeParams &params, Visit &&visit) {
    const std::uint64_t total = params.domain_size();
    for (std::uint64_t i = 0; i < total; ++i) visit(domain_point(params, i));
}

} // namespace q2pc::lattice
