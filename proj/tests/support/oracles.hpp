// Independent reference computations for tests. Nothing here calls the
// library's gate or measurement code; states are plain amplitude vectors.
#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "q2pc/mbqc.hpp"
#include "q2pc/qsim.hpp"

namespace oracle {

using C = std::complex<double>;
using Vec = std::vector<C>;
using Law = std::map<std::vector<std::uint8_t>, double>;

inline Vec amplitudes(const q2pc::qsim::StateVector &s) { return Vec(s.amplitudes().begin(), s.amplitudes().end()); }

inline void apply_1q(Vec &v, std::size_t q, C m00, C m01, C m10, C m11) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i >> q & 1) continue;
        const std::size_t j = i | (std::size_t{1} << q);
        const C a = v[i], b = v[j];
        v[i] = m00 * a + m01 * b;
        v[j] = m10 * a + m11 * b;
    }
}

inline void hadamard(Vec &v, std::size_t q) {
    const double s = 1 / std::sqrt(2.0);
    apply_1q(v, q, s, s, s, -s);
}

/// diag(1, e^{i a pi/4})
inline void phase(Vec &v, std::size_t q, int a) {
    apply_1q(v, q, 1, 0, 0, std::polar(1.0, a * M_PI / 4));
}

inline void cz(Vec &v, std::size_t a, std::size_t b) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if ((i >> a & 1) && (i >> b & 1)) v[i] = -v[i];
    }
}

/// Law of measuring every qubit in Z; key bit k is qubit k.
inline Law z_law(const Vec &v, std::size_t n) {
    Law law;
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::vector<std::uint8_t> bits(n);
        for (std::size_t k = 0; k < n; ++k) bits[k] = static_cast<std::uint8_t>(i >> k & 1);
        law[bits] += std::norm(v[i]);
    }
    return law;
}

/// Born(M_Z Rx(-2b) psi) for one qubit.
inline Law oqfe_target(const q2pc::qsim::StateVector &psi, int b) {
    Vec v = amplitudes(psi);
    hadamard(v, 0);
    phase(v, 0, -2 * b);
    hadamard(v, 0);
    return z_law(v, 1);
}

/// Circuit model of a pattern: L_j = CZ_j (H Rz(-phi_{j-1}) L_{j-1}), output M_Z L_m.
inline Law pattern_circuit(const q2pc::mbqc::Pattern &p, const q2pc::qsim::StateVector &input) {
    Vec v = amplitudes(input);
    for (std::size_t j = 1; j <= p.m; ++j) {
        for (std::size_t i = 0; i < p.n; ++i) {
            const int a = j == 1 ? 0 : p.phi[i][j - 2].value();
            phase(v, i, -a);
            hadamard(v, i);
        }
        for (const auto &e : p.vertical) {
            if (e.col == j) cz(v, e.row, e.row + 1);
        }
    }
    return z_law(v, p.n);
}

inline double tv(const Law &a, const Law &b) {
    std::map<std::vector<std::uint8_t>, double> diff = a;
    for (const auto &[k, p] : b) diff[k] -= p;
    double s = 0;
    for (const auto &[k, d] : diff) s += std::abs(d);
    return s / 2;
}

/// Deterministic pseudo-random single qubit, independent of the library's coin source.
inline q2pc::qsim::StateVector seeded_qubit(unsigned seed) {
    const double t = 0.37 + 0.11 * seed, ph = 1.3 + 0.7 * seed;
    return q2pc::qsim::StateVector::from_amplitudes({std::cos(t), std::polar(std::sin(t), ph)});
}

} // namespace oracle
