/**
 * @file
 * Measurement patterns on an n x (m+1) grid.
 *
 * Column 0 holds the input qubits and is measured at angle 0. Columns 1..m-1
 * are measured in the XY plane at their pattern angles; column m is the
 * output, read in the Z basis. Edges: every horizontal (i,j)-(i,j+1), plus the
 * listed vertical edges (i,j)-(i+1,j) with j >= 1. With flow f(i,j) = (i,j+1)
 * the pattern computes, column by column,
 *
 *   L_j = CZ_j . (H Rz(-phi_{.,j-1}) L_{j-1}),  L_0 = input,  phi_{.,0} = 0,
 *
 * and outputs M_Z L_m, where CZ_j is the product of column j's vertical edges.
 */
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "q2pc/angle8.hpp"
#include "q2pc/errors.hpp"
#include "q2pc/qsim.hpp"

namespace q2pc::mbqc {

struct VerticalEdge {
    std::size_t row;  ///< joins (row, col) and (row + 1, col)
    std::size_t col;
    bool operator==(const VerticalEdge &) const = default;
};

struct Dependencies {
    std::vector<Site> x;
    std::vector<Site> z;
    bool operator==(const Dependencies &) const = default;
};

struct Pattern {
    std::string name;
    std::size_t n = 0;  ///< rows
    std::size_t m = 0;  ///< columns after the input column
    /// phi[i][j-1] is the angle of site (i, j), j = 1..m; column m entries are 0.
    std::vector<std::vector<Angle8>> phi;
    std::vector<VerticalEdge> vertical;
    /// deps[i][j] for j = 0..m.
    std::vector<std::vector<Dependencies>> deps;
    std::size_t input_rows = 0;

    Angle8 angle(Site s) const { return s.col == 0 ? Angle8(0) : phi.at(s.row).at(s.col - 1); }
    const Dependencies &dependencies(Site s) const { return deps.at(s.row).at(s.col); }
    bool is_output(Site s) const { return s.col == m; }

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
    bool operator==(const Pattern &) const = default;
};

/// Dependency sets induced by the column flow and the pattern's edges.
std::vector<std::vector<Dependencies>> flow_dependencies(std::size_t n, std::size_t m,
                                                         const std::vector<VerticalEdge> &vertical);

/// Builds a pattern with flow-derived dependencies.
Pattern make_pattern(std::string name, std::vector<std::vector<Angle8>> phi, std::vector<VerticalEdge> vertical = {});

/// ((-1)^sX phi + sZ pi) mod 2pi.
Angle8 compute_phi_prime(Angle8 phi, int sx, int sz);
/// phi' + theta + r pi.
Angle8 compute_delta(Angle8 phi_prime, Angle8 theta, int r);

/// Corrected outcomes s-bar and Bob's raw outcomes s' per site.
class OutcomeBoard {
  public:
    OutcomeBoard(std::size_t n, std::size_t m);

    void record(Site s, int raw, int mask);
    std::optional<int> corrected(Site s) const;
    std::optional<int> raw(Site s) const;

  private:
    std::size_t n_, m_;
    std::vector<std::optional<int>> corrected_, raw_;
};

struct Corrections {
    int sx = 0;
    int sz = 0;
};

/// XOR of corrected outcomes over the site's dependency lists. Throws on an unmeasured dependency.
Corrections accumulate_dependencies(const OutcomeBoard &board, const Pattern &pattern, Site site);
/// Same, over raw outcomes; Bob's correction of output qubits.
int raw_x_dependency(const OutcomeBoard &board, const Pattern &pattern, Site site);

/// Plain evaluation: one sampled run. Input qubit i is row i.
qsim::Bits reference_evaluate(const Pattern &pattern, const qsim::StateVector &input, qsim::OutcomeSource &outcomes);

using Law = std::map<qsim::Bits, double>;

/// Exact output law by enumerating every measurement branch.
Law reference_distribution(const Pattern &pattern, const qsim::StateVector &input);

namespace library {
Pattern identity();
/// Output M_Z Rx(-phi) psi.
Pattern rx_teleport(Angle8 phi);
Pattern hadamard();
/// Output M_Z H Rz(-phi) psi.
Pattern rz(Angle8 phi);
/// Two-row brick: vertical edges at columns 1 and 3, free angles at columns 1..3.
Pattern brick(const std::vector<std::vector<Angle8>> &angles);
/// n rows, output M_Z X^{bits} psi.
Pattern bit_flips(const std::vector<std::uint8_t> &bits);
} // namespace library

/// Named shipped pattern: identity, rx-teleport, hadamard, rz, brick.
Pattern library_pattern(std::string_view name);
std::vector<std::string> library_names();

/// Versioned JSON document.
std::string to_json(const Pattern &p);
Pattern from_json(std::string_view text);
Pattern load_pattern(const std::string &path);
void save_pattern(const Pattern &p, const std::string &path);

} // namespace q2pc::mbqc
