/**
 * @file
 * Small quantum simulation backend.
 *
 * Qubit k of a StateVector is bit k of the amplitude index (little-endian).
 * Measuring a qubit removes it; the qubits above it shift down by one.
 */
#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "q2pc/angle8.hpp"
#include "q2pc/primitives.hpp"

namespace q2pc::qsim {

using Complex = std::complex<double>;

inline constexpr std::size_t kDefaultMaxQubits = 24;
inline constexpr double kNormTolerance = 1e-9;
inline constexpr double kZeroProbability = 1e-12;

/// Bit string stored one bit per element; index 0 is qubit 0.
using Bits = std::vector<std::uint8_t>;

class StateVector {
  public:
    /// |0...0> on num_qubits qubits.
    explicit StateVector(std::size_t num_qubits = 0, std::size_t max_qubits = kDefaultMaxQubits);
    /// Takes amplitudes verbatim; throws unless the length is a power of two and the norm is 1.
    static StateVector from_amplitudes(std::vector<Complex> amplitudes, std::size_t max_qubits = kDefaultMaxQubits);
    /// Single qubit (|0> + e^{i angle} |1>)/sqrt2.
    static StateVector plus_state(Angle8 angle = Angle8(0));

    std::size_t num_qubits() const { return num_qubits_; }
    std::size_t max_qubits() const { return max_qubits_; }
    std::span<const Complex> amplitudes() const { return amps_; }
    Complex amplitude(std::size_t index) const { return amps_.at(index); }
    double norm_squared() const;

    void h(std::size_t q);
    void x(std::size_t q);
    void z(std::size_t q);
    void rz(std::size_t q, Angle8 a);
    void rx(std::size_t q, Angle8 a);
    void cz(std::size_t a, std::size_t b);

    /// Probability of reading 0 on qubit q in the computational basis.
    double probability_zero(std::size_t q) const;
    /// Projects qubit q onto |outcome> and removes it. Returns the branch probability.
    /// The residual is renormalized unless the probability is below kZeroProbability.
    double project_and_remove(std::size_t q, int outcome);

    /// this (low qubits) tensor other (high qubits).
    StateVector tensor(const StateVector &other) const;

  private:
    void check_qubit(std::size_t q) const;
    template <typename F> void for_pairs(std::size_t q, F &&f);

    std::size_t num_qubits_;
    std::size_t max_qubits_;
    std::vector<Complex> amps_;
};

enum class GateKind { H, X, Z, CZ, Rz, Rx };

struct Gate {
    GateKind kind;
    Angle8 angle{};

    static Gate H() { return {GateKind::H}; }
    static Gate X() { return {GateKind::X}; }
    static Gate Z() { return {GateKind::Z}; }
    static Gate CZ() { return {GateKind::CZ}; }
    static Gate Rz(Angle8 a) { return {GateKind::Rz, a}; }
    static Gate Rx(Angle8 a) { return {GateKind::Rx, a}; }
};

/// Rz(a) = diag(1, e^{i a pi/4}); Rx(a) = H Rz(a) H.
StateVector apply_gate(StateVector state, Gate gate, std::span<const std::size_t> targets);
inline StateVector apply_gate(StateVector state, Gate gate, std::initializer_list<std::size_t> targets) {
    return apply_gate(std::move(state), gate, std::span<const std::size_t>(targets.begin(), targets.size()));
}

/// Chooses measurement outcomes. Implementations decide between sampling and scripting.
class OutcomeSource {
  public:
    virtual ~OutcomeSource() = default;
    /// p0 is the Born probability of outcome 0.
    virtual int draw(double p0) = 0;
};

/// Born-rule sampling from a coin stream.
class SampledOutcomes final : public OutcomeSource {
  public:
    explicit SampledOutcomes(crypto::CoinSource &coins) : coins_(coins) {}
    int draw(double p0) override;

  private:
    crypto::CoinSource &coins_;
};

/// Wraps another source and records every outcome it hands out.
class RecordingOutcomes final : public OutcomeSource {
  public:
    explicit RecordingOutcomes(OutcomeSource &inner) : inner_(inner) {}
    int draw(double p0) override;
    const Bits &record() const { return record_; }

  private:
    OutcomeSource &inner_;
    Bits record_;
};

/// Replays a fixed outcome list; throws on exhaustion or on a zero-probability outcome.
class ReplayedOutcomes final : public OutcomeSource {
  public:
    explicit ReplayedOutcomes(Bits outcomes) : outcomes_(std::move(outcomes)) {}
    int draw(double p0) override;
    bool exhausted() const { return next_ == outcomes_.size(); }

  private:
    Bits outcomes_;
    std::size_t next_ = 0;
};

/// A forced outcome had probability below kZeroProbability.
class ImpossibleOutcome : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct MeasureResult {
    int outcome;
    StateVector post_state;
};

MeasureResult measure_z(const StateVector &state, std::size_t qubit, OutcomeSource &outcomes);
MeasureResult measure_z(const StateVector &state, std::size_t qubit, crypto::CoinSource &coins);
/// Rz(-angle), then H, then measure_z. Outcome 0 corresponds to |+_angle>.
MeasureResult measure_in_plane(const StateVector &state, std::size_t qubit, Angle8 angle, OutcomeSource &outcomes);
MeasureResult measure_in_plane(const StateVector &state, std::size_t qubit, Angle8 angle, crypto::CoinSource &coins);

/// In-place variants used by the protocol engines.
int measure_z_inplace(StateVector &state, std::size_t qubit, OutcomeSource &outcomes);
int measure_in_plane_inplace(StateVector &state, std::size_t qubit, Angle8 angle, OutcomeSource &outcomes);

struct PlanStep {
    std::size_t qubit;              ///< index in the original state
    std::optional<Angle8> angle;    ///< nullopt measures Z
};

struct Branch {
    Bits outcomes;
    double probability;
    bool impossible;        ///< probability below kZeroProbability; residual is a placeholder
    StateVector residual;
};

/// Every outcome string of the plan, in lexicographic order of outcomes.
std::vector<Branch> enumerate_branches(const StateVector &state, std::span<const PlanStep> plan);

/// Max over global phase of |<a|b>|, i.e. |<a|b>|.
double overlap(const StateVector &a, const StateVector &b);
double fidelity(const StateVector &a, const StateVector &b);

/**
 * Exhaustive exploration of every measurement path a randomized procedure can
 * take. The procedure is rerun once per leaf with a scripted OutcomeSource;
 * each draw takes outcome 0 first, then 1 on a later pass, skipping outcomes
 * whose probability is below kZeroProbability. The procedure must be
 * deterministic apart from its draws.
 */
template <typename Result> struct Leaf {
    Bits path;
    double probability;
    Result result;
};

class ScriptedOutcomes final : public OutcomeSource {
  public:
    explicit ScriptedOutcomes(Bits prefix) : prefix_(std::move(prefix)) {}
    int draw(double p0) override;

    const Bits &path() const { return path_; }
    const std::vector<double> &zero_probabilities() const { return p0s_; }
    double probability() const { return probability_; }

  private:
    Bits prefix_;
    Bits path_;
    std::vector<double> p0s_;
    double probability_ = 1.0;
};

/// Next unexplored prefix after a finished path, or nullopt when done.
std::optional<Bits> next_branch_prefix(const Bits &path, const std::vector<double> &p0s);

template <typename Result, typename Procedure>
std::vector<Leaf<Result>> explore_branches(Procedure &&procedure) {
    std::vector<Leaf<Result>> leaves;
    std::optional<Bits> prefix = Bits{};
    while (prefix) {
        ScriptedOutcomes script(*prefix);
        Result r = procedure(static_cast<OutcomeSource &>(script));
        leaves.push_back({script.path(), script.probability(), std::move(r)});
        prefix = next_branch_prefix(script.path(), script.zero_probabilities());
    }
    return leaves;
}

/// (|a> + phase |b>)/sqrt2 on bit_width qubits.
class TwoTermState {
  public:
    TwoTermState(std::size_t bit_width, Bits basis_a, Bits basis_b, Complex relative_phase = 1.0);

    std::size_t bit_width() const { return bit_width_; }
    const Bits &basis_a() const { return a_; }
    const Bits &basis_b() const { return b_; }
    Complex relative_phase() const { return phase_; }

  private:
    std::size_t bit_width_;
    Bits a_, b_;
    Complex phase_;
};

StateVector two_term_to_dense(const TwoTermState &t, std::size_t max_qubits = kDefaultMaxQubits);

/**
 * Sparse state of any width, stored as basis label -> amplitude. Label bit q is qubit q.
 * Holds the few-term registers of the remote state preparation.
 */
class SparseState {
  public:
    using Label = std::vector<std::uint64_t>;

    explicit SparseState(std::size_t num_qubits);
    static SparseState from_two_term(const TwoTermState &t);

    std::size_t num_qubits() const { return num_qubits_; }
    std::size_t num_terms() const { return terms_.size(); }
    const std::map<Label, Complex> &terms() const { return terms_; }

    /// Adds a qubit in |0> above the existing ones; returns its index.
    std::size_t add_qubit();
    void h(std::size_t q);
    void x(std::size_t q);
    void z(std::size_t q);
    void rz(std::size_t q, Angle8 a);
    void cnot(std::size_t control, std::size_t target);

    double probability_zero(std::size_t q) const;
    int measure_z(std::size_t q, OutcomeSource &outcomes);
    /// Rz(-angle), H, measure Z.
    int measure_in_plane(std::size_t q, Angle8 angle, OutcomeSource &outcomes);
    /// <prod_{q in mask} X_q>, real part; the word form addresses qubits 0..63.
    double x_string_expectation(std::uint64_t mask) const;
    double x_string_expectation(const Bits &mask) const;

    StateVector to_dense(std::size_t max_qubits = kDefaultMaxQubits) const;

  private:
    void check_qubit(std::size_t q) const;
    void prune();

    std::size_t num_qubits_;
    std::map<Label, Complex> terms_;
};

} // namespace q2pc::qsim
