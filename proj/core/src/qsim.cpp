#include "q2pc/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

namespace q2pc::qsim {

namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

std::size_t insert_bit(std::size_t index, std::size_t q, int bit) {
    const std::size_t low = index & ((std::size_t{1} << q) - 1);
    const std::size_t high = index >> q;
    return (high << (q + 1)) | (static_cast<std::size_t>(bit) << q) | low;
}

} // namespace

StateVector::StateVector(std::size_t num_qubits, std::size_t max_qubits)
    : num_qubits_(num_qubits), max_qubits_(max_qubits) {
    if (num_qubits > max_qubits) {
        throw std::invalid_argument("StateVector: " + std::to_string(num_qubits) + " qubits exceeds the maximum of " +
                                    std::to_string(max_qubits));
    }
    amps_.assign(std::size_t{1} << num_qubits, Complex(0.0));
    amps_[0] = 1.0;
}

StateVector StateVector::from_amplitudes(std::vector<Complex> amplitudes, std::size_t max_qubits) {
    const std::size_t size = amplitudes.size();
    if (size == 0 || (size & (size - 1)) != 0) {
        throw std::invalid_argument("StateVector: amplitude count must be a power of two");
    }
    std::size_t n = 0;
    while ((std::size_t{1} << n) < size) ++n;
    StateVector s(n, max_qubits);
    s.amps_ = std::move(amplitudes);
    if (std::abs(s.norm_squared() - 1.0) > kNormTolerance) {
        throw std::invalid_argument("StateVector: amplitudes are not unit norm");
    }
    return s;
}

StateVector StateVector::plus_state(Angle8 angle) {
    return from_amplitudes({kInvSqrt2, angle.phase() * kInvSqrt2});
}

double StateVector::norm_squared() const {
    double total = 0.0;
    for (const auto &a : amps_) total += std::norm(a);
    return total;
}

void StateVector::check_qubit(std::size_t q) const {
    if (q >= num_qubits_) {
        throw std::out_of_range("qubit " + std::to_string(q) + " out of range for " + std::to_string(num_qubits_) +
                                "-qubit state");
    }
}

template <typename F> void StateVector::for_pairs(std::size_t q, F &&f) {
    check_qubit(q);
    const std::size_t half = amps_.size() / 2;
    for (std::size_t i = 0; i < half; ++i) {
        const std::size_t i0 = insert_bit(i, q, 0);
        f(amps_[i0], amps_[i0 | (std::size_t{1} << q)]);
    }
}

void StateVector::h(std::size_t q) {
    for_pairs(q, [](Complex &a0, Complex &a1) {
        const Complex s = (a0 + a1) * kInvSqrt2;
        const Complex d = (a0 - a1) * kInvSqrt2;
        a0 = s;
        a1 = d;
    });
}

void StateVector::x(std::size_t q) {
    for_pairs(q, [](Complex &a0, Complex &a1) { std::swap(a0, a1); });
}

void StateVector::z(std::size_t q) {
    for_pairs(q, [](Complex &, Complex &a1) { a1 = -a1; });
}

void StateVector::rz(std::size_t q, Angle8 a) {
    const Complex phase = a.phase();
    for_pairs(q, [phase](Complex &, Complex &a1) { a1 *= phase; });
}

void StateVector::rx(std::size_t q, Angle8 a) {
    h(q);
    rz(q, a);
    h(q);
}

void StateVector::cz(std::size_t a, std::size_t b) {
    check_qubit(a);
    check_qubit(b);
    if (a == b) throw std::invalid_argument("CZ targets must be distinct");
    const std::size_t mask = (std::size_t{1} << a) | (std::size_t{1} << b);
    for (std::size_t i = 0; i < amps_.size(); ++i) {
        if ((i & mask) == mask) amps_[i] = -amps_[i];
    }
}

double StateVector::probability_zero(std::size_t q) const {
    check_qubit(q);
    double p0 = 0.0;
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t i = 0; i < amps_.size(); ++i) {
        if (!(i & bit)) p0 += std::norm(amps_[i]);
    }
    return p0;
}

double StateVector::project_and_remove(std::size_t q, int outcome) {
    check_qubit(q);
    std::vector<Complex> next(amps_.size() / 2);
    double p = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
        next[i] = amps_[insert_bit(i, q, outcome)];
        p += std::norm(next[i]);
    }
    if (p >= kZeroProbability) {
        const double scale = 1.0 / std::sqrt(p);
        for (auto &a : next) a *= scale;
    } else {
        std::fill(next.begin(), next.end(), Complex(0.0));
        next[0] = 1.0;
    }
    amps_ = std::move(next);
    --num_qubits_;
    return p;
}

StateVector StateVector::tensor(const StateVector &other) const {
    StateVector out(num_qubits_ + other.num_qubits_, std::max(max_qubits_, other.max_qubits_));
    const std::size_t low = amps_.size();
    for (std::size_t hi = 0; hi < other.amps_.size(); ++hi) {
        for (std::size_t lo = 0; lo < low; ++lo) out.amps_[hi * low + lo] = other.amps_[hi] * amps_[lo];
    }
    return out;
}

StateVector apply_gate(StateVector state, Gate gate, std::span<const std::size_t> targets) {
    const std::size_t arity = gate.kind == GateKind::CZ ? 2 : 1;
    if (targets.size() != arity) {
        throw std::invalid_argument("gate expects " + std::to_string(arity) + " target(s), got " +
                                    std::to_string(targets.size()));
    }
    switch (gate.kind) {
    case GateKind::H: state.h(targets[0]); break;
    case GateKind::X: state.x(targets[0]); break;
    case GateKind::Z: state.z(targets[0]); break;
    case GateKind::Rz: state.rz(targets[0], gate.angle); break;
    case GateKind::Rx: state.rx(targets[0], gate.angle); break;
    case GateKind::CZ: state.cz(targets[0], targets[1]); break;
    }
    return state;
}

int SampledOutcomes::draw(double p0) {
    return coins_.uniform01() < p0 ? 0 : 1;
}

int RecordingOutcomes::draw(double p0) {
    const int outcome = inner_.draw(p0);
    record_.push_back(static_cast<std::uint8_t>(outcome));
    return outcome;
}

int ReplayedOutcomes::draw(double p0) {
    if (next_ >= outcomes_.size()) throw std::out_of_range("replayed outcome list exhausted");
    const int outcome = outcomes_[next_++];
    const double p = outcome ? 1.0 - p0 : p0;
    if (p < kZeroProbability) throw ImpossibleOutcome("replayed outcome has zero probability");
    return outcome;
}

int ScriptedOutcomes::draw(double p0) {
    const std::size_t k = path_.size();
    int outcome;
    if (k < prefix_.size()) {
        outcome = prefix_[k];
    } else {
        outcome = p0 >= kZeroProbability ? 0 : 1;
    }
    const double p = outcome ? 1.0 - p0 : p0;
    if (p < kZeroProbability) throw ImpossibleOutcome("scripted branch has zero probability");
    path_.push_back(static_cast<std::uint8_t>(outcome));
    p0s_.push_back(p0);
    probability_ *= p;
    return outcome;
}

std::optional<Bits> next_branch_prefix(const Bits &path, const std::vector<double> &p0s) {
    for (std::size_t k = path.size(); k-- > 0;) {
        if (path[k] == 0 && 1.0 - p0s[k] >= kZeroProbability) {
            Bits prefix(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(k));
            prefix.push_back(1);
            return prefix;
        }
    }
    return std::nullopt;
}

int measure_z_inplace(StateVector &state, std::size_t qubit, OutcomeSource &outcomes) {
    const double p0 = state.probability_zero(qubit);
    if (p0 < kZeroProbability && 1.0 - p0 < kZeroProbability) {
        throw std::runtime_error("measure_z: degenerate amplitudes, state is corrupted");
    }
    const int outcome = outcomes.draw(p0);
    state.project_and_remove(qubit, outcome);
    return outcome;
}

int measure_in_plane_inplace(StateVector &state, std::size_t qubit, Angle8 angle, OutcomeSource &outcomes) {
    state.rz(qubit, -angle);
    state.h(qubit);
    return measure_z_inplace(state, qubit, outcomes);
}

MeasureResult measure_z(const StateVector &state, std::size_t qubit, OutcomeSource &outcomes) {
    StateVector post = state;
    const int outcome = measure_z_inplace(post, qubit, outcomes);
    return {outcome, std::move(post)};
}

MeasureResult measure_z(const StateVector &state, std::size_t qubit, crypto::CoinSource &coins) {
    SampledOutcomes outcomes(coins);
    return measure_z(state, qubit, outcomes);
}

MeasureResult measure_in_plane(const StateVector &state, std::size_t qubit, Angle8 angle, OutcomeSource &outcomes) {
    StateVector post = state;
    const int outcome = measure_in_plane_inplace(post, qubit, angle, outcomes);
    return {outcome, std::move(post)};
}

MeasureResult measure_in_plane(const StateVector &state, std::size_t qubit, Angle8 angle, crypto::CoinSource &coins) {
    SampledOutcomes outcomes(coins);
    return measure_in_plane(state, qubit, angle, outcomes);
}

namespace {

void enumerate_rec(const StateVector &state, std::span<const PlanStep> plan, std::size_t step,
                   std::vector<std::size_t> &position, Bits &prefix, double probability, bool impossible,
                   std::vector<Branch> &out) {
    if (step == plan.size()) {
        out.push_back({prefix, impossible ? 0.0 : probability, impossible, state});
        return;
    }
    const std::size_t original = plan[step].qubit;
    const std::size_t q = position[original];
    StateVector rotated = state;
    if (plan[step].angle) {
        rotated.rz(q, -*plan[step].angle);
        rotated.h(q);
    }
    for (int outcome = 0; outcome < 2; ++outcome) {
        StateVector next = rotated;
        const double p = next.project_and_remove(q, outcome);
        const bool dead = impossible || p < kZeroProbability;
        std::vector<std::size_t> saved = position;
        for (auto &pos : position) {
            if (pos != SIZE_MAX && pos > q) --pos;
        }
        position[original] = SIZE_MAX;
        prefix.push_back(static_cast<std::uint8_t>(outcome));
        enumerate_rec(next, plan, step + 1, position, prefix, probability * p, dead, out);
        prefix.pop_back();
        position = std::move(saved);
    }
}

} // namespace

std::vector<Branch> enumerate_branches(const StateVector &state, std::span<const PlanStep> plan) {
    std::set<std::size_t> seen;
    for (const auto &s : plan) {
        if (s.qubit >= state.num_qubits()) throw std::out_of_range("plan qubit out of range");
        if (!seen.insert(s.qubit).second) throw std::invalid_argument("plan qubits must be distinct");
    }
    std::vector<std::size_t> position(state.num_qubits());
    for (std::size_t i = 0; i < position.size(); ++i) position[i] = i;
    std::vector<Branch> out;
    Bits prefix;
    enumerate_rec(state, plan, 0, position, prefix, 1.0, false, out);
    return out;
}

double overlap(const StateVector &a, const StateVector &b) {
    if (a.num_qubits() != b.num_qubits()) throw std::invalid_argument("overlap: qubit count mismatch");
    Complex inner = 0.0;
    auto aa = a.amplitudes();
    auto bb = b.amplitudes();
    for (std::size_t i = 0; i < aa.size(); ++i) inner += std::conj(aa[i]) * bb[i];
    return std::abs(inner);
}

double fidelity(const StateVector &a, const StateVector &b) {
    const double o = overlap(a, b);
    return o * o;
}

TwoTermState::TwoTermState(std::size_t bit_width, Bits basis_a, Bits basis_b, Complex relative_phase)
    : bit_width_(bit_width), a_(std::move(basis_a)), b_(std::move(basis_b)), phase_(relative_phase) {
    if (a_.size() != bit_width_ || b_.size() != bit_width_) {
        throw std::invalid_argument("TwoTermState: basis strings must have bit_width entries");
    }
    for (std::size_t i = 0; i < bit_width_; ++i) {
        if (a_[i] > 1 || b_[i] > 1) throw std::invalid_argument("TwoTermState: bits must be 0 or 1");
    }
    if (a_ == b_) throw std::invalid_argument("TwoTermState: basis strings must differ");
    if (std::abs(std::abs(phase_) - 1.0) > 1e-12) throw std::invalid_argument("TwoTermState: phase must be unit");
}

namespace {

std::uint64_t pack(const Bits &bits) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) v |= static_cast<std::uint64_t>(bits[i] & 1) << i;
    return v;
}

} // namespace

StateVector two_term_to_dense(const TwoTermState &t, std::size_t max_qubits) {
    if (t.bit_width() > max_qubits) {
        throw std::invalid_argument("two_term_to_dense: width " + std::to_string(t.bit_width()) +
                                    " exceeds dense maximum");
    }
    std::vector<Complex> amps(std::size_t{1} << t.bit_width(), Complex(0.0));
    amps[pack(t.basis_a())] = kInvSqrt2;
    amps[pack(t.basis_b())] = t.relative_phase() * kInvSqrt2;
    return StateVector::from_amplitudes(std::move(amps), max_qubits);
}

namespace {

constexpr std::size_t kMaxSparseQubits = 4096;

std::size_t label_words(std::size_t qubits) { return std::max<std::size_t>(1, (qubits + 63) / 64); }

bool test_bit(const SparseState::Label &l, std::size_t q) { return (l[q / 64] >> (q % 64)) & 1; }

void flip_bit(SparseState::Label &l, std::size_t q) { l[q / 64] ^= std::uint64_t{1} << (q % 64); }

void set_bit(SparseState::Label &l, std::size_t q, bool v) {
    const std::uint64_t m = std::uint64_t{1} << (q % 64);
    l[q / 64] = v ? (l[q / 64] | m) : (l[q / 64] & ~m);
}

/// Drops bit q; higher bits move down by one.
SparseState::Label remove_bit(const SparseState::Label &l, std::size_t q, std::size_t width) {
    SparseState::Label out(label_words(width - 1), 0);
    for (std::size_t i = 0, j = 0; i < width; ++i) {
        if (i == q) continue;
        set_bit(out, j++, test_bit(l, i));
    }
    return out;
}

SparseState::Label label_of(const Bits &bits) {
    SparseState::Label l(label_words(bits.size()), 0);
    for (std::size_t i = 0; i < bits.size(); ++i) set_bit(l, i, bits[i] & 1);
    return l;
}

} // namespace

SparseState::SparseState(std::size_t num_qubits) : num_qubits_(num_qubits) {
    if (num_qubits > kMaxSparseQubits) throw std::invalid_argument("SparseState: too many qubits");
    terms_[Label(label_words(num_qubits), 0)] = 1.0;
}

SparseState SparseState::from_two_term(const TwoTermState &t) {
    SparseState s(t.bit_width());
    s.terms_.clear();
    s.terms_[label_of(t.basis_a())] = kInvSqrt2;
    s.terms_[label_of(t.basis_b())] = t.relative_phase() * kInvSqrt2;
    return s;
}

void SparseState::check_qubit(std::size_t q) const {
    if (q >= num_qubits_) throw std::out_of_range("SparseState: qubit out of range");
}

void SparseState::prune() {
    for (auto it = terms_.begin(); it != terms_.end();) {
        it = std::abs(it->second) < 1e-14 ? terms_.erase(it) : std::next(it);
    }
}

std::size_t SparseState::add_qubit() {
    if (num_qubits_ == kMaxSparseQubits) throw std::invalid_argument("SparseState: too many qubits");
    const std::size_t words = label_words(num_qubits_ + 1);
    if (words != label_words(num_qubits_)) {
        std::map<Label, Complex> next;
        for (auto &[label, amp] : terms_) {
            Label l = label;
            l.resize(words, 0);
            next[std::move(l)] = amp;
        }
        terms_ = std::move(next);
    }
    return num_qubits_++;
}

void SparseState::h(std::size_t q) {
    check_qubit(q);
    std::map<Label, Complex> next;
    for (const auto &[label, amp] : terms_) {
        const bool one = test_bit(label, q);
        Label zero_l = label, one_l = label;
        set_bit(zero_l, q, false);
        set_bit(one_l, q, true);
        next[zero_l] += amp * kInvSqrt2;
        next[one_l] += (one ? -amp : amp) * kInvSqrt2;
    }
    terms_ = std::move(next);
    prune();
}

void SparseState::x(std::size_t q) {
    check_qubit(q);
    std::map<Label, Complex> next;
    for (const auto &[label, amp] : terms_) {
        Label l = label;
        flip_bit(l, q);
        next[std::move(l)] = amp;
    }
    terms_ = std::move(next);
}

void SparseState::z(std::size_t q) { rz(q, Angle8::pi()); }

void SparseState::rz(std::size_t q, Angle8 a) {
    check_qubit(q);
    const Complex phase = a.phase();
    for (auto &[label, amp] : terms_) {
        if (test_bit(label, q)) amp *= phase;
    }
}

void SparseState::cnot(std::size_t control, std::size_t target) {
    check_qubit(control);
    check_qubit(target);
    if (control == target) throw std::invalid_argument("cnot: control and target must differ");
    std::map<Label, Complex> next;
    for (const auto &[label, amp] : terms_) {
        Label l = label;
        if (test_bit(l, control)) flip_bit(l, target);
        next[std::move(l)] = amp;
    }
    terms_ = std::move(next);
}

double SparseState::probability_zero(std::size_t q) const {
    check_qubit(q);
    double p0 = 0.0;
    for (const auto &[label, amp] : terms_) {
        if (!test_bit(label, q)) p0 += std::norm(amp);
    }
    return p0;
}

int SparseState::measure_z(std::size_t q, OutcomeSource &outcomes) {
    const double p0 = probability_zero(q);
    const int outcome = outcomes.draw(p0);
    const double p = outcome ? 1.0 - p0 : p0;
    if (p < kZeroProbability) throw ImpossibleOutcome("SparseState: zero-probability outcome");
    const double scale = 1.0 / std::sqrt(p);
    std::map<Label, Complex> next;
    for (const auto &[label, amp] : terms_) {
        if (test_bit(label, q) != (outcome == 1)) continue;
        next[remove_bit(label, q, num_qubits_)] += amp * scale;
    }
    terms_ = std::move(next);
    --num_qubits_;
    return outcome;
}

int SparseState::measure_in_plane(std::size_t q, Angle8 angle, OutcomeSource &outcomes) {
    rz(q, -angle);
    h(q);
    return measure_z(q, outcomes);
}

double SparseState::x_string_expectation(std::uint64_t mask) const {
    if (num_qubits_ < 64 && (mask >> num_qubits_) != 0) throw std::out_of_range("SparseState: mask beyond width");
    Complex total = 0.0;
    for (const auto &[label, amp] : terms_) {
        Label l = label;
        l[0] ^= mask;
        auto it = terms_.find(l);
        if (it != terms_.end()) total += std::conj(amp) * it->second;
    }
    return total.real();
}

double SparseState::x_string_expectation(const Bits &mask) const {
    if (mask.size() > num_qubits_) throw std::out_of_range("SparseState: mask beyond width");
    const Label m = label_of(mask);
    Complex total = 0.0;
    for (const auto &[label, amp] : terms_) {
        Label l = label;
        for (std::size_t i = 0; i < m.size(); ++i) l[i] ^= m[i];
        auto it = terms_.find(l);
        if (it != terms_.end()) total += std::conj(amp) * it->second;
    }
    return total.real();
}

StateVector SparseState::to_dense(std::size_t max_qubits) const {
    if (num_qubits_ > max_qubits) throw std::invalid_argument("SparseState::to_dense: width exceeds dense maximum");
    std::vector<Complex> amps(std::size_t{1} << num_qubits_, Complex(0.0));
    for (const auto &[label, amp] : terms_) amps[label[0]] = amp;
    return StateVector::from_amplitudes(std::move(amps), max_qubits);
}

} // namespace q2pc::qsim
