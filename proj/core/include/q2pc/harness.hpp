/**
 * @file
 * Simulators, extractors and distribution experiments run against the
 * protocol state machines.
 *
 * Laws are maps from a canonical outcome string to probability. Exact laws
 * come from enumeration; where a law is uniform inside known classes of equal
 * size (image points of one type, preimage-register outcomes of one parity)
 * the enumeration is over classes, which leaves every TV distance unchanged.
 */
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "q2pc/lattice.hpp"
#include "q2pc/protocols.hpp"
#include "q2pc/qsim.hpp"
#include "q2pc/rsp.hpp"

namespace q2pc::harness {

// ------------------------------------------------------------- laws --------

using Law = std::map<std::string, double>;

/// 1/2 sum |pA - pB| over the union of supports. Throws std::invalid_argument
/// unless both laws are nonnegative and sum to 1 within 1e-9.
double tv_distance(const Law &a, const Law &b);
Law empirical_law(const std::vector<std::string> &samples);
/// Key of a bit string: one '0'/'1' per entry.
std::string bits_key(const qsim::Bits &bits);

/// Born law of s_b = M_Z Rx(-b pi/2) psi. The trusted stand-in for the ideal OQFE functionality.
Law ideal_oqfe_law(const qsim::StateVector &psi, int b);

/// "zero", "one", "plus", "iplus" or "random" (Gaussian amplitudes from the seed).
std::vector<std::string> input_names();
qsim::StateVector named_input(std::string_view name, std::uint64_t seed);

// ---------------------------------------------------------- profiles -------

struct Profile {
    std::string name;
    lattice::LatticeParams params;
    std::size_t dense_qubits = qsim::kDefaultMaxQubits;
    bool enumeration_allowed = false;
};

/// "tiny", "small" or "demo"; throws std::invalid_argument otherwise.
Profile profile(std::string_view name);
std::vector<std::string> profile_names();
/// Value of Q2PC_PROFILE when set, else "tiny".
std::string default_profile_name();

// ------------------------------------------------------- worker pool -------

/// Runs fn(0..count-1) on up to `workers` threads; results keep index order.
template <typename R>
std::vector<R> run_trials(std::size_t count, std::size_t workers, const std::function<R(std::size_t)> &fn);

// ------------------------------------------- semi-honest Alice views -------

/// Alice's view of one OQFE run: input, randomness and Bob's messages.
struct ViewSample {
    int b = 0;
    int r_a = 0;
    Seed key_coins{};     ///< randomness behind Alice's trapdoor key
    lattice::ZqVector y;  ///< with w, the RSP reply
    qsim::Bits w;
    int m0 = 0;
    int s_bar = 0;
    int theta1 = 0;                 ///< decoded from (y, w); not part of the view key
    bool inversion_failed = false;  ///< y had no preimage pair; theta1 set to 0

    std::string key() const;
};

/// Every image point of one key, by exhaustive domain enumeration.
class ImageTable {
  public:
    /// Throws std::invalid_argument when the domain exceeds 2^24 points.
    explicit ImageTable(const lattice::TrapdoorKeypair &kp);

    std::size_t image_size() const { return pair_images_.size() + irregular_images_.size(); }
    std::size_t pair_count() const { return pair_images_.size(); }
    std::size_t irregular_count() const { return irregular_images_.size(); }
    lattice::ZqVector pair_image(std::size_t i) const;
    lattice::PreimagePair pair(std::size_t i) const;
    /// i indexes all image points: pair images first, then the rest.
    lattice::ZqVector image(std::size_t i) const;

  private:
    struct Entry {
        std::uint64_t y = 0;
        std::uint64_t first = 0, second = 0;  ///< domain indices; c = 0 first for pairs
    };
    lattice::ZqVector unpack(std::uint64_t y) const;

    lattice::LatticeParams params_;
    std::vector<Entry> pair_images_;
    std::vector<std::uint64_t> irregular_images_;
};

enum class SimulatorVariant {
    Literal,    ///< y uniform on the image, w uniform, b = 0 leaves s_bar independent of s_b
    Corrected,  ///< y on pair images, w on the honest support, b = 0 sets s_bar from s_b
};
const char *to_string(SimulatorVariant v);

struct AliceKey {
    Seed coins{};
    lattice::TrapdoorKeypair kp;
};
AliceKey sample_alice_key(const lattice::LatticeParams &params, crypto::CoinSource &coins);

/**
 * Simulated view from (b, s_b) alone. With an image table for the key, y is
 * drawn from it; otherwise from eval_f of uniform domain points (Literal) or
 * by collapse with trapdoor inversion (Corrected).
 */
ViewSample simulate_semi_honest_alice(int b, int s_b, const AliceKey &key, crypto::CoinSource &coins,
                                      SimulatorVariant variant, const ImageTable *images = nullptr);
/// Samples the key as well.
ViewSample simulate_semi_honest_alice(int b, int s_b, const lattice::LatticeParams &params,
                                      crypto::CoinSource &coins, SimulatorVariant variant);

/// Real and simulated view laws for one key, over every other coin of both parties.
struct ViewLaws {
    Law real;
    Law literal;
    Law corrected;
};
ViewLaws exact_view_laws(const lattice::TrapdoorKeypair &kp, const ImageTable &images, int b,
                         const qsim::StateVector &psi);

/// Law of (m0, s_bar) Bob returns for a given prepared angle and Alice mask, by branch enumeration.
Law oqfe_reply_law(rsp::FourStateAngles theta, int r_a, int b, const qsim::StateVector &psi);

// ------------------------------------------------ malicious Alice ----------

/// Extractor on every honest (b, theta2, r_a) combination; true iff b* = b throughout.
bool extractor_totality();

// ------------------------------------------------ backend comparison -------

/// Exact law of the preimage-register outcomes w of each backend for one collapsed image, indexed by packed w.
struct RegisterLaws {
    std::vector<double> quantum;
    std::vector<double> shortcut;
};
/// Needs W <= 24.
RegisterLaws register_outcome_laws(const lattice::PublicKey &pk, const rsp::CollapsedImage &img);

// ------------------------------------------------------- experiments -------

enum class Method { ExactEnumeration, Sampling };
const char *to_string(Method m);

struct ExperimentOptions {
    std::string profile = "tiny";
    std::optional<Method> method;           ///< each experiment has a default
    std::optional<std::uint64_t> trials;    ///< samples, keys or sessions, per experiment
    std::uint64_t seed = 1;
    std::size_t workers = 0;                ///< 0: hardware concurrency
};

struct ExperimentReport {
    std::string experiment;
    std::string profile;
    std::uint64_t seed = 0;
    Method method = Method::ExactEnumeration;
    std::uint64_t samples = 0;  ///< sampling only
    double confidence = 0.0;    ///< sampling only
    std::string statistic;      ///< name of the compared value
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::size_t support_size = 0;
    std::map<std::string, double> frequencies;
    std::map<std::string, std::uint64_t> counts;
    std::map<std::string, double> metrics;
    std::string asymptotic;  ///< the statement the threshold stands in for
    std::string scope;       ///< what the experiment does not measure

    /// Deterministic JSON, keys in a fixed order.
    std::string to_json() const;
};

ExperimentReport delta_uniformity_experiment(const ExperimentOptions &opts);
ExperimentReport simulator_tv_experiment(const ExperimentOptions &opts);
ExperimentReport extractor_experiment(const ExperimentOptions &opts);
ExperimentReport backend_equivalence_experiment(const ExperimentOptions &opts);

std::vector<std::string> experiment_names();
/// Throws std::invalid_argument for an unknown name.
ExperimentReport run_experiment(std::string_view name, const ExperimentOptions &opts);

// ------------------------------------------------------------- impl --------

template <typename R>
std::vector<R> run_trials(std::size_t count, std::size_t workers, const std::function<R(std::size_t)> &fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(count, 1));
    std::vector<std::optional<R>> slots(count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto &t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    std::vector<R> out;
    out.reserve(count);
    for (auto &s : slots) out.push_back(std::move(*s));
    return out;
}

} // namespace q2pc::harness
