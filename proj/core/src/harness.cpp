#include "q2pc/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "q2pc/session.hpp"

namespace q2pc::harness {

using lattice::LatticeParams;
using lattice::PreimagePair;
using lattice::ZqVector;
using protocols::RspMode;
using protocols::RunConfig;
using qsim::Bits;
using qsim::StateVector;

namespace {

constexpr double kSumTolerance = 1e-9;
constexpr std::uint64_t kMaxEnumerableDomain = std::uint64_t{1} << 24;
constexpr std::size_t kMaxRegisterWidth = 24;

const char *const kBobPrivacyScope =
    "Privacy against Bob is a computational notion; only exactly computable marginals and transcript "
    "structure are tested.";

void check_law(const Law &law) {
    double sum = 0.0;
    for (const auto &[k, p] : law) {
        if (!(p >= 0.0)) throw std::invalid_argument("law has a negative or NaN probability at " + k);
        sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) throw std::invalid_argument("law does not sum to 1");
}

std::string two_bits(const char *a, int x, const char *b, int y) {
    return std::string(a) + "=" + std::to_string(x) + " " + b + "=" + std::to_string(y);
}

Bits xor_bits(const Bits &a, const Bits &b) {
    Bits out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
    return out;
}

Bits pair_difference(const LatticeParams &params, const PreimagePair &pair) {
    return xor_bits(lattice::encode(params, pair.x), lattice::encode(params, pair.x_prime));
}

/// Representative register outcome with <w, diff> = parity.
Bits parity_representative(const Bits &diff, int parity) {
    Bits w(diff.size(), 0);
    if (parity == 0) return w;
    for (std::size_t i = 0; i < diff.size(); ++i) {
        if (diff[i]) {
            w[i] = 1;
            return w;
        }
    }
    throw std::logic_error("preimage pair with equal encodings");
}

struct IdealEnv {
    rsp::IdealDealer dealer;
    RunConfig cfg;
    IdealEnv() {
        cfg.rsp_mode = RspMode::Ideal;
        cfg.dealer = &dealer;
    }
};

std::uint64_t pack_bits(const Bits &w) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < w.size(); ++i) v |= std::uint64_t(w[i] & 1) << i;
    return v;
}

Seed derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
    crypto::Sha256 h;
    h.update("q2pc.harness").update(tag).update_u64(seed).update_u64(index);
    return h.finish();
}

/// Probability that a law over `points` equiprobable cells deviates by more than eps anywhere after n samples.
double deviation_confidence(std::uint64_t n, double p, double eps, std::size_t points) {
    if (n == 0) return 0.0;
    const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    const double tail = std::erfc(eps / sd / std::sqrt(2.0));
    return std::max(0.0, 1.0 - static_cast<double>(points) * tail);
}

} // namespace

// ------------------------------------------------------------- laws --------

double tv_distance(const Law &a, const Law &b) {
    check_law(a);
    check_law(b);
    double sum = 0.0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() || ib != b.end()) {
        if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
            sum += ia->second;
            ++ia;
        } else if (ia == a.end() || ib->first < ia->first) {
            sum += ib->second;
            ++ib;
        } else {
            sum += std::abs(ia->second - ib->second);
            ++ia;
            ++ib;
        }
    }
    return std::min(1.0, 0.5 * sum);
}

Law empirical_law(const std::vector<std::string> &samples) {
    Law law;
    if (samples.empty()) return law;
    const double w = 1.0 / static_cast<double>(samples.size());
    for (const auto &s : samples) law[s] += w;
    return law;
}

std::string bits_key(const Bits &bits) {
    std::string s;
    s.reserve(bits.size());
    for (auto b : bits) s.push_back(b ? '1' : '0');
    return s;
}

Law ideal_oqfe_law(const StateVector &psi, int b) {
    if (psi.num_qubits() != 1) throw std::invalid_argument("OQFE input is one qubit");
    StateVector s = psi;
    s.rx(0, Angle8(-2 * (b & 1)));
    const double p0 = std::clamp(s.probability_zero(0), 0.0, 1.0);
    Law law;
    if (p0 > 0.0) law["0"] = p0;
    if (p0 < 1.0) law["1"] = 1.0 - p0;
    return law;
}

// ---------------------------------------------------------- profiles -------

Profile profile(std::string_view name) {
    Profile p;
    p.name = std::string(name);
    p.params = lattice::profile_params(name);
    p.enumeration_allowed = p.params.domain_size() <= kMaxEnumerableDomain;
    return p;
}

std::vector<std::string> profile_names() { return {"tiny", "small", "demo"}; }

std::string default_profile_name() {
    const char *env = std::getenv("Q2PC_PROFILE");
    return env && *env ? std::string(env) : std::string("tiny");
}

// ------------------------------------------- semi-honest Alice views -------

std::string ViewSample::key() const {
    std::string s = "b=" + std::to_string(b) + " rA=" + std::to_string(r_a) + " key=" + to_hex(key_coins) + " y=";
    for (std::size_t i = 0; i < y.size(); ++i) s += (i ? "," : "") + std::to_string(y[i]);
    s += " w=" + bits_key(w) + " " + two_bits("m0", m0, "s", s_bar);
    return s;
}

ImageTable::ImageTable(const lattice::TrapdoorKeypair &kp) : params_(kp.pk.params) {
    const std::uint64_t total = params_.domain_size();
    if (total > kMaxEnumerableDomain) throw std::invalid_argument("image table: domain is not enumerable");
    if (params_.m * params_.log2q() > 64) throw std::invalid_argument("image table: image does not pack into 64 bits");
    struct Slot {
        std::uint32_t count = 0;
        std::uint64_t first = 0, second = 0;
    };
    std::unordered_map<std::uint64_t, Slot> slots;
    slots.reserve(total);
    const std::size_t lq = params_.log2q();
    for (std::uint64_t i = 0; i < total; ++i) {
        const ZqVector y = lattice::eval_f(kp.pk, lattice::domain_point(params_, i));
        std::uint64_t key = 0;
        for (std::size_t k = 0; k < y.size(); ++k) key |= std::uint64_t(y[k]) << (k * lq);
        Slot &s = slots[key];
        if (s.count == 0) s.first = i;
        if (s.count == 1) s.second = i;
        ++s.count;
    }
    std::vector<std::uint64_t> keys;
    keys.reserve(slots.size());
    for (const auto &[k, s] : slots) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    for (const auto k : keys) {
        const Slot &s = slots.at(k);
        if (s.count == 2) {
            const auto c_first = lattice::domain_point(params_, s.first).c;
            const auto c_second = lattice::domain_point(params_, s.second).c;
            if (c_first != c_second) {
                pair_images_.push_back(c_first == 0 ? Entry{k, s.first, s.second} : Entry{k, s.second, s.first});
                continue;
            }
        }
        irregular_images_.push_back(k);
    }
}

ZqVector ImageTable::unpack(std::uint64_t y) const {
    const std::size_t lq = params_.log2q();
    ZqVector out(params_.m);
    for (std::size_t k = 0; k < params_.m; ++k) out[k] = static_cast<std::uint32_t>((y >> (k * lq)) & (params_.q - 1));
    return out;
}

ZqVector ImageTable::pair_image(std::size_t i) const { return unpack(pair_images_.at(i).y); }

PreimagePair ImageTable::pair(std::size_t i) const {
    const Entry &e = pair_images_.at(i);
    return {lattice::domain_point(params_, e.first), lattice::domain_point(params_, e.second)};
}

ZqVector ImageTable::image(std::size_t i) const {
    if (i < pair_images_.size()) return pair_image(i);
    return unpack(irregular_images_.at(i - pair_images_.size()));
}

const char *to_string(SimulatorVariant v) { return v == SimulatorVariant::Literal ? "literal" : "corrected"; }

AliceKey sample_alice_key(const LatticeParams &params, crypto::CoinSource &coins) {
    AliceKey k;
    k.coins = coins.array<32>();
    k.kp = lattice::gen_from_seed(params, k.coins);
    return k;
}

ViewSample simulate_semi_honest_alice(int b, int s_b, const AliceKey &key, crypto::CoinSource &coins,
                                      SimulatorVariant variant, const ImageTable *images) {
    const auto &params = key.kp.pk.params;
    const bool corrected = variant == SimulatorVariant::Corrected;
    ViewSample v;
    v.b = b & 1;
    v.key_coins = key.coins;
    v.r_a = coins.bit();
    const int s_tilde = coins.bit();

    std::optional<PreimagePair> pair;
    if (images) {
        if (corrected) {
            if (images->pair_count() == 0) throw std::logic_error("key has no preimage pairs");
            const auto i = coins.uniform_below(images->pair_count());
            v.y = images->pair_image(i);
            pair = images->pair(i);
        } else {
            const auto i = coins.uniform_below(images->image_size());
            v.y = images->image(i);
            if (i < images->pair_count()) pair = images->pair(i);
        }
    } else if (corrected) {
        const auto img = rsp::collapse(key.kp.pk, coins,
                                       [&](const ZqVector &y) { return lattice::invert_all(key.kp, y); });
        v.y = img.y;
        pair = img.pair;
    } else {
        v.y = lattice::eval_f(key.kp.pk, lattice::sample_domain_point(params, coins));
    }

    v.w.resize(params.preimage_width());
    for (auto &bit : v.w) bit = static_cast<std::uint8_t>(coins.bit());
    if (corrected) v.w = rsp::shortcut_outcomes(params, *pair, std::move(v.w));

    try {
        v.theta1 = rsp::alice_decode(key.kp, v.y, v.w).theta1;
    } catch (const rsp::NotInImage &) {
        v.inversion_failed = true;
        v.theta1 = 0;
    }

    if (v.b == 1) {
        v.s_bar = s_tilde;
        v.m0 = s_tilde ^ (s_b & 1) ^ v.theta1 ^ v.r_a;
    } else {
        v.m0 = coins.bit();
        v.s_bar = corrected ? ((s_b & 1) ^ v.theta1 ^ v.r_a) : s_tilde;
    }
    return v;
}

ViewSample simulate_semi_honest_alice(int b, int s_b, const LatticeParams &params, crypto::CoinSource &coins,
                                      SimulatorVariant variant) {
    const AliceKey key = sample_alice_key(params, coins);
    return simulate_semi_honest_alice(b, s_b, key, coins, variant);
}

Law oqfe_reply_law(rsp::FourStateAngles theta, int r_a, int b, const StateVector &psi) {
    Law law;
    const auto leaves = qsim::explore_branches<std::string>([&](qsim::OutcomeSource &src) {
        IdealEnv env;
        crypto::CoinSource ac(Seed{}, "reply.alice"), bc(Seed{}, "reply.bob");
        auto run = run_inproc<protocols::OqfeAliceView, protocols::OqfeBobView>(
            SessionId{},
            [&](channel::Endpoint &ep) { return protocols::oqfe_alice(ep, env.cfg, b, ac, {theta, r_a}); },
            [&](channel::Endpoint &ep) { return protocols::oqfe_bob(ep, env.cfg, psi, bc, src); });
        if (!run.completed()) throw std::runtime_error("reply enumeration run failed: " + run.alice.error + run.bob.error);
        return two_bits("m0", run.alice.value->m0, "s", run.alice.value->s_bar);
    });
    for (const auto &leaf : leaves) {
        if (leaf.probability > 0.0) law[leaf.result] += leaf.probability;
    }
    return law;
}

ViewLaws exact_view_laws(const lattice::TrapdoorKeypair &kp, const ImageTable &images, int b, const StateVector &psi) {
    const auto &params = kp.pk.params;
    const int theta2 = kp.hp;
    if (images.pair_count() == 0) throw std::logic_error("key has no preimage pairs");

    // Pair images by (theta1 at parity 0, theta1 at parity 1).
    std::map<std::pair<int, int>, std::uint64_t> signatures;
    for (std::size_t i = 0; i < images.pair_count(); ++i) {
        const PreimagePair pair = images.pair(i);
        const Bits diff = pair_difference(params, pair);
        const auto a0 = rsp::angles_from_pair(params, pair, parity_representative(diff, 0));
        const auto a1 = rsp::angles_from_pair(params, pair, parity_representative(diff, 1));
        if (a0.theta2 != theta2 || a1.theta2 != theta2) throw std::logic_error("pair theta2 differs from hp");
        ++signatures[{a0.theta1, a1.theta1}];
    }

    const Law ideal = ideal_oqfe_law(psi, b);
    const auto p_sb = [&](int s) {
        const auto it = ideal.find(std::to_string(s));
        return it == ideal.end() ? 0.0 : it->second;
    };
    std::map<std::pair<int, int>, Law> replies;
    const auto reply = [&](int theta1, int r_a) -> const Law & {
        auto it = replies.find({theta1, r_a});
        if (it == replies.end()) {
            const rsp::FourStateAngles theta{static_cast<std::uint8_t>(theta1), static_cast<std::uint8_t>(theta2)};
            it = replies.emplace(std::make_pair(theta1, r_a), oqfe_reply_law(theta, r_a, b, psi)).first;
        }
        return it->second;
    };
    const auto key = [](const std::string &y, int p, int r_a, int m0, int s) {
        return "rA=" + std::to_string(r_a) + " y=" + y + " p=" + std::to_string(p) + " " + two_bits("m0", m0, "s", s);
    };
    // Simulated (m0, s_bar) given theta1 and r_A.
    const auto simulated = [&](Law &law, double base, const std::string &y, int p, int r_a, int theta1,
                               bool corrected) {
        for (int s_tilde = 0; s_tilde < 2; ++s_tilde) {
            for (int sb = 0; sb < 2; ++sb) {
                const double q = p_sb(sb);
                if (q == 0.0) continue;
                if (b == 1) {
                    law[key(y, p, r_a, s_tilde ^ sb ^ theta1 ^ r_a, s_tilde)] += base * 0.5 * q;
                } else {
                    const int m0 = s_tilde;
                    const int s = corrected ? (sb ^ theta1 ^ r_a) : -1;
                    if (s >= 0) {
                        law[key(y, p, r_a, m0, s)] += base * 0.5 * q;
                    } else {
                        for (int u = 0; u < 2; ++u) law[key(y, p, r_a, m0, u)] += base * 0.25 * q;
                    }
                }
            }
        }
    };

    ViewLaws out;
    const double pairs = static_cast<double>(images.pair_count());
    const double all = static_cast<double>(images.image_size());
    for (const auto &[sig, n] : signatures) {
        const std::string y = "pair" + std::to_string(sig.first) + std::to_string(sig.second);
        for (int p = 0; p < 2; ++p) {
            const int theta1 = p ? sig.second : sig.first;
            const double honest_parity = theta2 ? 0.5 : (p == 0 ? 1.0 : 0.0);
            for (int r_a = 0; r_a < 2; ++r_a) {
                const double base = 0.5 * static_cast<double>(n) / pairs * honest_parity;
                if (base > 0.0) {
                    for (const auto &[mk, q] : reply(theta1, r_a)) {
                        out.real["rA=" + std::to_string(r_a) + " y=" + y + " p=" + std::to_string(p) + " " + mk] +=
                            base * q;
                    }
                    simulated(out.corrected, base, y, p, r_a, theta1, true);
                }
                simulated(out.literal, 0.5 * static_cast<double>(n) / all * 0.5, y, p, r_a, theta1, false);
            }
        }
    }
    if (images.irregular_count() > 0) {
        const double base = 0.5 * static_cast<double>(images.irregular_count()) / all * 0.5;
        for (int p = 0; p < 2; ++p) {
            for (int r_a = 0; r_a < 2; ++r_a) simulated(out.literal, base, "irregular", p, r_a, 0, false);
        }
    }
    return out;
}

// ------------------------------------------------ malicious Alice ----------

bool extractor_totality() {
    for (int b = 0; b < 2; ++b) {
        for (int theta1 = 0; theta1 < 2; ++theta1) {
            for (int theta2 = 0; theta2 < 2; ++theta2) {
                for (int r_a = 0; r_a < 2; ++r_a) {
                    const Angle8 delta = protocols::oqfe_delta(b, theta2, r_a);
                    if (protocols::extracted_bit(delta, theta2) != b) return false;
                }
            }
        }
    }
    return true;
}

// ------------------------------------------------ backend comparison -------

RegisterLaws register_outcome_laws(const lattice::PublicKey &pk, const rsp::CollapsedImage &img) {
    const auto &params = pk.params;
    const std::size_t width = params.preimage_width();
    if (width > kMaxRegisterWidth) throw std::invalid_argument("register too wide for exact enumeration");
    const std::size_t n = std::size_t{1} << width;
    const auto reg = rsp::prepare_register(pk, img);

    // p(w) = 2^-W sum_S (-1)^{<w,S>} <X_S> over register masks S; the target stays unmeasured.
    RegisterLaws out;
    out.quantum.resize(n);
    for (std::size_t s = 0; s < n; ++s) out.quantum[s] = reg.x_string_expectation(s);
    for (std::size_t len = 1; len < n; len <<= 1) {
        for (std::size_t i = 0; i < n; i += len << 1) {
            for (std::size_t j = i; j < i + len; ++j) {
                const double u = out.quantum[j], v = out.quantum[j + len];
                out.quantum[j] = u + v;
                out.quantum[j + len] = u - v;
            }
        }
    }
    const double scale = 1.0 / static_cast<double>(n);
    for (auto &p : out.quantum) p *= scale;

    out.shortcut.assign(n, 0.0);
    Bits w(width);
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t i = 0; i < width; ++i) w[i] = static_cast<std::uint8_t>((u >> i) & 1);
        out.shortcut[pack_bits(rsp::shortcut_outcomes(params, img.pair, w))] += scale;
    }
    return out;
}

// ------------------------------------------------------- experiments -------

const char *to_string(Method m) { return m == Method::ExactEnumeration ? "exact-enumeration" : "sampling"; }

std::string ExperimentReport::to_json() const {
    nlohmann::ordered_json j;
    j["format"] = "q2pc-report/1";
    j["experiment"] = experiment;
    j["profile"] = profile;
    j["seed"] = seed;
    nlohmann::ordered_json m;
    m["kind"] = harness::to_string(method);
    if (method == Method::Sampling) {
        m["samples"] = samples;
        m["confidence"] = confidence;
    }
    j["method"] = m;
    j["statistic"] = statistic;
    j["value"] = value;
    j["threshold"] = threshold;
    j["pass"] = pass;
    j["support_size"] = support_size;
    j["counts"] = nlohmann::ordered_json::object();
    for (const auto &[k, v] : counts) j["counts"][k] = v;
    j["metrics"] = nlohmann::ordered_json::object();
    for (const auto &[k, v] : metrics) j["metrics"][k] = v;
    j["frequencies"] = nlohmann::ordered_json::object();
    for (const auto &[k, v] : frequencies) j["frequencies"][k] = v;
    j["asymptotic"] = asymptotic;
    j["scope"] = scope;
    return j.dump(2) + "\n";
}

namespace {

ExperimentReport base_report(const char *name, const ExperimentOptions &opts) {
    ExperimentReport r;
    r.experiment = name;
    r.profile = opts.profile;
    r.seed = opts.seed;
    return r;
}

Angle8 ideal_run_delta(int b, crypto::CoinSource &alice_coins, const protocols::OqfeAliceOptions &aopts) {
    IdealEnv env;
    crypto::CoinSource bc(Seed{}, "delta.bob"), mc(Seed{}, "delta.meas");
    qsim::SampledOutcomes outs(mc);
    const StateVector psi = StateVector::from_amplitudes({1, 0});
    auto run = run_inproc<protocols::OqfeAliceView, protocols::OqfeBobView>(
        SessionId{}, [&](channel::Endpoint &ep) { return protocols::oqfe_alice(ep, env.cfg, b, alice_coins, aopts); },
        [&](channel::Endpoint &ep) { return protocols::oqfe_bob(ep, env.cfg, psi, bc, outs); });
    if (!run.completed()) throw std::runtime_error("delta run failed: " + run.alice.error + run.bob.error);
    return run.alice.value->delta;
}

std::string delta_key(Angle8 d) { return "delta=" + std::to_string(d.value()); }

/// Exact law of delta given b, over (theta1, theta2) and, unless forced, r_A.
Law exact_delta_law(int b, std::optional<int> forced_r_a) {
    Law law;
    std::vector<int> masks = forced_r_a ? std::vector<int>{*forced_r_a} : std::vector<int>{0, 1};
    const double weight = 1.0 / (4.0 * static_cast<double>(masks.size()));
    for (int t1 = 0; t1 < 2; ++t1) {
        for (int t2 = 0; t2 < 2; ++t2) {
            for (int r_a : masks) {
                crypto::CoinSource unused(Seed{}, "delta.alice");
                const rsp::FourStateAngles theta{static_cast<std::uint8_t>(t1), static_cast<std::uint8_t>(t2)};
                law[delta_key(ideal_run_delta(b, unused, {theta, r_a}))] += weight;
            }
        }
    }
    return law;
}

} // namespace

ExperimentReport delta_uniformity_experiment(const ExperimentOptions &opts) {
    auto r = base_report("delta-uniformity", opts);
    r.method = opts.method.value_or(Method::ExactEnumeration);
    r.asymptotic = "The angle Alice sends is independent of her input bit; exact, no asymptotics involved.";
    r.scope = std::string("Hiding theta2 given the public key is computational and not measured. ") + kBobPrivacyScope;
    const Law unmasked0 = exact_delta_law(0, 0), unmasked1 = exact_delta_law(1, 0);
    r.metrics["tv.mask_forced_zero"] = tv_distance(unmasked0, unmasked1);

    if (r.method == Method::ExactEnumeration) {
        const Law l0 = exact_delta_law(0, std::nullopt), l1 = exact_delta_law(1, std::nullopt);
        r.statistic = "tv(delta|b=0, delta|b=1)";
        r.value = tv_distance(l0, l1);
        r.threshold = 1e-12;
        r.pass = r.value <= r.threshold;
        for (const auto &[k, p] : l0) r.frequencies["b=0 " + k] = p;
        for (const auto &[k, p] : l1) r.frequencies["b=1 " + k] = p;
        r.support_size = std::max(l0.size(), l1.size());
        r.counts["cases_per_b"] = 8;
        return r;
    }

    const std::uint64_t n = opts.trials.value_or(10000);
    r.samples = n;
    r.statistic = "max |Pr[delta=v|b] - 1/4|";
    r.threshold = 0.02;
    r.confidence = deviation_confidence(n, 0.25, r.threshold, 8);
    Law laws[2];
    double worst = 0.0;
    for (int b = 0; b < 2; ++b) {
        const auto deltas = run_trials<std::string>(n, opts.workers, [&](std::size_t i) {
            crypto::CoinSource ac(derive_seed(opts.seed, "delta", i * 2 + static_cast<std::size_t>(b)), "alice");
            return delta_key(ideal_run_delta(b, ac, {}));
        });
        laws[b] = empirical_law(deltas);
        for (int v = 0; v < 8; v += 2) {
            const auto it = laws[b].find(delta_key(Angle8(v)));
            const double p = it == laws[b].end() ? 0.0 : it->second;
            worst = std::max(worst, std::abs(p - 0.25));
            r.frequencies["b=" + std::to_string(b) + " " + delta_key(Angle8(v))] = p;
        }
        for (const auto &[k, p] : laws[b]) {
            if (k.size() > 6 && (std::stoi(k.substr(6)) % 2) != 0) worst = 1.0;
        }
    }
    r.value = worst;
    r.pass = worst < r.threshold;
    r.support_size = std::max(laws[0].size(), laws[1].size());
    r.metrics["tv.empirical"] = tv_distance(laws[0], laws[1]);
    return r;
}

namespace {

StateVector random_qubit(crypto::CoinSource &coins) {
    double g[4];
    for (int i = 0; i < 4; i += 2) {
        const double u1 = 1.0 - coins.uniform01(), u2 = coins.uniform01();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        g[i] = rad * std::cos(2 * M_PI * u2);
        g[i + 1] = rad * std::sin(2 * M_PI * u2);
    }
    const double norm = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + g[3] * g[3]);
    return StateVector::from_amplitudes({qsim::Complex(g[0] / norm, g[1] / norm), qsim::Complex(g[2] / norm, g[3] / norm)});
}

} // namespace

std::vector<std::string> input_names() { return {"zero", "one", "plus", "iplus", "random"}; }

StateVector named_input(std::string_view name, std::uint64_t seed) {
    if (name == "zero") return StateVector::from_amplitudes({1, 0});
    if (name == "one") return StateVector::from_amplitudes({0, 1});
    if (name == "plus") return StateVector::plus_state();
    if (name == "iplus") return StateVector::plus_state(Angle8(2));
    if (name == "random") {
        crypto::CoinSource coins(crypto::seed_from_u64(seed), "input.random");
        return random_qubit(coins);
    }
    throw std::invalid_argument("unknown input state: " + std::string(name));
}

ExperimentReport simulator_tv_experiment(const ExperimentOptions &opts) {
    auto r = base_report("simulator-tv", opts);
    r.method = opts.method.value_or(Method::ExactEnumeration);
    if (r.method != Method::ExactEnumeration) throw std::invalid_argument("simulator-tv runs by exact enumeration only");
    const Profile prof = profile(opts.profile);
    if (!prof.enumeration_allowed) throw std::invalid_argument("simulator-tv needs an enumerable profile");
    r.asymptotic = "Real and simulated semi-honest Alice views are statistically indistinguishable as the "
                   "security parameter grows.";
    r.scope = std::string("Keys are sampled; every other coin of both parties is enumerated and the TV is exact "
                          "per key. The threshold is an engineering tolerance. ") +
              kBobPrivacyScope;
    r.statistic = "max tv(real view, corrected simulator view)";
    r.threshold = 0.05;

    const std::uint64_t keys = opts.trials.value_or(3);
    constexpr std::uint64_t kDecodeSamples = 200;
    double worst_corrected = 0.0, worst_literal = 0.0, irregular = 0.0;
    std::uint64_t cases = 0, violations = 0, inversion_failures = 0, hp_zero = 0;
    for (std::uint64_t k = 0; k < keys; ++k) {
        crypto::CoinSource kc(derive_seed(opts.seed, "simulator.key", k), "alice");
        const AliceKey key = sample_alice_key(prof.params, kc);
        const ImageTable images(key.kp);
        irregular += static_cast<double>(images.irregular_count()) / static_cast<double>(images.image_size());
        if (key.kp.hp == 0) ++hp_zero;
        for (const auto &name : input_names()) {
            const StateVector psi = named_input(name, opts.seed);
            for (int b = 0; b < 2; ++b) {
                const ViewLaws laws = exact_view_laws(key.kp, images, b, psi);
                const double tc = tv_distance(laws.real, laws.corrected);
                const double tl = tv_distance(laws.real, laws.literal);
                worst_corrected = std::max(worst_corrected, tc);
                worst_literal = std::max(worst_literal, tl);
                r.metrics["tv.corrected.key" + std::to_string(k) + "." + name + ".b" + std::to_string(b)] = tc;
                r.metrics["tv.literal.key" + std::to_string(k) + "." + name + ".b" + std::to_string(b)] = tl;
                r.support_size = std::max(r.support_size, laws.real.size());
                ++cases;
            }
        }
        crypto::CoinSource sc(derive_seed(opts.seed, "simulator.samples", k), "simulator");
        for (std::uint64_t i = 0; i < kDecodeSamples; ++i) {
            const int s_b = sc.bit();
            const auto v = simulate_semi_honest_alice(1, s_b, key, sc, SimulatorVariant::Literal, &images);
            if (v.inversion_failed) ++inversion_failures;
            if ((v.s_bar ^ v.theta1 ^ v.r_a ^ v.m0) != s_b) ++violations;
        }
    }
    r.value = worst_corrected;
    r.metrics["tv.corrected.max"] = worst_corrected;
    r.metrics["tv.literal.max"] = worst_literal;
    r.metrics["image.irregular_fraction.mean"] = keys ? irregular / static_cast<double>(keys) : 0.0;
    r.counts["keys"] = keys;
    r.counts["keys.hp0"] = hp_zero;
    r.counts["cases"] = cases;
    r.counts["decode_identity.samples"] = keys * kDecodeSamples;
    r.counts["decode_identity.violations"] = violations;
    r.counts["literal.inversion_failures"] = inversion_failures;
    r.pass = keys > 0 && worst_corrected <= r.threshold && violations == 0;
    return r;
}

ExperimentReport extractor_experiment(const ExperimentOptions &opts) {
    auto r = base_report("extractor", opts);
    r.method = opts.method.value_or(Method::Sampling);
    const Profile prof = profile(opts.profile);
    r.asymptotic = "The extracted bit equals the bit Alice's delta encodes, and cheating Alices are stopped "
                   "before extraction could go wrong.";
    r.scope = std::string("Sessions run over real remote state preparation with coin-tossed keys; extraction "
                          "uses the escrowed key witness and the transcript only. ") +
              kBobPrivacyScope;
    r.statistic = "correct extractions / honest sessions";
    r.threshold = 1.0;
    const std::uint64_t n = opts.trials.value_or(100);
    r.samples = n;
    r.confidence = 1.0;

    RunConfig base;
    base.params = prof.params;
    base.backend = rsp::quantum_supported(prof.params) ? rsp::Backend::Quantum : rsp::Backend::Shortcut;

    struct Outcome {
        protocols::Extraction::Kind kind;
        bool correct = false;
        bool completed = false;
    };
    const auto session = [&](std::size_t i, const char *tag, const protocols::MalAliceOptions &aopts, int b) {
        const SessionSeeds seeds{derive_seed(opts.seed, tag, i)};
        zk::IdealZk zk(seeds.zk_key());
        RunConfig cfg = base;
        cfg.zk = &zk;
        auto ac = seeds.alice(), bc = seeds.bob(), mc = seeds.bob_measurements();
        qsim::SampledOutcomes outs(mc);
        const StateVector psi = StateVector::plus_state();
        auto run = run_inproc<protocols::MalAliceView, protocols::OqfeBobView>(
            seeds.session(), [&](channel::Endpoint &ep) { return protocols::oqfe_mal_alice(ep, cfg, b, ac, aopts); },
            [&](channel::Endpoint &ep) { return protocols::oqfe_mal_bob(ep, cfg, psi, bc, outs); });
        const auto ex = protocols::extract_alice_input(run.bob_transcript, cfg);
        return Outcome{ex.kind, ex.kind == protocols::Extraction::Kind::Extracted && ex.b_star == b, run.completed()};
    };

    const auto honest = run_trials<Outcome>(n, opts.workers, [&](std::size_t i) {
        protocols::MalAliceOptions aopts;
        if (i % 3 == 1) aopts.r_a = 0;
        if (i % 3 == 2) aopts.r_a = 1;
        return session(i, "extractor.honest", aopts, static_cast<int>(i % 2));
    });
    std::uint64_t correct = 0, biased = 0, biased_correct = 0;
    for (std::size_t i = 0; i < honest.size(); ++i) {
        if (honest[i].correct) ++correct;
        if (i % 3 != 0) {
            ++biased;
            if (honest[i].correct) ++biased_correct;
        }
    }

    const std::uint64_t cheat_n = std::max<std::uint64_t>(5, n / 10);
    std::uint64_t silent_wrong = 0;
    for (auto strategy : {protocols::AliceStrategy::BadKey, protocols::AliceStrategy::InconsistentCommitment}) {
        const std::string name = strategy == protocols::AliceStrategy::BadKey ? "bad_key" : "inconsistent_commitment";
        const auto runs = run_trials<Outcome>(cheat_n, opts.workers, [&](std::size_t i) {
            protocols::MalAliceOptions aopts;
            aopts.strategy = strategy;
            return session(i, ("extractor." + name).c_str(), aopts, static_cast<int>(i % 2));
        });
        std::uint64_t aborted = 0, flagged = 0, extracted = 0;
        for (const auto &o : runs) {
            if (o.kind == protocols::Extraction::Kind::Aborted) ++aborted;
            if (o.kind == protocols::Extraction::Kind::Flagged) ++flagged;
            if (o.kind == protocols::Extraction::Kind::Extracted) {
                ++extracted;
                if (!o.correct) ++silent_wrong;
            }
        }
        r.counts["cheat." + name + ".sessions"] = cheat_n;
        r.counts["cheat." + name + ".aborted"] = aborted;
        r.counts["cheat." + name + ".flagged"] = flagged;
        r.counts["cheat." + name + ".extracted"] = extracted;
    }
    const bool totality = extractor_totality();
    r.counts["honest.sessions"] = n;
    r.counts["honest.correct"] = correct;
    r.counts["honest.biased_mask.sessions"] = biased;
    r.counts["honest.biased_mask.correct"] = biased_correct;
    r.counts["cheat.silent_wrong"] = silent_wrong;
    r.counts["totality.combinations"] = 16;
    r.counts["totality.ok"] = totality ? 1 : 0;
    r.value = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
    r.frequencies["correct"] = r.value;
    r.support_size = 2;
    r.pass = n > 0 && correct == n && silent_wrong == 0 && totality;
    return r;
}

ExperimentReport backend_equivalence_experiment(const ExperimentOptions &opts) {
    auto r = base_report("backend-eq", opts);
    const Profile prof = profile(opts.profile);
    if (!rsp::quantum_supported(prof.params))
        throw std::invalid_argument("backend-eq needs a profile the quantum backend supports");
    r.method = opts.method.value_or(prof.enumeration_allowed ? Method::ExactEnumeration : Method::Sampling);
    r.asymptotic = "Quantum Bob and shortcut Bob induce the same transcript law.";
    r.scope = std::string("Both backends draw the image point through the same collapse routine (preimages found "
                          "with the trapdoor), so the image law is shared; the register-outcome law is compared. ") +
              kBobPrivacyScope;

    if (r.method == Method::ExactEnumeration) {
        if (prof.params.preimage_width() > kMaxRegisterWidth)
            throw std::invalid_argument("backend-eq exact mode needs a register of at most 24 qubits");
        r.statistic = "max tv(quantum register law, shortcut register law)";
        r.threshold = 1e-12;
        const std::uint64_t keys = opts.trials.value_or(2);
        double worst = 0.0;
        std::uint64_t hp_zero = 0;
        for (std::uint64_t k = 0; k < keys; ++k) {
            crypto::CoinSource kc(derive_seed(opts.seed, "backend.key", k), "alice");
            const auto kp = lattice::gen(prof.params, kc);
            if (kp.hp == 0) ++hp_zero;
            crypto::CoinSource bc(derive_seed(opts.seed, "backend.image", k), "bob");
            const auto img = rsp::collapse(kp.pk, bc);
            const RegisterLaws laws = register_outcome_laws(kp.pk, img);
            double sum = 0.0, mass_q = 0.0, mass_s = 0.0;
            std::size_t support = 0;
            for (std::size_t w = 0; w < laws.quantum.size(); ++w) {
                sum += std::abs(laws.quantum[w] - laws.shortcut[w]);
                mass_q += laws.quantum[w];
                mass_s += laws.shortcut[w];
                if (laws.quantum[w] > 1e-15) ++support;
            }
            const double tv = 0.5 * sum;
            worst = std::max(worst, tv);
            r.metrics["tv.key" + std::to_string(k)] = tv;
            r.metrics["mass.quantum.key" + std::to_string(k)] = mass_q;
            r.metrics["mass.shortcut.key" + std::to_string(k)] = mass_s;
            r.support_size = std::max(r.support_size, support);
        }
        r.counts["keys"] = keys;
        r.counts["keys.hp0"] = hp_zero;
        r.counts["register_width"] = prof.params.preimage_width();
        r.value = worst;
        r.pass = keys > 0 && worst <= r.threshold;
        return r;
    }

    const std::uint64_t n = opts.trials.value_or(10000);
    r.samples = n;
    r.statistic = "tv(empirical decoded-angle laws)";
    r.threshold = 0.03;
    r.confidence = deviation_confidence(n, 0.25, r.threshold / 4.0, 8);
    crypto::CoinSource kc(derive_seed(opts.seed, "backend.key", 0), "alice");
    const auto kp = lattice::gen(prof.params, kc);
    const rsp::PreimageOracle invert = [&](const ZqVector &y) { return lattice::invert_all(kp, y); };
    Law laws[2];
    for (int backend = 0; backend < 2; ++backend) {
        const auto decoded = run_trials<std::string>(n, opts.workers, [&](std::size_t i) {
            crypto::CoinSource bc(derive_seed(opts.seed, backend ? "backend.shortcut" : "backend.quantum", i), "bob");
            qsim::SampledOutcomes outs(bc);
            const auto out = backend ? rsp::bob_shortcut(kp.pk, bc, invert) : rsp::bob_quantum(kp.pk, bc, outs, invert);
            const auto a = rsp::alice_decode(kp, out.meas.y, out.meas.w);
            return two_bits("theta1", a.theta1, "theta2", a.theta2);
        });
        laws[backend] = empirical_law(decoded);
        for (const auto &[k, p] : laws[backend]) r.frequencies[std::string(backend ? "shortcut " : "quantum ") + k] = p;
    }
    r.value = tv_distance(laws[0], laws[1]);
    r.support_size = std::max(laws[0].size(), laws[1].size());
    r.pass = r.value < r.threshold;
    return r;
}

std::vector<std::string> experiment_names() { return {"delta-uniformity", "simulator-tv", "extractor", "backend-eq"}; }

ExperimentReport run_experiment(std::string_view name, const ExperimentOptions &opts) {
    if (name == "delta-uniformity") return delta_uniformity_experiment(opts);
    if (name == "simulator-tv") return simulator_tv_experiment(opts);
    if (name == "extractor") return extractor_experiment(opts);
    if (name == "backend-eq") return backend_equivalence_experiment(opts);
    throw std::invalid_argument("unknown experiment: " + std::string(name));
}

} // namespace q2pc::harness
