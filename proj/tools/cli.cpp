#include "cli.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "q2pc/compilers.hpp"
#include "q2pc/harness.hpp"
#include "q2pc/mbqc.hpp"
#include "q2pc/protocols.hpp"
#include "q2pc/session.hpp"

namespace q2pc::cli {

namespace {

using channel::Message;
using channel::Role;
using qsim::Bits;
using qsim::StateVector;

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string profile;
    std::uint64_t seed = 1;
    std::string transport = "inproc";
    std::string role;
    std::string listen;
    std::string connect;
    std::string transcript;
    std::string replay;
    std::string rsp = "auto";
    std::string backend = "auto";
};

void add_common(CLI::App *app, Common &c, bool two_process) {
    app->add_option("--profile", c.profile, "Parameter profile: tiny, small or demo (default: $Q2PC_PROFILE, else tiny)")
        ->check(CLI::IsMember(harness::profile_names()));
    app->add_option("--seed", c.seed, "Seed every party's randomness derives from")->capture_default_str();
    app->add_option("--rsp", c.rsp, "Remote state preparation: real (lattice), ideal (trusted dealer) or auto")
        ->check(CLI::IsMember({"auto", "real", "ideal"}))
        ->capture_default_str();
    app->add_option("--backend", c.backend, "Bob's RSP backend: quantum, shortcut or auto")
        ->check(CLI::IsMember({"auto", "quantum", "shortcut"}))
        ->capture_default_str();
    app->add_option("--transcript", c.transcript, "Write the transcript (NDJSON) here");
    app->add_option("--replay", c.replay, "Compare this run's transcript against a recorded one");
    if (!two_process) return;
    app->add_option("--transport", c.transport, "inproc runs both parties; tcp runs one role")
        ->check(CLI::IsMember({"inproc", "tcp"}))
        ->capture_default_str();
    app->add_option("--role", c.role, "Party this process plays over tcp")->check(CLI::IsMember({"alice", "bob"}));
    app->add_option("--listen", c.listen, "host:port to accept the peer on");
    app->add_option("--connect", c.connect, "host:port of the listening peer");
}

/// Everything one run's parties share: parameters, functionalities and seeds.
struct Env {
    harness::Profile prof;
    SessionSeeds seeds;
    zk::IdealZk zk;
    rsp::IdealDealer dealer;
    protocols::RunConfig cfg;

    explicit Env(const Common &c)
        : prof(harness::profile(c.profile)), seeds(SessionSeeds::from_u64(c.seed)), zk(seeds.zk_key()) {
        cfg.params = prof.params;
        cfg.zk = &zk;
        const bool searchable = lattice::public_search_feasible(prof.params);
        const std::string mode = c.rsp == "auto" ? (searchable ? "real" : "ideal") : c.rsp;
        if (mode == "real" && !searchable)
            throw UsageError("--rsp real needs a profile with public preimage search (tiny or small)");
        if (mode == "ideal") {
            if (c.transport == "tcp") throw UsageError("--rsp ideal needs both parties in one process");
            cfg.rsp_mode = protocols::RspMode::Ideal;
            cfg.dealer = &dealer;
        }
        const bool quantum = rsp::quantum_supported(prof.params);
        if (c.backend == "quantum" && !quantum) throw UsageError("--backend quantum is not supported at this profile");
        cfg.backend = (c.backend == "shortcut" || (c.backend == "auto" && !quantum)) ? rsp::Backend::Shortcut
                                                                                    : rsp::Backend::Quantum;
    }
};

void resolve_profile(Common &c) {
    if (c.profile.empty()) c.profile = harness::default_profile_name();
    harness::profile(c.profile);
}

void check_transport(const Common &c) {
    if (c.transport == "inproc") {
        if (!c.role.empty() || !c.listen.empty() || !c.connect.empty())
            throw UsageError("--role/--listen/--connect need --transport tcp");
        return;
    }
    if (c.role.empty()) throw UsageError("--transport tcp needs --role");
    if (c.listen.empty() == c.connect.empty()) throw UsageError("--transport tcp needs exactly one of --listen, --connect");
}

std::unique_ptr<channel::Link> tcp_link(const Common &c) {
    if (!c.listen.empty()) {
        const auto [host, port] = channel::parse_host_port(c.listen);
        return channel::tcp_listen(host, port);
    }
    const auto [host, port] = channel::parse_host_port(c.connect);
    return channel::tcp_connect(host, port);
}

std::string describe(const ProtocolAbort &a) {
    std::string s = "abort phase=" + a.phase();
    if (a.site()) s += " site=" + to_string(*a.site());
    return s + " cause=" + a.cause();
}

template <typename T> std::string describe(const PartyResult<T> &r) {
    if (r.abort) return describe(*r.abort);
    return "error " + r.error;
}

/// Results of whichever parties ran in this process.
template <typename A, typename B> struct Execution {
    std::optional<PartyResult<A>> alice;
    std::optional<PartyResult<B>> bob;
    std::vector<Message> transcript;

    bool ok() const { return (!alice || alice->ok()) && (!bob || bob->ok()); }
};

using Mutation = std::function<void(Message &)>;

template <typename A, typename B, typename FA, typename FB>
Execution<A, B> execute(const Common &c, const SessionId &session, FA &&alice_fn, FB &&bob_fn,
                        const Mutation &bob_mutation = {}) {
    Execution<A, B> ex;
    const auto wrap = [&](std::unique_ptr<channel::Link> link) -> std::unique_ptr<channel::Link> {
        if (!bob_mutation) return link;
        return std::make_unique<channel::MutatingLink>(std::move(link), bob_mutation);
    };
    if (c.transport == "inproc") {
        auto [alice_link, bob_link] = channel::make_inproc_pair();
        channel::Endpoint a(Role::Alice, session, std::move(alice_link));
        channel::Endpoint b(Role::Bob, session, wrap(std::move(bob_link)));
        auto run = run_pair<A, B>(a, b, alice_fn, bob_fn);
        ex.alice = std::move(run.alice);
        ex.bob = std::move(run.bob);
        ex.transcript = std::move(run.alice_transcript);
        return ex;
    }
    if (c.role == "alice") {
        channel::Endpoint ep(Role::Alice, session, tcp_link(c));
        ex.alice = run_party<A>(ep, alice_fn);
        ex.transcript = ep.transcript();
    } else {
        channel::Endpoint ep(Role::Bob, session, wrap(tcp_link(c)));
        ex.bob = run_party<B>(ep, bob_fn);
        ex.transcript = ep.transcript();
    }
    return ex;
}

/// Writes and compares the transcript; false when a replay diverged.
bool finish_transcript(const Common &c, const std::string &command, const std::string &mode, const SessionId &session,
                       const std::vector<Message> &messages, std::ostream &out) {
    channel::Transcript t{{session, c.profile, mode, command, c.seed}, messages};
    out << "messages: " << messages.size() << "\n";
    if (!c.transcript.empty()) {
        t.save(c.transcript);
        out << "transcript: " << c.transcript << "\n";
    }
    if (c.replay.empty()) return true;
    const auto recorded = channel::Transcript::load(c.replay);
    if (const auto d = channel::first_divergence(recorded.messages, messages)) {
        out << "replay: diverges at seq " << d->seq << ": " << d->reason << "\n";
        return false;
    }
    out << "replay: identical\n";
    return true;
}

StateVector read_input_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read input file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw UsageError("input file is not JSON: " + std::string(e.what()));
    }
    if (!j.is_object() || !j.contains("amplitudes") || !j["amplitudes"].is_array())
        throw UsageError("input file needs {\"amplitudes\": [[re, im], ...]}");
    std::vector<qsim::Complex> amps;
    for (const auto &a : j["amplitudes"]) {
        if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
            throw UsageError("each amplitude is [re, im]");
        amps.emplace_back(a[0].get<double>(), a[1].get<double>());
    }
    try {
        return StateVector::from_amplitudes(std::move(amps));
    } catch (const std::exception &e) {
        throw UsageError(std::string("input file: ") + e.what());
    }
}

StateVector named(const std::string &name, std::uint64_t seed) {
    try {
        return harness::named_input(name, seed);
    } catch (const std::invalid_argument &e) {
        throw UsageError(e.what());
    }
}

/// One named state per row (a single name is used for every row), or the file's register.
StateVector register_input(const std::vector<std::string> &names, const std::string &file, std::size_t rows,
                           std::uint64_t seed) {
    StateVector s;
    if (!file.empty()) {
        s = read_input_file(file);
    } else {
        const std::vector<std::string> list = names.empty() ? std::vector<std::string>{"zero"} : names;
        if (list.size() != 1 && list.size() != rows) throw UsageError("give one --input or one per pattern row");
        s = named(list[0], seed);
        for (std::size_t i = 1; i < rows; ++i) s = s.tensor(named(list.size() == 1 ? list[0] : list[i], seed + i));
    }
    if (s.num_qubits() != rows) throw UsageError("input has the wrong number of qubits for the pattern");
    return s;
}

mbqc::Pattern read_pattern(const std::string &source) {
    if (source.empty()) throw UsageError("--pattern is required");
    for (const auto &name : mbqc::library_names())
        if (source == name) return mbqc::library_pattern(source);
    try {
        return mbqc::load_pattern(source);
    } catch (const std::exception &e) {
        throw UsageError("cannot load pattern " + source + ": " + e.what());
    }
}

// ----------------------------------------------------------------- oqfe ----

struct OqfeArgs {
    Common common;
    std::string mode = "sh";
    int b = 0;
    std::string input = "zero";
    std::string input_file;
    std::string strategy = "honest";
    std::optional<int> r_a;
};

int cmd_oqfe(OqfeArgs &a, std::ostream &out) {
    resolve_profile(a.common);
    check_transport(a.common);
    const bool mal = a.mode == "mal";
    if (mal && a.common.rsp == "ideal") throw UsageError("--mode mal extracts from real RSP keys; drop --rsp ideal");
    if (!mal && a.strategy != "honest") throw UsageError("--strategy applies to --mode mal");
    Env env(a.common);
    if (mal && env.cfg.rsp_mode == protocols::RspMode::Ideal)
        throw UsageError("--mode mal needs a profile with real RSP (tiny or small)");
    const StateVector psi = a.input_file.empty() ? named(a.input, a.common.seed) : read_input_file(a.input_file);
    if (psi.num_qubits() != 1) throw UsageError("OQFE input is one qubit");

    auto ac = env.seeds.alice(), bc = env.seeds.bob(), mc = env.seeds.bob_measurements();
    qsim::SampledOutcomes outs(mc);
    out << "protocol: oqfe " << (mal ? "malicious-alice" : "semi-honest") << "\n";
    out << "profile: " << a.common.profile << " rsp=" << protocols::to_string(env.cfg.rsp_mode)
        << " backend=" << rsp::to_string(env.cfg.backend) << " seed=" << a.common.seed << "\n";

    bool ok = false;
    std::vector<Message> transcript;
    if (!mal) {
        protocols::OqfeAliceOptions opts;
        opts.r_a = a.r_a;
        auto ex = execute<protocols::OqfeAliceView, protocols::OqfeBobView>(
            a.common, env.seeds.session(),
            [&](channel::Endpoint &ep) { return protocols::oqfe_alice(ep, env.cfg, a.b, ac, opts); },
            [&](channel::Endpoint &ep) { return protocols::oqfe_bob(ep, env.cfg, psi, bc, outs); });
        if (ex.alice) out << "alice: " << (ex.alice->ok() ? "s_b=" + std::to_string(ex.alice->value->s_b) : describe(*ex.alice)) << "\n";
        if (ex.bob) out << "bob: " << (ex.bob->ok() ? "done" : describe(*ex.bob)) << "\n";
        ok = ex.ok();
        transcript = std::move(ex.transcript);
    } else {
        protocols::MalAliceOptions opts;
        opts.r_a = a.r_a;
        if (a.strategy == "bad-key") opts.strategy = protocols::AliceStrategy::BadKey;
        if (a.strategy == "inconsistent-commitment") opts.strategy = protocols::AliceStrategy::InconsistentCommitment;
        auto ex = execute<protocols::MalAliceView, protocols::OqfeBobView>(
            a.common, env.seeds.session(),
            [&](channel::Endpoint &ep) { return protocols::oqfe_mal_alice(ep, env.cfg, a.b, ac, opts); },
            [&](channel::Endpoint &ep) { return protocols::oqfe_mal_bob(ep, env.cfg, psi, bc, outs); });
        if (ex.alice)
            out << "alice: " << (ex.alice->ok() ? "s_b=" + std::to_string(ex.alice->value->oqfe.s_b) : describe(*ex.alice)) << "\n";
        if (ex.bob) {
            out << "bob: " << (ex.bob->ok() ? "done" : describe(*ex.bob)) << "\n";
            const auto extraction = protocols::extract_alice_input(ex.transcript, env.cfg);
            out << "extractor: " << protocols::to_string(extraction.kind);
            if (extraction.kind == protocols::Extraction::Kind::Extracted) out << " b*=" << extraction.b_star;
            if (!extraction.reason.empty()) out << " (" << extraction.reason << ")";
            out << "\n";
        }
        ok = ex.ok();
        transcript = std::move(ex.transcript);
    }
    const bool same = finish_transcript(a.common, "oqfe run", a.mode, env.seeds.session(), transcript, out);
    return ok && same ? kOk : kRejected;
}

// ----------------------------------------------------------------- q2pc ----

struct PatternArgs {
    Common common;
    std::string pattern;
    std::vector<std::string> inputs;
    std::string input_file;
    std::string deviation = "none";
};

int cmd_q2pc(PatternArgs &a, std::ostream &out) {
    resolve_profile(a.common);
    check_transport(a.common);
    Env env(a.common);
    const auto pattern = read_pattern(a.pattern);
    const auto input = register_input(a.inputs, a.input_file, pattern.n, a.common.seed);
    auto ac = env.seeds.alice(), bc = env.seeds.bob(), mc = env.seeds.bob_measurements();
    qsim::SampledOutcomes outs(mc);
    out << "protocol: q2pc pattern=" << pattern.name << " rows=" << pattern.n << " columns=" << pattern.m << "\n";
    out << "profile: " << a.common.profile << " rsp=" << protocols::to_string(env.cfg.rsp_mode)
        << " backend=" << rsp::to_string(env.cfg.backend) << " seed=" << a.common.seed << "\n";
    auto ex = execute<protocols::Q2pcAliceView, protocols::Q2pcBobView>(
        a.common, env.seeds.session(), [&](channel::Endpoint &ep) { return protocols::q2pc_alice(ep, env.cfg, pattern, ac); },
        [&](channel::Endpoint &ep) {
            return protocols::q2pc_bob(ep, env.cfg, protocols::public_shape(pattern), input, bc, outs);
        });
    if (ex.alice) out << "alice: " << (ex.alice->ok() ? "output=" + harness::bits_key(ex.alice->value->output) : describe(*ex.alice)) << "\n";
    if (ex.bob) out << "bob: " << (ex.bob->ok() ? "measurements=" + std::to_string(ex.bob->value->measurements) : describe(*ex.bob)) << "\n";
    const bool same = finish_transcript(a.common, "q2pc run", "semi-honest", env.seeds.session(), ex.transcript, out);
    return ex.ok() && same ? kOk : kRejected;
}

compilers::FullSimDeviation parse_deviation(const std::string &s) {
    using D = compilers::FullSimDeviation;
    for (auto d : {D::None, D::WrongDescription, D::InconsistentMessages, D::BadOpening, D::GarbageCommitment})
        if (s == compilers::to_string(d)) return d;
    throw UsageError("unknown deviation " + s);
}

std::vector<std::string> deviation_names() {
    using D = compilers::FullSimDeviation;
    std::vector<std::string> names;
    for (auto d : {D::None, D::WrongDescription, D::InconsistentMessages, D::BadOpening, D::GarbageCommitment})
        names.emplace_back(compilers::to_string(d));
    return names;
}

int cmd_fullsim(PatternArgs &a, std::ostream &out) {
    resolve_profile(a.common);
    check_transport(a.common);
    Env env(a.common);
    const auto pattern = read_pattern(a.pattern);
    const auto input = register_input(a.inputs, a.input_file, pattern.n, a.common.seed);
    const auto deviation = parse_deviation(a.deviation);

    const Bytes actual = compilers::describe_state(input);
    Bytes committed = actual;
    std::optional<Bytes> run_description;
    if (deviation == compilers::FullSimDeviation::WrongDescription) {
        StateVector basis(pattern.n);
        if (std::abs(basis.amplitudes()[0] - input.amplitudes()[0]) < 1e-9) {
            std::vector<qsim::Complex> ones(std::size_t{1} << pattern.n, 0.0);
            ones.back() = 1.0;
            basis = StateVector::from_amplitudes(ones);
        }
        committed = compilers::describe_state(basis);
        run_description = actual;
    }
    const Mutation mutation =
        deviation == compilers::FullSimDeviation::InconsistentMessages ? compilers::flip_first_outcome() : Mutation{};

    auto ac = env.seeds.alice(), mc = env.seeds.bob_measurements();
    qsim::SampledOutcomes outs(mc);
    out << "protocol: full-simulation compiler over q2pc pattern=" << pattern.name << " deviation=" << a.deviation << "\n";
    out << "profile: " << a.common.profile << " rsp=" << protocols::to_string(env.cfg.rsp_mode)
        << " backend=" << rsp::to_string(env.cfg.backend) << " seed=" << a.common.seed << "\n";
    auto ex = execute<compilers::FullSimAliceView, compilers::FullSimBobView>(
        a.common, env.seeds.session(), [&](channel::Endpoint &ep) { return compilers::fullsim_alice(ep, env.cfg, pattern, ac); },
        [&](channel::Endpoint &ep) {
            return compilers::fullsim_bob(ep, env.cfg, protocols::public_shape(pattern), committed, env.seeds.root, outs,
                                          deviation, run_description);
        },
        mutation);
    if (ex.alice)
        out << "alice: " << (ex.alice->ok() ? "output=" + harness::bits_key(ex.alice->value->inner.output) : describe(*ex.alice)) << "\n";
    if (ex.bob) out << "bob: " << (ex.bob->ok() ? "done" : describe(*ex.bob)) << "\n";
    const bool same = finish_transcript(a.common, "compile fullsim", a.deviation, env.seeds.session(), ex.transcript, out);
    return ex.ok() && same ? kOk : kRejected;
}

// --------------------------------------------------------------- zkpoqk ----

struct ZkpoqkArgs {
    Common common;
    std::size_t rounds = 4;
    std::size_t bits = 8;
    std::string strategy = "honest";
};

int cmd_zkpoqk(ZkpoqkArgs &a, std::ostream &out) {
    resolve_profile(a.common);
    if (a.bits == 0 || a.bits > 16) throw UsageError("--bits must be in 1..16");
    const auto seeds = SessionSeeds::from_u64(a.common.seed);
    zk::IdealZk zk(seeds.zk_key());
    compilers::ProverStrategy strategy = compilers::ProverStrategy::Honest;
    if (a.strategy == "wrong-key") strategy = compilers::ProverStrategy::WrongKey;
    if (a.strategy == "random-ciphertexts") strategy = compilers::ProverStrategy::RandomCiphertexts;

    crypto::CoinSource wc(seeds.root, "zkpoqk.witness");
    Bits w(a.bits);
    for (auto &bit : w) bit = static_cast<std::uint8_t>(wc.bit());
    std::vector<qsim::Complex> amps(std::size_t{1} << a.bits, 0.0);
    std::size_t index = 0;
    for (std::size_t i = 0; i < w.size(); ++i) index |= std::size_t(w[i]) << i;
    amps[index] = 1.0;
    const StateVector witness = StateVector::from_amplitudes(amps);
    const compilers::ZkpoqkPublic pub{compilers::toy_target(w), a.bits, a.rounds};

    auto pc = seeds.bob(), mc = seeds.bob_measurements();
    qsim::SampledOutcomes outs(mc);
    out << "protocol: zkpoqk rounds=" << a.rounds << " bits=" << a.bits << " strategy=" << a.strategy << "\n";
    out << "target: " << to_hex(pub.target) << "\n";
    auto ex = execute<compilers::ZkpoqkVerifierView, bool>(
        a.common, seeds.session(),
        [&](channel::Endpoint &ep) { return compilers::zkpoqk_verifier(ep, zk, pub, seeds.root); },
        [&](channel::Endpoint &ep) {
            compilers::zkpoqk_prover(ep, zk, pub, witness, pc, outs, strategy);
            return true;
        });
    const bool accepted = ex.alice && ex.alice->ok();
    out << "verifier: " << (accepted ? "accept" : describe(*ex.alice)) << "\n";
    bool extracted = true;
    if (accepted) {
        const Bits got = compilers::zkpoqk_extract(ex.transcript, zk, pub);
        extracted = got == w;
        out << "extractor: witness=" << harness::bits_key(got) << (extracted ? " (matches)" : " (MISMATCH)") << "\n";
        const Bytes opening = compilers::toy_opening(w);
        bool clean = true;
        for (const auto &m : ex.transcript) {
            if (std::search(m.payload.begin(), m.payload.end(), opening.begin(), opening.end()) != m.payload.end())
                clean = false;
        }
        out << "cleartext-scan: " << (clean ? "clean" : "opening found in clear") << "\n";
        extracted = extracted && clean;
    }
    const bool same = finish_transcript(a.common, "zkpoqk demo", a.strategy, seeds.session(), ex.transcript, out);
    return accepted && extracted && same ? kOk : kRejected;
}

// ----------------------------------------------------------- experiment ----

struct ExperimentArgs {
    std::string name;
    std::string profile;
    std::optional<std::uint64_t> trials;
    std::uint64_t seed = 1;
    std::string method;
    std::size_t workers = 0;
    std::string out_path;
};

int cmd_experiment(ExperimentArgs &a, std::ostream &out) {
    harness::ExperimentOptions opts;
    opts.profile = a.profile.empty() ? harness::default_profile_name() : a.profile;
    opts.trials = a.trials;
    opts.seed = a.seed;
    opts.workers = a.workers;
    if (a.method == "exact") opts.method = harness::Method::ExactEnumeration;
    if (a.method == "sampling") opts.method = harness::Method::Sampling;
    harness::ExperimentReport report;
    try {
        report = harness::run_experiment(a.name, opts);
    } catch (const std::invalid_argument &e) {
        throw UsageError(e.what());
    }
    const std::string json = report.to_json();
    if (a.out_path.empty()) {
        out << json;
    } else {
        std::ofstream f(a.out_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + a.out_path);
        f << json;
        out << "experiment: " << report.experiment << " profile=" << report.profile << " seed=" << report.seed << "\n";
        out << report.statistic << " = " << nlohmann::json(report.value).dump() << " (threshold "
            << nlohmann::json(report.threshold).dump() << ")\n";
        out << "result: " << (report.pass ? "pass" : "fail") << "\n";
        out << "report: " << a.out_path << "\n";
    }
    return report.pass ? kOk : kRejected;
}

// -------------------------------------------------------------- profile ----

int cmd_profile_show(const std::string &name, std::ostream &out) {
    const auto p = harness::profile(name.empty() ? harness::default_profile_name() : name);
    nlohmann::ordered_json j;
    j["name"] = p.name;
    j["n"] = p.params.n;
    j["m"] = p.params.m;
    j["q"] = p.params.q;
    j["sigma0"] = p.params.sigma0;
    j["sigma"] = p.params.sigma;
    j["trapdoor_row_weight"] = p.params.trapdoor_row_weight;
    j["preimage_width"] = p.params.preimage_width();
    j["domain_size"] = p.params.domain_size();
    j["dense_qubits"] = p.dense_qubits;
    j["enumeration_allowed"] = p.enumeration_allowed;
    j["public_preimage_search"] = lattice::public_search_feasible(p.params);
    j["quantum_backend"] = rsp::quantum_supported(p.params);
    out << j.dump(2) << "\n";
    return kOk;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"q2pc: two-party computation with a classical Alice and a quantum Bob, run on simulated qubits.\n"
                 "All randomness derives from --seed; the same arguments give byte-identical output.\n"
                 "Exit codes: 0 success, 1 abort/rejection/failed experiment, 2 usage error.",
                 "q2pc"};
    app.require_subcommand(1);

    OqfeArgs oqfe_args;
    auto *oqfe = app.add_subcommand("oqfe", "Oblivious quantum function evaluation (OQFE): Alice learns M_Z Rx(-b pi/2) "
                                            "applied to Bob's qubit without revealing b");
    oqfe->require_subcommand(1);
    auto *oqfe_run = oqfe->add_subcommand("run", "Run one OQFE session; --mode mal adds coin-tossed keys, Alice's key "
                                                 "proof and the input extractor");
    add_common(oqfe_run, oqfe_args.common, true);
    oqfe_run->add_option("--mode", oqfe_args.mode, "sh (semi-honest) or mal (malicious Alice)")
        ->check(CLI::IsMember({"sh", "mal"}))
        ->capture_default_str();
    oqfe_run->add_option("--b", oqfe_args.b, "Alice's input bit")->check(CLI::Range(0, 1))->capture_default_str();
    oqfe_run->add_option("--input", oqfe_args.input, "Bob's qubit: zero, one, plus, iplus or random")
        ->check(CLI::IsMember(harness::input_names()))
        ->capture_default_str();
    oqfe_run->add_option("--input-file", oqfe_args.input_file, "Bob's qubit as JSON {\"amplitudes\": [[re, im], [re, im]]}");
    oqfe_run->add_option("--strategy", oqfe_args.strategy, "Malicious Alice: honest, bad-key or inconsistent-commitment")
        ->check(CLI::IsMember({"honest", "bad-key", "inconsistent-commitment"}))
        ->capture_default_str();
    oqfe_run->add_option("--r-a", oqfe_args.r_a, "Force Alice's mask bit (biased Alice)")->check(CLI::Range(0, 1));

    PatternArgs q2pc_args;
    auto *q2pc = app.add_subcommand("q2pc", "Quantum two-party computation (Q2PC): Alice's blind MBQC pattern on Bob's "
                                            "input register, prepared through remote state preparation");
    q2pc->require_subcommand(1);
    auto *q2pc_run = q2pc->add_subcommand("run", "Run one Q2PC session; Alice prints the output bits");
    add_common(q2pc_run, q2pc_args.common, true);
    q2pc_run->add_option("--pattern", q2pc_args.pattern, "Pattern JSON file or shipped name (identity, rx-teleport, "
                                                         "hadamard, rz, brick)")
        ->required();
    q2pc_run->add_option("--input", q2pc_args.inputs, "Named state per row (one name applies to every row)");
    q2pc_run->add_option("--input-file", q2pc_args.input_file, "Bob's register as JSON {\"amplitudes\": [[re, im], ...]}");

    PatternArgs fullsim_args;
    auto *compile = app.add_subcommand("compile", "Protocol compilers");
    compile->require_subcommand(1);
    auto *fullsim = compile->add_subcommand("fullsim", "Q2PC compiled for full simulation: Bob commits to his input "
                                                       "and proves every message consistent with it");
    add_common(fullsim, fullsim_args.common, true);
    fullsim->add_option("--pattern", fullsim_args.pattern, "Pattern JSON file or shipped name")->required();
    fullsim->add_option("--input", fullsim_args.inputs, "Named state per row (one name applies to every row)");
    fullsim->add_option("--input-file", fullsim_args.input_file, "Bob's register as JSON amplitudes");
    fullsim->add_option("--deviation", fullsim_args.deviation, "Scripted Bob deviation")
        ->check(CLI::IsMember(deviation_names()))
        ->capture_default_str();

    ZkpoqkArgs zk_args;
    auto *zkpoqk = app.add_subcommand("zkpoqk", "Zero-knowledge proof of quantum knowledge compiled from a proof "
                                                "with message-independent verifier");
    zkpoqk->require_subcommand(1);
    auto *zk_demo = zkpoqk->add_subcommand("demo", "Prove knowledge of a basis-state witness with a public hash");
    add_common(zk_demo, zk_args.common, false);
    zk_demo->add_option("--rounds", zk_args.rounds, "Inner proof rounds")->capture_default_str();
    zk_demo->add_option("--bits", zk_args.bits, "Witness qubits (1..16)")->capture_default_str();
    zk_demo->add_option("--strategy", zk_args.strategy, "Prover: honest, wrong-key or random-ciphertexts")
        ->check(CLI::IsMember({"honest", "wrong-key", "random-ciphertexts"}))
        ->capture_default_str();

    ExperimentArgs exp_args;
    auto *experiment = app.add_subcommand("experiment", "Distribution experiments: delta-uniformity (Alice's angle "
                                                        "hides b), simulator-tv (semi-honest Alice simulator), "
                                                        "extractor (malicious Alice), backend-eq (quantum vs shortcut Bob)");
    experiment->add_option("name", exp_args.name, "Experiment name")
        ->required()
        ->check(CLI::IsMember(harness::experiment_names()));
    experiment->add_option("--profile", exp_args.profile, "Parameter profile (default: $Q2PC_PROFILE, else tiny)")
        ->check(CLI::IsMember(harness::profile_names()));
    experiment->add_option("--trials", exp_args.trials, "Samples, keys or sessions, per experiment");
    experiment->add_option("--seed", exp_args.seed, "Seed")->capture_default_str();
    experiment->add_option("--method", exp_args.method, "exact or sampling (default per experiment)")
        ->check(CLI::IsMember({"exact", "sampling"}));
    experiment->add_option("--workers", exp_args.workers, "Worker threads; 0 uses every core. Reports do not depend on it");
    experiment->add_option("--out", exp_args.out_path, "Write the JSON report here instead of stdout");

    std::string profile_name;
    auto *profile_cmd = app.add_subcommand("profile", "Parameter profiles");
    profile_cmd->require_subcommand(1);
    profile_cmd->add_subcommand("list", "List profile names");
    auto *profile_show = profile_cmd->add_subcommand("show", "Print a profile's parameters as JSON");
    profile_show->add_option("name", profile_name, "Profile name")->check(CLI::IsMember(harness::profile_names()));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        return kUsage;
    }

    try {
        if (oqfe_run->parsed()) return cmd_oqfe(oqfe_args, out);
        if (q2pc_run->parsed()) return cmd_q2pc(q2pc_args, out);
        if (fullsim->parsed()) return cmd_fullsim(fullsim_args, out);
        if (zk_demo->parsed()) return cmd_zkpoqk(zk_args, out);
        if (experiment->parsed()) return cmd_experiment(exp_args, out);
        if (profile_show->parsed()) return cmd_profile_show(profile_name, out);
        for (const auto &n : harness::profile_names()) out << n << "\n";
        return kOk;
    } catch (const UsageError &e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kRejected;
    }
}

} // namespace q2pc::cli
