#include <benchmark/benchmark.h>

#include "q2pc/harness.hpp"
#include "q2pc/session.hpp"

using namespace q2pc;

namespace {

lattice::TrapdoorKeypair key(const char *profile) {
    crypto::CoinSource coins(crypto::seed_from_u64(1), "bench.key");
    return lattice::gen(lattice::profile_params(profile), coins);
}

void BM_LatticeGen(benchmark::State &state, const char *profile) {
    const auto params = lattice::profile_params(profile);
    std::uint64_t i = 0;
    for (auto _ : state) {
        crypto::CoinSource coins(crypto::seed_from_u64(i++), "bench.gen");
        benchmark::DoNotOptimize(lattice::gen(params, coins));
    }
}
BENCHMARK_CAPTURE(BM_LatticeGen, tiny, "tiny");
BENCHMARK_CAPTURE(BM_LatticeGen, small, "small");
BENCHMARK_CAPTURE(BM_LatticeGen, demo, "demo");

void BM_Invert(benchmark::State &state, const char *profile) {
    const auto kp = key(profile);
    crypto::CoinSource coins(crypto::seed_from_u64(2), "bench.point");
    const auto y = lattice::eval_f(kp.pk, lattice::sample_domain_point(kp.pk.params, coins));
    for (auto _ : state) benchmark::DoNotOptimize(lattice::invert_all(kp, y));
}
BENCHMARK_CAPTURE(BM_Invert, tiny, "tiny");
BENCHMARK_CAPTURE(BM_Invert, demo, "demo");

void BM_PublicSearch(benchmark::State &state, const char *profile) {
    const auto kp = key(profile);
    crypto::CoinSource coins(crypto::seed_from_u64(2), "bench.point");
    const auto y = lattice::eval_f(kp.pk, lattice::sample_domain_point(kp.pk.params, coins));
    for (auto _ : state) benchmark::DoNotOptimize(lattice::search_preimages(kp.pk, y));
}
BENCHMARK_CAPTURE(BM_PublicSearch, tiny, "tiny");
BENCHMARK_CAPTURE(BM_PublicSearch, small, "small")->Unit(benchmark::kMillisecond);

void BM_BobQuantum(benchmark::State &state, const char *profile) {
    const auto kp = key(profile);
    const rsp::PreimageOracle invert = [&](const lattice::ZqVector &y) { return lattice::invert_all(kp, y); };
    std::uint64_t i = 0;
    for (auto _ : state) {
        crypto::CoinSource coins(crypto::seed_from_u64(i++), "bench.bob");
        qsim::SampledOutcomes outs(coins);
        benchmark::DoNotOptimize(rsp::bob_quantum(kp.pk, coins, outs, invert));
    }
}
BENCHMARK_CAPTURE(BM_BobQuantum, tiny, "tiny");
BENCHMARK_CAPTURE(BM_BobQuantum, small, "small");
BENCHMARK_CAPTURE(BM_BobQuantum, demo, "demo")->Unit(benchmark::kMillisecond);

void BM_BobShortcut(benchmark::State &state, const char *profile) {
    const auto kp = key(profile);
    const rsp::PreimageOracle invert = [&](const lattice::ZqVector &y) { return lattice::invert_all(kp, y); };
    std::uint64_t i = 0;
    for (auto _ : state) {
        crypto::CoinSource coins(crypto::seed_from_u64(i++), "bench.bob");
        benchmark::DoNotOptimize(rsp::bob_shortcut(kp.pk, coins, invert));
    }
}
BENCHMARK_CAPTURE(BM_BobShortcut, tiny, "tiny");
BENCHMARK_CAPTURE(BM_BobShortcut, small, "small");
BENCHMARK_CAPTURE(BM_BobShortcut, demo, "demo");

void BM_OqfeSession(benchmark::State &state) {
    const bool mal = state.range(0) != 0;
    std::uint64_t i = 0;
    for (auto _ : state) {
        const auto seeds = SessionSeeds::from_u64(i++);
        zk::IdealZk zk(seeds.zk_key());
        protocols::RunConfig cfg;
        cfg.zk = &zk;
        auto ac = seeds.alice(), bc = seeds.bob(), mc = seeds.bob_measurements();
        qsim::SampledOutcomes outs(mc);
        const auto psi = qsim::StateVector::plus_state();
        if (mal) {
            auto run = run_inproc<protocols::MalAliceView, protocols::OqfeBobView>(
                seeds.session(), [&](channel::Endpoint &ep) { return protocols::oqfe_mal_alice(ep, cfg, 1, ac); },
                [&](channel::Endpoint &ep) { return protocols::oqfe_mal_bob(ep, cfg, psi, bc, outs); });
            benchmark::DoNotOptimize(run.completed());
        } else {
            auto run = run_inproc<protocols::OqfeAliceView, protocols::OqfeBobView>(
                seeds.session(), [&](channel::Endpoint &ep) { return protocols::oqfe_alice(ep, cfg, 1, ac); },
                [&](channel::Endpoint &ep) { return protocols::oqfe_bob(ep, cfg, psi, bc, outs); });
            benchmark::DoNotOptimize(run.completed());
        }
    }
}
BENCHMARK(BM_OqfeSession)->Arg(0)->Arg(1);

void BM_Q2pcSession(benchmark::State &state, const char *pattern_name) {
    const auto p = mbqc::library_pattern(pattern_name);
    qsim::StateVector input = qsim::StateVector::plus_state();
    for (std::size_t r = 1; r < p.n; ++r) input = input.tensor(qsim::StateVector::plus_state());
    std::uint64_t i = 0;
    for (auto _ : state) {
        const auto seeds = SessionSeeds::from_u64(i++);
        zk::IdealZk zk(seeds.zk_key());
        protocols::RunConfig cfg;
        cfg.zk = &zk;
        auto ac = seeds.alice(), bc = seeds.bob(), mc = seeds.bob_measurements();
        qsim::SampledOutcomes outs(mc);
        auto run = run_inproc<protocols::Q2pcAliceView, protocols::Q2pcBobView>(
            seeds.session(), [&](channel::Endpoint &ep) { return protocols::q2pc_alice(ep, cfg, p, ac); },
            [&](channel::Endpoint &ep) { return protocols::q2pc_bob(ep, cfg, protocols::public_shape(p), input, bc, outs); });
        benchmark::DoNotOptimize(run.completed());
    }
}
BENCHMARK_CAPTURE(BM_Q2pcSession, identity, "identity");
BENCHMARK_CAPTURE(BM_Q2pcSession, brick, "brick")->Unit(benchmark::kMillisecond);

void BM_ImageTable(benchmark::State &state) {
    const auto kp = key("tiny");
    for (auto _ : state) {
        harness::ImageTable t(kp);
        benchmark::DoNotOptimize(t.pair_count());
    }
}
BENCHMARK(BM_ImageTable)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_RegisterOutcomeLaws(benchmark::State &state) {
    const auto kp = key("tiny");
    crypto::CoinSource coins(crypto::seed_from_u64(4), "bench.collapse");
    const auto img = rsp::collapse(kp.pk, coins);
    for (auto _ : state) benchmark::DoNotOptimize(harness::register_outcome_laws(kp.pk, img));
}
BENCHMARK(BM_RegisterOutcomeLaws)->Unit(benchmark::kMillisecond)->Iterations(2);

void BM_DenseHadamardLayer(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    qsim::StateVector s(n);
    for (auto _ : state) {
        for (std::size_t q = 0; q < n; ++q) s.h(q);
        benchmark::DoNotOptimize(s.amplitudes().data());
    }
}
BENCHMARK(BM_DenseHadamardLayer)->Arg(10)->Arg(16)->Arg(20);

void BM_Commit(benchmark::State &state) {
    crypto::CoinSource coins(crypto::seed_from_u64(5), "bench.commit");
    const Bytes message(static_cast<std::size_t>(state.range(0)), 0xab);
    for (auto _ : state) benchmark::DoNotOptimize(crypto::commit(message, coins));
}
BENCHMARK(BM_Commit)->Arg(32)->Arg(4096);

} // namespace

BENCHMARK_MAIN();
