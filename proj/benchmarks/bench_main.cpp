#include <benchmark/benchmark.h>

#include <array>
#include <random>

#include "persistlens/annotate.hpp"
#include "persistlens/metrics.hpp"
#include "persistlens/rules.hpp"
#include "persistlens/stats.hpp"
#include "persistlens/synth.hpp"
#include "persistlens/taxonomy.hpp"

using namespace persistlens;

namespace {

const Catalog& catalog() {
    static const Catalog c = Catalog::load(PERSISTLENS_CATALOG_PATH);
    return c;
}

void BM_RegIncBeta(benchmark::State& state) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 1.0), ab(0.5, 100.0);
    std::vector<std::array<double, 3>> args(1024);
    for (auto& a : args) a = {u(gen), ab(gen), ab(gen)};
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& a = args[i++ & 1023];
        benchmark::DoNotOptimize(reg_inc_beta(a[0], a[1], a[2]));
    }
}
BENCHMARK(BM_RegIncBeta);

void BM_OlsFit(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 gen(2);
    std::normal_distribution<double> nd;
    std::vector<NamedColumn> cols;
    for (int j = 0; j < 4; ++j) {
        NamedColumn c{"x" + std::to_string(j), std::vector<double>(n)};
        for (auto& v : c.values) v = nd(gen);
        cols.push_back(std::move(c));
    }
    std::vector<double> y(n);
    for (auto& v : y) v = nd(gen);
    for (auto _ : state) benchmark::DoNotOptimize(ols_fit(y, cols));
}
BENCHMARK(BM_OlsFit)->Arg(19)->Arg(200)->Arg(5000);

void BM_NormalizeLabel(benchmark::State& state) {
    const char* labels[] = {"Scheduled Task/Job", "bitsadmin job", "Scheduled Tsak/Job", "Modify Auth Process",
                            "T1505.003"};
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(catalog().normalize_label(labels[i++ % 5]));
}
BENCHMARK(BM_NormalizeLabel);

void BM_RulePipeline(benchmark::State& state) {
    SynthConfig cfg;
    cfg.n_participants = static_cast<std::size_t>(state.range(0));
    const auto synth = generate(cfg, catalog());
    const auto corpus = join_corpus(synth.notes, synth.participants, false);
    auto rules = make_rule_backend();
    for (auto _ : state) {
        const auto annotated = run_pipeline(corpus, catalog(), *rules, {2, 4});
        benchmark::DoNotOptimize(corpus_distribution(
            corpus_metrics(annotated.participants, annotated.actions, BinSpec::equal_width())));
    }
}
BENCHMARK(BM_RulePipeline)->Arg(20)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
