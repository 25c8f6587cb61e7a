#include <benchmark/benchmark.h>

#include <random>

#include "meshforge/bridges.hpp"
#include "meshforge/clusters.hpp"
#include "meshforge/cooccur.hpp"
#include "meshforge/diversity.hpp"
#include "meshforge/synthgen.hpp"

using namespace meshforge;

namespace {

std::vector<SAVector> random_articles(std::size_t count, std::size_t dim) {
  std::mt19937_64 rng(1);
  std::vector<SAVector> out;
  out.reserve(count);
  for (std::size_t a = 0; a < count; ++a) {
    SAVector v(2, dim);
    for (int k = 0; k < 4; ++k) v.counts[rng() % dim] += 1;
    out.push_back(std::move(v));
  }
  return out;
}

CoocMatrix year_matrix(std::size_t dim) {
  auto arts = random_articles(20000, dim);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < dim; ++i) labels.push_back("L" + std::to_string(i));
  return accumulate(arts, 2, labels, {2000, 2000});
}

}  // namespace

static void BM_Accumulate(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  auto arts = random_articles(10000, dim);
  for (auto _ : state) {
    CoocAccumulator acc(2, dim);
    for (const auto& a : arts) acc.add(a);
    benchmark::DoNotOptimize(acc.article_count());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(arts.size()));
}
BENCHMARK(BM_Accumulate)->Arg(36)->Arg(120);

static void BM_Louvain(benchmark::State& state) {
  auto m = year_matrix(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(louvain(m).modularity);
}
BENCHMARK(BM_Louvain)->Arg(36)->Arg(120);

static void BM_BridgeScores(benchmark::State& state) {
  auto m = year_matrix(120);
  auto c = louvain(m);
  for (auto _ : state) {
    auto s = bridge_scores(m, c);
    normalized_ranks(s, c);
    benchmark::DoNotOptimize(s.rank.data());
  }
}
BENCHMARK(BM_BridgeScores);

static void BM_Diversity(benchmark::State& state) {
  auto arts = random_articles(10000, 120);
  for (auto _ : state) {
    double sum = 0;
    for (const auto& a : arts) sum += *diversity_closed_form(a.counts);
    benchmark::DoNotOptimize(sum);
  }
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_Diversity);

static void BM_SynthYear(benchmark::State& state) {
  PlantedSpec spec;
  spec.articles_per_year = 5000;
  SyntheticCorpus corpus(spec);
  for (auto _ : state) {
    std::size_t n = 0;
    corpus.generate_year(1990, [&](ArticleRecord&&) { ++n; });
    benchmark::DoNotOptimize(n);
  }
  state.SetItemsProcessed(state.iterations() * 5000);
}
BENCHMARK(BM_SynthYear);
BENCHMARK_MAIN();
