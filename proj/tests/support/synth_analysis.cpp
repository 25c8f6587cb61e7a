#include "synth_analysis.hpp"

#include <algorithm>

namespace meshforge::testing {

SynthAnalysis analyze(const PlantedSpec& spec, const LouvainOptions& louvain, const EmergingCriteria& criteria) {
  SyntheticCorpus corpus(spec);
  const auto tree = corpus.ontology();
  const auto& labels = tree.l2_index();
  SynthAnalysis out;
  std::vector<BridgeScores> yearly;
  for (int year = spec.first_year; year <= spec.last_year; ++year) {
    CoocAccumulator acc(2, labels.size());
    corpus.generate_year(year, [&](ArticleRecord&& rec) {
      std::vector<std::string> ids;
      for (const auto& m : rec.mesh) {
        if (m.major) ids.push_back(m.id);
      }
      acc.add(article_sa(tree, ids, 2));
    });
    auto m = acc.finish(labels, {year, year});
    auto c = meshforge::louvain(m, louvain);
    auto s = bridge_scores(m, c);
    normalized_ranks(s, c, RankScope::kWithinCluster);
    yearly.push_back(std::move(s));
    out.matrices.push_back(std::move(m));
    out.clusterings.push_back(std::move(c));
  }
  out.series = assemble_series(yearly);
  auto crit = criteria;
  crit.span_first = spec.first_year;
  crit.span_last = spec.last_year;
  out.emerging = detect_emerging(out.series, crit);
  return out;
}

}  // namespace meshforge::testing
