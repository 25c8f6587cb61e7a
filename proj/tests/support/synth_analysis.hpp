#pragma once

// In-memory run over a synthetic corpus: annual L2 matrices, clustering,
// bridge series and emerging-bridge detection. Used by tests that sweep many
// seeds without touching the disk.

#include <vector>

#include "meshforge/bridges.hpp"
#include "meshforge/synthgen.hpp"

namespace meshforge::testing {

struct SynthAnalysis {
  std::vector<CoocMatrix> matrices;
  std::vector<Clustering> clusterings;
  BridgeSeries series;
  std::vector<EmergingBridge> emerging;
};

SynthAnalysis analyze(const PlantedSpec& spec, const LouvainOptions& louvain = {},
                      const EmergingCriteria& criteria = {});

}  // namespace meshforge::testing
