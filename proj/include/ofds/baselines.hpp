#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ofds/dataset.hpp"
#include "ofds/selection.hpp"

namespace ofds::baselines {

inline constexpr std::size_t kDefaultKCentersBatch = 512;

struct SimilarityEntry {
  std::string image_id;
  double score = 0.0;

  bool operator==(const SimilarityEntry&) const = default;
};

// Text-to-image similarity per class id.
struct SimilarityTable {
  std::vector<std::vector<SimilarityEntry>> per_class;

  bool operator==(const SimilarityTable&) const = default;
};

// JSON Lines {"class_id":int,"image_id":str,"score":f64}, validated against
// the dataset (unknown ids and repeated (class, image) pairs are rejected).
SimilarityTable load_similarity(const std::filesystem::path& path, const ProposalDataset& dataset);
void write_similarity(const SimilarityTable& table, const std::filesystem::path& path);

SelectionManifest select_random(const ProposalDataset& dataset, const BudgetSpec& budget,
                                std::uint64_t seed, UnitMode mode = UnitMode::kProposals);

struct KCentersOptions {
  std::uint64_t seed = 0;
  std::size_t batch_size = kDefaultKCentersBatch;
  // Overrides the seeded choice of the first image.
  std::optional<std::size_t> start;
  UnitMode unit_mode = UnitMode::kProposals;
};

// Greedy farthest-point traversal over image features. Each step scores only
// the next batch_size unselected images, cycling through them in ingestion
// order; batch_size >= image count gives exact greedy k-centers.
SelectionManifest select_kcenters(const ProposalDataset& dataset, const BudgetSpec& budget,
                                  const KCentersOptions& options = {});

// k-means on image features with k = number of classes, then images closest
// to their centroid first, interleaved round-robin across clusters.
SelectionManifest select_prototypes(const ProposalDataset& dataset, const BudgetSpec& budget,
                                    std::uint64_t seed, UnitMode mode = UnitMode::kProposals);

// Classes in alphabetical order; each takes its highest-scoring unselected
// images until it has spent an even share of the remaining budget.
SelectionManifest select_retrieval(const ProposalDataset& dataset, const SimilarityTable& similarity,
                                   const BudgetSpec& budget, UnitMode mode = UnitMode::kProposals);

// Image features as a matrix in ingestion order. Throws DataError if any image
// lacks one or the dimensions disagree.
FeatureMatrix image_feature_matrix(const ProposalDataset& dataset);

}  // namespace ofds::baselines
