#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ofds/dataset.hpp"
#include "ofds/selection.hpp"

namespace ofds::metrics {

// Mean over unordered class pairs of min/max object counts. A pair of two
// empty classes counts as 1, a pair with exactly one empty class as 0, and a
// single class scores 1.
double balance_score(std::span<const std::int64_t> counts);

struct BalanceReport {
  std::vector<std::int64_t> counts;  // per class id
  bool from_ground_truth = false;
  double score = 1.0;
};

// Counts come from ground truth when the dataset has any, else proposals.
BalanceReport balance_report(const SelectionManifest& selection, const ProposalDataset& dataset);

struct SubsetStats {
  std::size_t image_count = 0;
  std::int64_t realized_units = 0;
  std::int64_t dataset_units = 0;
  double realized_fraction = 0.0;
  std::vector<std::int64_t> per_class_objects;
  std::vector<bool> covered;
};

// Units and objects are counted in the selection's unit mode.
SubsetStats subset_stats(const SelectionManifest& selection, const ProposalDataset& dataset);

// Selected image pairs with some same-class object pair within Euclidean
// distance epsilon of each other.
std::size_t duplicate_pairs(const SelectionManifest& selection, const ProposalDataset& dataset,
                            double epsilon);

// Same test restricted to the representative objects recorded in the
// selection (entries with object_index).
std::size_t representative_duplicate_pairs(const SelectionManifest& selection,
                                            const ProposalDataset& dataset, double epsilon);

// Image positions of the selection in dataset ingestion indexing.
std::vector<std::size_t> selected_image_indices(const SelectionManifest& selection,
                                                const ProposalDataset& dataset);

}  // namespace ofds::metrics
