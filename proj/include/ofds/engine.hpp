#pragma once

#include <cstdint>
#include <vector>

#include "ofds/clustering.hpp"
#include "ofds/dataset.hpp"
#include "ofds/selection.hpp"

namespace ofds::engine {

struct OfdsOptions {
  std::uint64_t seed = 0;
  UnitMode unit_mode = UnitMode::kProposals;
  // Repeat the class sweep with the leftover budget after the first pass.
  bool fill_budget = true;
  std::size_t kmeans_max_iters = clustering::kDefaultMaxIters;
  double kmeans_rel_tol = clustering::kDefaultRelTol;
};

// Classes by ascending proposal count, ties by class id. Zero-count classes
// come first and are skipped by select().
std::vector<std::int32_t> class_processing_order(const ProposalDataset& dataset);

// Number of images to add for the current class:
//   floor((B - spent) / (remaining_classes * N_O)),
// evaluated exactly for the binary value of N_O and clamped at 0. A zero
// result is raised to 1 while at least N_O units of budget remain.
std::int64_t per_class_quota(std::int64_t total_budget, std::int64_t spent_units,
                             std::int64_t remaining_classes, double avg_units_per_image);

// Surviving objects (in `mode`) divided by images with at least one object.
double estimate_avg_units(const ProposalDataset& dataset, UnitMode mode = UnitMode::kProposals);

// Object-focused selection. Classes are visited rarest first; each class is
// clustered over its object features with enough clusters free of already
// selected images, and the image of the object nearest each free centroid is
// added until the budget is spent.
SelectionManifest select(const ProposalDataset& dataset, const BudgetSpec& budget,
                         const OfdsOptions& options = {});

}  // namespace ofds::engine
