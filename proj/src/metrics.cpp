#include "ofds/metrics.hpp"

#include <algorithm>

#include "ofds/errors.hpp"

namespace ofds::metrics {

double balance_score(std::span<const std::int64_t> counts) {
  if (counts.empty()) throw UsageError("balance_score: need at least one class");
  if (counts.size() == 1) return 1.0;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::size_t j = i + 1; j < counts.size(); ++j, ++pairs) {
      const auto lo = std::min(counts[i], counts[j]);
      const auto hi = std::max(counts[i], counts[j]);
      if (hi == 0) {
        sum += 1.0;
      } else {
        sum += static_cast<double>(lo) / static_cast<double>(hi);
      }
    }
  }
  return sum / static_cast<double>(pairs);
}

std::vector<std::size_t> selected_image_indices(const SelectionManifest& selection,
                                                const ProposalDataset& dataset) {
  const DatasetIndex index(dataset);
  std::vector<std::size_t> out;
  out.reserve(selection.selected.size());
  for (const auto& e : selection.selected) out.push_back(index.image_index(e.image_id));
  return out;
}

BalanceReport balance_report(const SelectionManifest& selection, const ProposalDataset& dataset) {
  BalanceReport r;
  r.from_ground_truth = dataset.has_ground_truth();
  r.counts = objects_per_class(dataset, selected_image_indices(selection, dataset),
                               r.from_ground_truth ? UnitMode::kGroundTruth : UnitMode::kProposals);
  r.score = r.counts.empty() ? 1.0 : balance_score(r.counts);
  return r;
}

SubsetStats subset_stats(const SelectionManifest& selection, const ProposalDataset& dataset) {
  const auto images = selected_image_indices(selection, dataset);
  const auto costs = charged_costs(dataset, selection.unit_mode);
  SubsetStats s;
  s.image_count = images.size();
  for (std::size_t img : images) s.realized_units += costs[img];
  for (auto c : costs) s.dataset_units += c;
  s.realized_fraction = s.dataset_units > 0 ? static_cast<double>(s.realized_units) /
                                                  static_cast<double>(s.dataset_units)
                                            : 0.0;
  s.per_class_objects = objects_per_class(dataset, images, selection.unit_mode);
  s.covered.resize(s.per_class_objects.size());
  for (std::size_t c = 0; c < s.covered.size(); ++c) s.covered[c] = s.per_class_objects[c] > 0;
  return s;
}

namespace {

struct ObjectRef {
  std::size_t image_slot;  // position in the selection
  std::int32_t class_id;
  std::size_t proposal;
};

std::size_t count_close_pairs(const std::vector<ObjectRef>& objects, std::size_t slots,
                              const ProposalDataset& dataset, double epsilon) {
  const double eps2 = epsilon * epsilon;
  std::vector<std::vector<bool>> linked(slots, std::vector<bool>(slots, false));
  std::size_t count = 0;
  for (std::size_t a = 0; a < objects.size(); ++a) {
    for (std::size_t b = a + 1; b < objects.size(); ++b) {
      const auto& oa = objects[a];
      const auto& ob = objects[b];
      if (oa.image_slot == ob.image_slot || oa.class_id != ob.class_id) continue;
      const auto lo = std::min(oa.image_slot, ob.image_slot);
      const auto hi = std::max(oa.image_slot, ob.image_slot);
      if (linked[lo][hi]) continue;
      const double d2 = squared_distance(dataset.feature_of(dataset.proposals[oa.proposal]),
                                         dataset.feature_of(dataset.proposals[ob.proposal]));
      if (d2 <= eps2) {
        linked[lo][hi] = true;
        ++count;
      }
    }
  }
  return count;
}

}  // namespace

std::size_t duplicate_pairs(const SelectionManifest& selection, const ProposalDataset& dataset,
                            double epsilon) {
  if (epsilon < 0) throw UsageError("duplicate_pairs: epsilon must be >= 0");
  const DatasetIndex index(dataset);
  const auto images = selected_image_indices(selection, dataset);
  std::vector<ObjectRef> objects;
  for (std::size_t slot = 0; slot < images.size(); ++slot) {
    for (std::size_t p : index.proposals_on(images[slot])) {
      objects.push_back({slot, dataset.proposals[p].class_id, p});
    }
  }
  return count_close_pairs(objects, images.size(), dataset, epsilon);
}

std::size_t representative_duplicate_pairs(const SelectionManifest& selection,
                                           const ProposalDataset& dataset, double epsilon) {
  if (epsilon < 0) throw UsageError("duplicate_pairs: epsilon must be >= 0");
  std::vector<ObjectRef> objects;
  for (std::size_t slot = 0; slot < selection.selected.size(); ++slot) {
    const auto& e = selection.selected[slot];
    if (!e.object_index) continue;
    if (*e.object_index >= dataset.proposals.size()) {
      throw DataError("selection references unknown proposal " + std::to_string(*e.object_index));
    }
    objects.push_back({slot, dataset.proposals[*e.object_index].class_id, *e.object_index});
  }
  return count_close_pairs(objects, selection.selected.size(), dataset, epsilon);
}

}  // namespace ofds::metrics
