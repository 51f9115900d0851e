#include "ofds/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ofds/errors.hpp"
#include "ofds/log.hpp"
#include "ofds/proposal_store.hpp"

namespace ofds::engine {

std::vector<std::int32_t> class_processing_order(const ProposalDataset& dataset) {
  const auto counts = class_counts(dataset);
  std::vector<std::int32_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int32_t a, std::int32_t b) { return counts[a] < counts[b]; });
  return order;
}

namespace {

int bit_width(unsigned __int128 v) {
  int w = 0;
  while (v != 0) {
    v >>= 1;
    ++w;
  }
  return w;
}

// floor(units / (classes * n_o)) for the exact binary value of n_o > 0.
std::int64_t exact_floor_div(std::int64_t units, std::int64_t classes, double n_o) {
  int exp = 0;
  const double frac = std::frexp(n_o, &exp);
  const auto mant = static_cast<std::uint64_t>(std::ldexp(frac, 53));
  const int e = exp - 53;  // n_o = mant * 2^e
  using u128 = unsigned __int128;
  u128 num = static_cast<u128>(units);
  u128 den = static_cast<u128>(classes) * mant;
  if (e < 0) {
    if (bit_width(num) + (-e) > 127) {
      return static_cast<std::int64_t>(
          std::floor(static_cast<long double>(units) /
                     (static_cast<long double>(classes) * static_cast<long double>(n_o))));
    }
    num <<= -e;
  } else if (e > 0) {
    if (bit_width(den) + e > 127) return 0;
    den <<= e;
  }
  return static_cast<std::int64_t>(num / den);
}

}  // namespace

std::int64_t per_class_quota(std::int64_t total_budget, std::int64_t spent_units,
                             std::int64_t remaining_classes, double avg_units_per_image) {
  if (remaining_classes < 1) throw UsageError("per_class_quota: remaining_classes must be >= 1");
  if (!(avg_units_per_image > 0.0) || !std::isfinite(avg_units_per_image)) {
    throw UsageError("per_class_quota: avg units per image must be positive");
  }
  const std::int64_t left = total_budget - spent_units;
  if (left <= 0) return 0;
  std::int64_t quota = exact_floor_div(left, remaining_classes, avg_units_per_image);
  if (quota == 0 && static_cast<double>(left) >= avg_units_per_image) quota = 1;
  return quota;
}

double estimate_avg_units(const ProposalDataset& dataset, UnitMode mode) {
  const DatasetIndex index(dataset);
  std::size_t objects = 0;
  std::size_t images = 0;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const std::size_t n = mode == UnitMode::kProposals ? index.proposals_on(i).size()
                                                       : index.ground_truth_on(i).size();
    objects += n;
    images += n > 0;
  }
  if (images == 0) throw DataError("cannot estimate avg units: no image has objects");
  return static_cast<double>(objects) / static_cast<double>(images);
}

SelectionManifest select(const ProposalDataset& dataset, const BudgetSpec& budget,
                         const OfdsOptions& options) {
  if (budget.total_units < 1) throw UsageError("budget must be at least 1 unit");
  if (!(budget.avg_units_per_image > 0.0)) throw UsageError("avg units per image must be positive");
  if (dataset.images.empty()) throw DataError("empty dataset");

  SelectionState state(dataset, options.unit_mode);
  if (budget.total_units < state.min_cost()) {
    logger()->warn("budget {} is below the cheapest image ({} units); nothing selected",
                   budget.total_units, state.min_cost());
    return state.finish("ofds", options.seed, budget);
  }

  const DatasetIndex index(dataset);
  const auto order = class_processing_order(dataset);
  const auto counts = class_counts(dataset);
  const auto num_classes = static_cast<std::int64_t>(order.size());

  // Per class: proposal positions (ingestion order) and their features.
  std::vector<std::vector<std::size_t>> class_proposals(dataset.classes.size());
  for (std::size_t p = 0; p < dataset.proposals.size(); ++p) {
    class_proposals[dataset.proposals[p].class_id].push_back(p);
  }
  std::vector<FeatureMatrix> class_points(dataset.classes.size());
  for (std::size_t c = 0; c < class_points.size(); ++c) {
    class_points[c] = FeatureMatrix(0, dataset.features.dim());
    for (std::size_t p : class_proposals[c]) {
      class_points[c].append_row(dataset.feature_of(dataset.proposals[p]));
    }
  }

  clustering::KMeansOptions km{options.seed, options.kmeans_max_iters, options.kmeans_rel_tol};
  const std::int64_t b = budget.total_units;
  std::size_t step = 0;
  for (std::size_t round = 0;; ++round) {
    bool progress = false;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const std::int32_t cls = order[pos];
      ++step;
      if (counts[cls] == 0) {
        if (round == 0) {
          logger()->warn("class '{}' has no proposals and cannot be covered",
                         dataset.classes.name(cls));
        }
        continue;
      }
      if (state.spent() >= b) break;

      const auto remaining = num_classes - static_cast<std::int64_t>(pos);
      std::int64_t quota =
          per_class_quota(b, state.spent(), remaining, budget.avg_units_per_image);
      if (quota == 0) continue;

      const auto& members = class_proposals[cls];
      const FeatureMatrix& points = class_points[cls];
      std::vector<bool> annotated(members.size());
      for (std::size_t i = 0; i < members.size(); ++i) {
        annotated[i] = state.contains(index.image_of_proposal(members[i]));
      }
      const auto feasible =
          static_cast<std::int64_t>(clustering::max_free_clusters(points, annotated));
      if (quota > feasible) {
        logger()->info("class '{}': quota {} shrunk to {} annotation-free objects",
                       dataset.classes.name(cls), quota, feasible);
        quota = feasible;
      }
      if (quota == 0) continue;

      clustering::ClusterBudgetRequest request{&points, static_cast<std::size_t>(quota),
                                               annotated};
      const auto clusters = clustering::adaptive_cluster_search(request, km);
      for (std::size_t j : clusters.free_clusters()) {
        if (state.spent() >= b) break;
        std::vector<std::size_t> eligible;
        for (std::size_t i : clusters.members(j)) {
          if (!state.contains(index.image_of_proposal(members[i]))) eligible.push_back(i);
        }
        if (eligible.empty()) continue;
        const auto centroid = clusters.centroid(j);
        const std::size_t rep = clustering::nearest_to_centroid(points, eligible, centroid);
        SelectionEntry entry;
        entry.class_id = cls;
        entry.cluster = j;
        entry.object_index = members[rep];
        entry.distance = std::sqrt(squared_distance(points.row(rep), centroid));
        entry.step = step;
        state.add(index.image_of_proposal(members[rep]), std::move(entry));
        progress = true;
      }
    }
    if (!options.fill_budget || !progress || state.spent() >= b) break;
  }
  return state.finish("ofds", options.seed, budget);
}

}  // namespace ofds::engine
