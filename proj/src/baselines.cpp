#include "ofds/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "ofds/atomic_file.hpp"
#include "ofds/clustering.hpp"
#include "ofds/errors.hpp"
#include "ofds/log.hpp"

namespace ofds::baselines {
namespace {

bool below_cheapest(const SelectionState& state, const BudgetSpec& budget) {
  if (budget.total_units < 1) throw UsageError("budget must be at least 1 unit");
  if (budget.total_units < state.min_cost()) {
    logger()->warn("budget {} is below the cheapest image ({} units); nothing selected",
                   budget.total_units, state.min_cost());
    return true;
  }
  return false;
}

}  // namespace

SimilarityTable load_similarity(const std::filesystem::path& path, const ProposalDataset& dataset) {
  std::ifstream in(path);
  if (!in) throw DataError("similarity: cannot open '" + path.string() + "'");
  const DatasetIndex index(dataset);
  SimilarityTable table;
  table.per_class.resize(dataset.classes.size());
  std::set<std::pair<std::int32_t, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "similarity line " + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      const auto cls = j.at("class_id").get<std::int32_t>();
      auto image = j.at("image_id").get<std::string>();
      const double score = j.at("score").get<double>();
      if (!dataset.classes.contains(cls)) throw DataError(where + "unknown class_id");
      if (!index.find_image(image)) throw DataError(where + "unknown image_id '" + image + "'");
      if (!seen.insert({cls, image}).second) throw DataError(where + "duplicate (class, image)");
      table.per_class[cls].push_back({std::move(image), score});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
  }
  return table;
}

void write_similarity(const SimilarityTable& table, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t c = 0; c < table.per_class.size(); ++c) {
    for (const auto& e : table.per_class[c]) {
      out += nlohmann::ordered_json{{"class_id", c}, {"image_id", e.image_id}, {"score", e.score}}
                 .dump();
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

FeatureMatrix image_feature_matrix(const ProposalDataset& dataset) {
  FeatureMatrix m;
  for (const auto& img : dataset.images) {
    if (!img.image_feature) throw DataError("missing image_feature on image '" + img.id + "'");
    m.append_row(*img.image_feature);
  }
  return m;
}

SelectionManifest select_random(const ProposalDataset& dataset, const BudgetSpec& budget,
                                std::uint64_t seed, UnitMode mode) {
  SelectionState state(dataset, mode);
  if (below_cheapest(state, budget)) return state.finish("random", seed, budget);
  std::vector<std::size_t> order(dataset.images.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t img : order) {
    if (state.spent() >= budget.total_units) break;
    state.add(img, {});
  }
  return state.finish("random", seed, budget);
}

SelectionManifest select_kcenters(const ProposalDataset& dataset, const BudgetSpec& budget,
                                  const KCentersOptions& options) {
  const FeatureMatrix x = image_feature_matrix(dataset);
  SelectionState state(dataset, options.unit_mode);
  const std::size_t n = x.rows();
  if (n == 0 || below_cheapest(state, budget)) {
    return state.finish("kcenters", options.seed, budget);
  }
  if (options.batch_size == 0) throw UsageError("kcenters: batch_size must be >= 1");

  std::size_t first = 0;
  if (options.start) {
    if (*options.start >= n) throw UsageError("kcenters: start index out of range");
    first = *options.start;
  } else {
    std::mt19937_64 rng(options.seed);
    first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  }

  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  auto absorb = [&](std::size_t c) {
    for (std::size_t i = 0; i < n; ++i) {
      min_d[i] = std::min(min_d[i], squared_distance(x.row(i), x.row(c)));
    }
  };
  state.add(first, {});
  absorb(first);

  std::size_t cursor = 0;
  while (state.spent() < budget.total_units && state.images().size() < n) {
    std::size_t best = n;
    std::size_t taken = 0;
    std::size_t pos = cursor;
    std::size_t last = cursor;
    for (std::size_t scanned = 0; scanned < n && taken < options.batch_size; ++scanned) {
      pos = (cursor + scanned) % n;
      if (state.contains(pos)) continue;
      ++taken;
      last = pos;
      if (best == n || min_d[pos] > min_d[best] || (min_d[pos] == min_d[best] && pos < best)) {
        best = pos;
      }
    }
    cursor = (last + 1) % n;
    SelectionEntry entry;
    entry.distance = std::sqrt(min_d[best]);
    state.add(best, std::move(entry));
    absorb(best);
  }
  return state.finish("kcenters", options.seed, budget);
}

SelectionManifest select_prototypes(const ProposalDataset& dataset, const BudgetSpec& budget,
                                    std::uint64_t seed, UnitMode mode) {
  const FeatureMatrix x = image_feature_matrix(dataset);
  const std::size_t k = dataset.classes.size();
  if (k == 0) throw DataError("prototypes: dataset has no classes");
  if (k > x.rows()) throw DataError("prototypes: more classes than images");
  SelectionState state(dataset, mode);
  if (below_cheapest(state, budget)) return state.finish("prototypes", seed, budget);

  const auto clusters = clustering::kmeans(x, k, {seed});
  std::vector<std::vector<std::pair<double, std::size_t>>> ranked(k);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const std::size_t j = clusters.assignment[i];
    ranked[j].emplace_back(squared_distance(x.row(i), clusters.centroid(j)), i);
  }
  std::size_t longest = 0;
  for (auto& r : ranked) {
    std::sort(r.begin(), r.end());
    longest = std::max(longest, r.size());
  }
  for (std::size_t rank = 0; rank < longest; ++rank) {
    for (std::size_t j = 0; j < k; ++j) {
      if (state.spent() >= budget.total_units) break;
      if (rank >= ranked[j].size()) continue;
      SelectionEntry entry;
      entry.cluster = j;
      entry.distance = std::sqrt(ranked[j][rank].first);
      state.add(ranked[j][rank].second, std::move(entry));
    }
  }
  return state.finish("prototypes", seed, budget);
}

SelectionManifest select_retrieval(const ProposalDataset& dataset, const SimilarityTable& similarity,
                                   const BudgetSpec& budget, UnitMode mode) {
  const std::size_t m = dataset.classes.size();
  if (similarity.per_class.size() != m) throw DataError("similarity table does not match classes");
  for (std::size_t c = 0; c < m; ++c) {
    if (similarity.per_class[c].empty()) {
      throw DataError("class '" + dataset.classes.names()[c] + "' missing from similarity table");
    }
  }
  SelectionState state(dataset, mode);
  if (below_cheapest(state, budget)) return state.finish("retrieval", 0, budget);
  const DatasetIndex index(dataset);

  std::vector<std::int32_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    return dataset.classes.name(a) < dataset.classes.name(b);
  });

  const std::int64_t b = budget.total_units;
  for (std::size_t pos = 0; pos < m; ++pos) {
    if (state.spent() >= b) break;
    const std::int32_t cls = order[pos];
    const double share = static_cast<double>(b - state.spent()) / static_cast<double>(m - pos);

    std::vector<std::pair<double, std::size_t>> ranked;  // (-score, image index)
    for (const auto& e : similarity.per_class[cls]) {
      ranked.emplace_back(-e.score, index.image_index(e.image_id));
    }
    std::sort(ranked.begin(), ranked.end());

    std::int64_t class_spent = 0;
    for (const auto& [neg_score, img] : ranked) {
      if (state.spent() >= b || static_cast<double>(class_spent) >= share) break;
      if (state.contains(img)) continue;
      SelectionEntry entry;
      entry.class_id = cls;
      entry.score = -neg_score;
      entry.step = pos + 1;
      class_spent += state.cost_of(img);
      state.add(img, std::move(entry));
    }
  }
  return state.finish("retrieval", 0, budget);
}

}  // namespace ofds::baselines
