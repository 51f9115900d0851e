#include "ofds/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>

#include "ofds/errors.hpp"

namespace ofds::clustering {

std::vector<std::size_t> Clustering::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t a : assignment) ++sizes[a];
  return sizes;
}

std::vector<std::size_t> Clustering::free_clusters() const {
  std::vector<bool> touched(k, false);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (i < annotated.size() && annotated[i]) touched[assignment[i]] = true;
  }
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < k; ++j) {
    if (!touched[j]) out.push_back(j);
  }
  return out;
}

std::vector<std::size_t> Clustering::members(std::size_t j) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == j) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> exact_duplicate_groups(const FeatureMatrix& points) {
  const std::size_t n = points.rows();
  const std::size_t bytes = points.dim() * sizeof(float);
  auto less = [&](std::size_t a, std::size_t b) {
    const int c = bytes ? std::memcmp(points.row(a).data(), points.row(b).data(), bytes) : 0;
    return c < 0 || (c == 0 && a < b);
  };
  auto same = [&](std::size_t a, std::size_t b) {
    return bytes == 0 || std::memcmp(points.row(a).data(), points.row(b).data(), bytes) == 0;
  };
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), less);

  // Representative (first occurrence) of each run of identical rows.
  std::vector<std::size_t> rep(n);
  for (std::size_t i = 0; i < n; ++i) {
    rep[order[i]] = (i > 0 && same(order[i - 1], order[i])) ? rep[order[i - 1]] : order[i];
  }
  std::vector<std::size_t> group(n);
  std::vector<std::size_t> id_of_rep(n, std::numeric_limits<std::size_t>::max());
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& id = id_of_rep[rep[i]];
    if (id == std::numeric_limits<std::size_t>::max()) id = next++;
    group[i] = id;
  }
  return group;
}

std::size_t max_free_clusters(const FeatureMatrix& points, const std::vector<bool>& annotated) {
  const auto groups = exact_duplicate_groups(points);
  const std::size_t n_groups = groups.empty() ? 0 : *std::max_element(groups.begin(), groups.end()) + 1;
  std::vector<bool> has_free(n_groups, false);
  std::vector<bool> has_annotated(n_groups, false);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    (annotated[i] ? has_annotated : has_free)[groups[i]] = true;
  }
  std::size_t count = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    if (has_free[g] && !has_annotated[g]) ++count;
  }
  return count;
}

double wcss(const FeatureMatrix& points, std::span<const std::size_t> assignment,
            std::span<const double> centroids) {
  const std::size_t dim = points.dim();
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    total += squared_distance(points.row(i), centroids.subspan(assignment[i] * dim, dim));
  }
  return total;
}

std::size_t nearest_to_centroid(const FeatureMatrix& points, std::span<const std::size_t> members,
                                std::span<const double> centroid) {
  if (members.empty()) throw UsageError("nearest_to_centroid: empty cluster");
  std::size_t best = members.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i : members) {
    const double d = squared_distance(points.row(i), centroid);
    if (d < best_d || (d == best_d && i < best)) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

namespace {

void set_centroid_to_point(std::vector<double>& centroids, std::size_t j,
                           std::span<const float> p) {
  for (std::size_t d = 0; d < p.size(); ++d) centroids[j * p.size() + d] = p[d];
}

std::vector<std::size_t> seed_plus_plus(const FeatureMatrix& points, std::size_t k,
                                        std::mt19937_64& rng) {
  const std::size_t n = points.rows();
  std::vector<std::size_t> chosen;
  std::vector<bool> is_center(n, false);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());

  auto add_center = [&](std::size_t c) {
    chosen.push_back(c);
    is_center[c] = true;
    const auto row = points.row(c);
    for (std::size_t i = 0; i < n; ++i) {
      min_d[i] = std::min(min_d[i], squared_distance(points.row(i), row));
    }
  };

  add_center(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (chosen.size() < k) {
    double total = 0.0;
    for (double d : min_d) total += d;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (min_d[i] <= 0.0) continue;
        cum += min_d[i];
        pick = i;
        if (cum > target) break;
      }
    } else {
      // Every point coincides with a center; take the next unused index.
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        if (!is_center[i]) pick = i;
      }
    }
    add_center(pick);
  }
  return chosen;
}

// Reseeds empty clusters. Prefers moving a whole group of identical points out
// of a cluster that holds at least two distinct vectors, so identical points
// stay together whenever k does not exceed the number of distinct vectors.
void repair_empty_clusters(const FeatureMatrix& points, const std::vector<std::size_t>& groups,
                           std::vector<std::size_t>& assignment, std::vector<double>& dist,
                           std::vector<double>& centroids, std::size_t k) {
  const std::size_t n = points.rows();
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t a : assignment) ++sizes[a];

  for (std::size_t j = 0; j < k; ++j) {
    if (sizes[j] != 0) continue;

    std::vector<std::pair<std::size_t, std::size_t>> cg(n);
    for (std::size_t i = 0; i < n; ++i) cg[i] = {assignment[i], groups[i]};
    std::sort(cg.begin(), cg.end());
    cg.erase(std::unique(cg.begin(), cg.end()), cg.end());
    std::vector<std::size_t> distinct(k, 0);
    for (const auto& [c, g] : cg) ++distinct[c];

    auto pick_farthest = [&](auto eligible) {
      std::size_t best = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (!eligible(i)) continue;
        if (best == n || dist[i] > dist[best]) best = i;
      }
      return best;
    };
    bool move_group = true;
    std::size_t p = pick_farthest([&](std::size_t i) { return distinct[assignment[i]] >= 2; });
    if (p == n) {
      move_group = false;
      p = pick_farthest([&](std::size_t i) { return sizes[assignment[i]] >= 2; });
    }
    if (p == n) throw InfeasibleError("kmeans: cannot repair empty cluster");

    const std::size_t src = assignment[p];
    for (std::size_t i = 0; i < n; ++i) {
      const bool moves = i == p || (move_group && assignment[i] == src && groups[i] == groups[p]);
      if (!moves) continue;
      assignment[i] = j;
      dist[i] = 0.0;
      --sizes[src];
      ++sizes[j];
    }
    set_centroid_to_point(centroids, j, points.row(p));
  }
}

void update_means(const FeatureMatrix& points, const std::vector<std::size_t>& assignment,
                  std::vector<double>& centroids, std::size_t k) {
  const std::size_t dim = points.dim();
  std::vector<double> sums(k * dim, 0.0);
  std::vector<std::size_t> sizes(k, 0);
  // Fixed ingestion-order accumulation keeps centroids bit-reproducible.
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto row = points.row(i);
    double* s = sums.data() + assignment[i] * dim;
    for (std::size_t d = 0; d < dim; ++d) s[d] += row[d];
    ++sizes[assignment[i]];
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (sizes[j] == 0) continue;
    for (std::size_t d = 0; d < dim; ++d) {
      centroids[j * dim + d] = sums[j * dim + d] / static_cast<double>(sizes[j]);
    }
  }
}

}  // namespace

Clustering kmeans(const FeatureMatrix& points, std::size_t k, const KMeansOptions& options) {
  const std::size_t n = points.rows();
  if (k == 0) throw UsageError("kmeans: k must be at least 1");
  if (k > n) throw UsageError("kmeans: k exceeds the number of points");
  const std::size_t dim = points.dim();
  const auto groups = exact_duplicate_groups(points);

  std::mt19937_64 rng(options.seed);
  Clustering result;
  result.k = k;
  result.dim = dim;
  result.centroids.assign(k * dim, 0.0);
  const auto seeds = seed_plus_plus(points, k, rng);
  for (std::size_t j = 0; j < k; ++j) set_centroid_to_point(result.centroids, j, points.row(seeds[j]));

  std::vector<std::size_t> assignment(n, 0);
  std::vector<std::size_t> previous;
  std::vector<double> dist(n, 0.0);
  double prev_wcss = std::numeric_limits<double>::infinity();
  const std::size_t max_iters = std::max<std::size_t>(options.max_iters, 1);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = points.row(i);
      std::size_t best = 0;
      double best_d = squared_distance(row, result.centroid(0));
      for (std::size_t j = 1; j < k; ++j) {
        const double d = squared_distance(row, result.centroid(j));
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      assignment[i] = best;
      dist[i] = best_d;
    }
    repair_empty_clusters(points, groups, assignment, dist, result.centroids, k);
    update_means(points, assignment, result.centroids, k);

    const double current = wcss(points, assignment, result.centroids);
    result.wcss_history.push_back(current);
    if (assignment == previous) break;
    if (std::isfinite(prev_wcss) && prev_wcss - current <= options.rel_tol * prev_wcss) break;
    prev_wcss = current;
    previous = assignment;
  }

  result.assignment = std::move(assignment);
  result.wcss = result.wcss_history.back();
  return result;
}

std::size_t next_cluster_count(std::size_t k, std::size_t cap) {
  const std::size_t grown = std::max((k * 105 + 99) / 100, k + 1);
  return std::min(grown, cap);
}

Clustering adaptive_cluster_search(const ClusterBudgetRequest& request,
                                   const KMeansOptions& options) {
  if (request.points == nullptr || request.points->empty()) {
    throw UsageError("adaptive_cluster_search: no points");
  }
  const FeatureMatrix& points = *request.points;
  if (request.annotated.size() != points.rows()) {
    throw UsageError("adaptive_cluster_search: annotated flags do not match points");
  }
  const std::size_t needed = request.needed_free_clusters;
  if (needed == 0) throw UsageError("adaptive_cluster_search: needed_free_clusters must be >= 1");
  if (max_free_clusters(points, request.annotated) < needed) {
    throw InfeasibleError("adaptive_cluster_search: not enough annotation-free points");
  }
  const auto groups = exact_duplicate_groups(points);
  const std::size_t distinct = *std::max_element(groups.begin(), groups.end()) + 1;

  std::size_t k = std::min(needed, distinct);
  while (true) {
    Clustering c = kmeans(points, k, options);
    c.annotated = request.annotated;
    if (c.free_clusters().size() >= needed) return c;
    if (k >= distinct) {
      throw InfeasibleError("adaptive_cluster_search: exhausted cluster counts");
    }
    k = next_cluster_count(k, distinct);
  }
}

}  // namespace ofds::clustering
