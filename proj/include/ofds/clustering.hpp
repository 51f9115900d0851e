#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ofds/dataset.hpp"

namespace ofds::clustering {

inline constexpr std::size_t kDefaultMaxIters = 100;
inline constexpr double kDefaultRelTol = 1e-6;
inline constexpr double kClusterGrowth = 1.05;

struct KMeansOptions {
  std::uint64_t seed = 0;
  std::size_t max_iters = kDefaultMaxIters;
  double rel_tol = kDefaultRelTol;
};

struct Clustering {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<std::size_t> assignment;
  std::vector<double> centroids;  // k x dim, row-major
  double wcss = 0.0;
  // WCSS after each Lloyd iteration (assignment + mean update).
  std::vector<double> wcss_history;
  // Per point: lies on an image that is already selected.
  std::vector<bool> annotated;

  std::span<const double> centroid(std::size_t j) const {
    return {centroids.data() + j * dim, dim};
  }
  std::vector<std::size_t> cluster_sizes() const;
  // Ascending indices of clusters with no annotated point.
  std::vector<std::size_t> free_clusters() const;
  // Member point indices of cluster j, ascending.
  std::vector<std::size_t> members(std::size_t j) const;
};

struct ClusterBudgetRequest {
  const FeatureMatrix* points = nullptr;
  std::size_t needed_free_clusters = 1;
  std::vector<bool> annotated;
};

// Lloyd's algorithm from a seeded k-means++ start. Point-to-centroid ties go to
// the lower cluster index; emptied clusters are reseeded with the point
// farthest from its centroid. Requires 1 <= k <= points.rows().
Clustering kmeans(const FeatureMatrix& points, std::size_t k, const KMeansOptions& options = {});

double wcss(const FeatureMatrix& points, std::span<const std::size_t> assignment,
            std::span<const double> centroids);

// Member point index nearest to the centroid; ties go to the lowest index.
std::size_t nearest_to_centroid(const FeatureMatrix& points, std::span<const std::size_t> members,
                                std::span<const double> centroid);

// Group id per point such that two points share a group iff their feature
// vectors are bit-identical. Ids are assigned in order of first occurrence.
std::vector<std::size_t> exact_duplicate_groups(const FeatureMatrix& points);

// Number of bit-distinct feature vectors among free points that do not
// coincide with any annotated point: the most free clusters any k can yield.
std::size_t max_free_clusters(const FeatureMatrix& points, const std::vector<bool>& annotated);

// Grows k from needed_free_clusters by k <- max(ceil(1.05 k), k + 1) until the
// clustering has enough clusters without annotated points. k never exceeds the
// number of distinct points, so bit-identical points always share a cluster.
// Throws InfeasibleError when max_free_clusters < needed_free_clusters.
Clustering adaptive_cluster_search(const ClusterBudgetRequest& request,
                                   const KMeansOptions& options = {});

std::size_t next_cluster_count(std::size_t k, std::size_t cap);

}  // namespace ofds::clustering
