#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ofds/dataset.hpp"

namespace ofds {

inline constexpr double kDefaultMinAreaFraction = 0.0005;
inline constexpr std::uint32_t kFeatureBlobVersion = 1;

// Feature blob: "OFDSFEAT", u32 version, u64 count, u32 dim, then count*dim
// little-endian f32 values, row-major.
FeatureMatrix read_feature_blob(const std::filesystem::path& path);
void write_feature_blob(const std::filesystem::path& path, const FeatureMatrix& features);

// Parses the JSON-Lines manifest and the feature blob and validates the result.
// When expected_dim is set, the blob dimension must equal it.
ProposalDataset load_dataset(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& features_path,
                             std::optional<std::size_t> expected_dim = std::nullopt);

// Writes both files atomically. The dataset must satisfy validate_dataset.
void write_dataset(const ProposalDataset& dataset, const std::filesystem::path& manifest_path,
                   const std::filesystem::path& features_path);

// Throws DataError describing the first violated invariant.
void validate_dataset(const ProposalDataset& dataset);

// Removes proposals with (w*h)/(width*height) < min_area_fraction. Boxes exactly
// at the threshold are kept. Feature rows are compacted to match.
ProposalDataset filter_small_boxes(const ProposalDataset& dataset,
                                   double min_area_fraction = kDefaultMinAreaFraction);

// Keeps proposals with confidence >= threshold.
ProposalDataset filter_by_confidence(const ProposalDataset& dataset, double threshold);

// Proposal count per class id.
std::vector<std::size_t> class_counts(const ProposalDataset& dataset);

}  // namespace ofds
