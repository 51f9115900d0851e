#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ofds/baselines.hpp"
#include "ofds/dataset.hpp"

namespace ofds::synth {

struct ClassSpec {
  std::string name;
  std::size_t objects = 0;
  std::size_t modes = 1;
  double spread = 0.5;  // per-coordinate std of objects around their mode
  // Optional explicit mode means (modes x dim); drawn from N(0, mode_scale) otherwise.
  std::vector<std::vector<double>> mode_means;
};

struct SynthSpec {
  std::vector<ClassSpec> classes;
  std::size_t dim = 16;
  std::size_t min_objects_per_image = 1;
  std::size_t max_objects_per_image = 1;
  // cooccurrence[a][b]: weight in [0,1] with which an image whose first object
  // is of class a receives further objects of class b. Empty means all ones.
  std::vector<std::vector<double>> cooccurrence;
  double duplicate_fraction = 0.0;
  // Per-class retention in (0,1]; empty means no pruning.
  std::vector<double> imbalance;
  double mode_scale = 10.0;
  bool image_features = true;
  double image_feature_noise = 0.1;
  std::int64_t image_width = 640;
  std::int64_t image_height = 480;
  std::uint64_t seed = 0;
};

SynthSpec spec_from_json(const std::string& text);
std::string spec_to_json(const SynthSpec& spec);
SynthSpec read_spec(const std::filesystem::path& path);

// Proposals with confidence 1; ground truth mirrors proposals. Applies the
// spec's imbalance and duplicate settings after drawing the base pool.
ProposalDataset generate(const SynthSpec& spec);

// Drops whole images until every class with factor < 1 has at most
// floor(factor * original) objects. Images that only carry over-target pruned
// classes go first, then images that do not touch pruned classes already at
// their target, then any image with an over-target class.
ProposalDataset apply_imbalance(const ProposalDataset& dataset, const std::vector<double>& factors,
                                std::uint64_t seed);

// Appends round(fraction * images) exact copies of distinct, seeded-randomly
// chosen images under new ids.
ProposalDataset inject_duplicates(const ProposalDataset& dataset, double fraction,
                                  std::uint64_t seed);

// Keeps images where keep[i] is true, with their proposals, ground truth and
// compacted feature rows.
ProposalDataset keep_images(const ProposalDataset& dataset, const std::vector<bool>& keep);

// Similarity of class c to an image: share of the image's proposals of class c
// plus N(0, noise). Class-major, images in ingestion order.
baselines::SimilarityTable similarity_table(const ProposalDataset& dataset, double noise,
                                            std::uint64_t seed);

// 10 classes with three modes each, 1-4 objects per image, mostly one class
// per image.
SynthSpec default_spec(std::uint64_t seed = 0);

// default_spec with six classes retained at 1%, 5%, 15%, 20%, 25% and 50%.
SynthSpec imbalanced_spec(std::uint64_t seed = 0);

}  // namespace ofds::synth
