#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ofds {

// Axis-aligned box in pixels, origin top-left.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  bool operator==(const BBox&) const = default;
};

struct ImageRecord {
  std::string id;
  std::int64_t width = 0;
  std::int64_t height = 0;
  // Image-level embedding, only consumed by the image-level baselines.
  std::optional<std::vector<float>> image_feature;

  bool operator==(const ImageRecord&) const = default;
};

struct ObjectProposal {
  std::string image_id;
  std::int32_t class_id = 0;
  double confidence = 0.0;
  BBox bbox;
  std::size_t feature_index = 0;

  bool operator==(const ObjectProposal&) const = default;
};

struct GroundTruthObject {
  std::string image_id;
  std::int32_t class_id = 0;
  BBox bbox;

  bool operator==(const GroundTruthObject&) const = default;
};

// Dense row-major float matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dim)
      : rows_(rows), dim_(dim), data_(rows * dim, 0.0f) {}
  FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<float> data);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return rows_ == 0; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  void append_row(std::span<const float> values);

  const std::vector<float>& data() const { return data_; }

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

// Class names indexed by class id; ids are contiguous from 0.
class ClassTable {
 public:
  ClassTable() = default;
  explicit ClassTable(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
  bool contains(std::int32_t id) const {
    return id >= 0 && static_cast<std::size_t>(id) < names_.size();
  }
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const ClassTable&) const = default;

 private:
  std::vector<std::string> names_;
};

// Immutable pool of images, proposals and their features. Ingestion order of
// images and proposals is the tie-breaking order for every downstream step.
struct ProposalDataset {
  std::vector<ImageRecord> images;
  ClassTable classes;
  std::vector<ObjectProposal> proposals;
  FeatureMatrix features;
  std::vector<GroundTruthObject> ground_truth;

  bool has_ground_truth() const { return !ground_truth.empty(); }
  std::span<const float> feature_of(const ObjectProposal& p) const {
    return features.row(p.feature_index);
  }

  bool operator==(const ProposalDataset&) const = default;
};

// Lookup tables derived from a dataset. Holds no reference to the dataset.
class DatasetIndex {
 public:
  explicit DatasetIndex(const ProposalDataset& dataset);

  // Throws DataError for unknown ids.
  std::size_t image_index(const std::string& image_id) const;
  std::optional<std::size_t> find_image(const std::string& image_id) const;

  // Proposal positions per image, in ingestion order.
  const std::vector<std::size_t>& proposals_on(std::size_t image) const {
    return proposals_by_image_[image];
  }
  const std::vector<std::size_t>& ground_truth_on(std::size_t image) const {
    return gt_by_image_[image];
  }
  std::size_t image_of_proposal(std::size_t proposal) const { return proposal_image_[proposal]; }

 private:
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::vector<std::size_t>> proposals_by_image_;
  std::vector<std::vector<std::size_t>> gt_by_image_;
  std::vector<std::size_t> proposal_image_;
};

double squared_distance(std::span<const float> a, std::span<const float> b);
double squared_distance(std::span<const float> a, std::span<const double> b);

}  // namespace ofds
