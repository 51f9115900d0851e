#include "ofds/dataset.hpp"

#include <fstream>
#include <unordered_set>

#include "ofds/atomic_file.hpp"
#include "ofds/errors.hpp"

namespace ofds {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<float> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
  if (data_.size() != rows_ * dim_) {
    throw DataError("feature matrix: data size does not match rows*dim");
  }
}

void FeatureMatrix::append_row(std::span<const float> values) {
  if (rows_ == 0 && dim_ == 0) dim_ = values.size();
  if (values.size() != dim_) throw DataError("dimension mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

ClassTable::ClassTable(std::vector<std::string> names) : names_(std::move(names)) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw DataError("duplicate class name '" + n + "'");
  }
}

DatasetIndex::DatasetIndex(const ProposalDataset& dataset)
    : proposals_by_image_(dataset.images.size()),
      gt_by_image_(dataset.images.size()),
      proposal_image_(dataset.proposals.size()) {
  by_id_.reserve(dataset.images.size());
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    if (!by_id_.emplace(dataset.images[i].id, i).second) {
      throw DataError("duplicate image id '" + dataset.images[i].id + "'");
    }
  }
  for (std::size_t p = 0; p < dataset.proposals.size(); ++p) {
    const std::size_t img = image_index(dataset.proposals[p].image_id);
    proposals_by_image_[img].push_back(p);
    proposal_image_[p] = img;
  }
  for (std::size_t g = 0; g < dataset.ground_truth.size(); ++g) {
    gt_by_image_[image_index(dataset.ground_truth[g].image_id)].push_back(g);
  }
}

std::size_t DatasetIndex::image_index(const std::string& image_id) const {
  auto it = by_id_.find(image_id);
  if (it == by_id_.end()) throw DataError("dangling image_id '" + image_id + "'");
  return it->second;
}

std::optional<std::size_t> DatasetIndex::find_image(const std::string& image_id) const {
  auto it = by_id_.find(image_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum;
}

double squared_distance(std::span<const float> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  return sum;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot rename '" + tmp.string() + "': " + ec.message());
  }
}

}  // namespace ofds
