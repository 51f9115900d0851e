#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ofds/dataset.hpp"

namespace ofds::test {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ofds_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Small hand-built datasets. Objects are (image index, class, feature).
struct ObjectSpec {
  std::size_t image;
  std::int32_t class_id;
  std::vector<float> feature;
  double confidence = 1.0;
};

inline ProposalDataset make_dataset(std::size_t num_images, std::vector<std::string> classes,
                                    const std::vector<ObjectSpec>& objects,
                                    bool with_ground_truth = false) {
  ProposalDataset ds;
  ds.classes = ClassTable(std::move(classes));
  for (std::size_t i = 0; i < num_images; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "im%03zu", i);
    ds.images.push_back({id, 100, 100, std::nullopt});
  }
  std::size_t dim = objects.empty() ? 2 : objects.front().feature.size();
  ds.features = FeatureMatrix(0, dim);
  for (const auto& o : objects) {
    ObjectProposal p;
    p.image_id = ds.images[o.image].id;
    p.class_id = o.class_id;
    p.confidence = o.confidence;
    p.bbox = {10, 10, 20, 20};
    p.feature_index = ds.features.rows();
    ds.features.append_row(o.feature);
    ds.proposals.push_back(p);
    if (with_ground_truth) ds.ground_truth.push_back({p.image_id, p.class_id, p.bbox});
  }
  return ds;
}

inline FeatureMatrix matrix(const std::vector<std::vector<float>>& rows) {
  FeatureMatrix m(0, rows.empty() ? 1 : rows.front().size());
  for (const auto& r : rows) m.append_row(r);
  return m;
}

inline FeatureMatrix random_matrix(std::size_t n, std::size_t dim, std::mt19937_64& rng,
                                   double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  FeatureMatrix m(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : m.row(i)) v = static_cast<float>(normal(rng));
  }
  return m;
}

}  // namespace ofds::test
