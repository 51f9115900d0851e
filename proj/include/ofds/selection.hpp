#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ofds/dataset.hpp"

namespace ofds {

// How many annotation units an image costs.
enum class UnitMode {
  kProposals,    // surviving proposals on the image
  kGroundTruth,  // ground-truth objects (simulation and benchmarking)
};

std::string to_string(UnitMode mode);
UnitMode unit_mode_from_string(const std::string& s);

struct BudgetSpec {
  std::int64_t total_units = 0;
  double avg_units_per_image = 1.0;  // N_O

  bool operator==(const BudgetSpec&) const = default;
};

// One selected image with the reason it was selected. Fields that a method
// does not produce stay empty.
struct SelectionEntry {
  std::string image_id;
  std::optional<std::int32_t> class_id;
  std::optional<std::size_t> cluster;
  std::optional<std::size_t> object_index;  // representative proposal
  std::optional<double> distance;
  std::optional<double> score;
  std::size_t step = 0;
  std::int64_t cost = 0;

  bool operator==(const SelectionEntry&) const = default;
};

struct SelectionManifest {
  std::string method;
  std::uint64_t seed = 0;
  BudgetSpec budget;
  UnitMode unit_mode = UnitMode::kProposals;
  std::vector<SelectionEntry> selected;
  std::int64_t realized_units = 0;
  std::map<std::string, std::int64_t> per_class_objects;  // keyed by class name

  bool operator==(const SelectionManifest&) const = default;
};

std::string manifest_to_json(const SelectionManifest& manifest);
SelectionManifest manifest_from_json(const std::string& text);
void write_manifest(const SelectionManifest& manifest, const std::filesystem::path& path);
SelectionManifest read_manifest(const std::filesystem::path& path);

// Raw object count on an image (may be 0). Throws DataError for ground-truth
// mode on a dataset without ground truth, or for an unknown image.
std::int64_t unit_cost(const ProposalDataset& dataset, const std::string& image_id, UnitMode mode);

// Charged cost per image in ingestion order: max(1, unit_cost).
std::vector<std::int64_t> charged_costs(const ProposalDataset& dataset, UnitMode mode);

// Sum of charged costs over all images.
std::int64_t total_units(const ProposalDataset& dataset, UnitMode mode);

// Objects per class on the given images, counted in `mode`.
std::vector<std::int64_t> objects_per_class(const ProposalDataset& dataset,
                                            const std::vector<std::size_t>& images, UnitMode mode);

// Tracks the growing selected set S and N(S).
class SelectionState {
 public:
  SelectionState(const ProposalDataset& dataset, UnitMode mode);

  bool contains(std::size_t image) const { return selected_[image]; }
  std::int64_t spent() const { return spent_; }
  std::int64_t cost_of(std::size_t image) const { return costs_[image]; }
  std::int64_t max_cost() const { return max_cost_; }
  std::int64_t min_cost() const { return min_cost_; }
  const std::vector<std::size_t>& images() const { return order_; }
  const std::vector<SelectionEntry>& entries() const { return entries_; }

  // Adds the image and charges its cost. Returns false if already present.
  bool add(std::size_t image, SelectionEntry entry);

  SelectionManifest finish(std::string method, std::uint64_t seed, BudgetSpec budget) const;

 private:
  const ProposalDataset* dataset_;
  UnitMode mode_;
  std::vector<std::int64_t> costs_;
  std::vector<bool> selected_;
  std::vector<std::size_t> order_;
  std::vector<SelectionEntry> entries_;
  std::int64_t spent_ = 0;
  std::int64_t max_cost_ = 0;
  std::int64_t min_cost_ = 0;
};

}  // namespace ofds
