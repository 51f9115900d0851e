#include "ofds/selection.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ofds/atomic_file.hpp"
#include "ofds/errors.hpp"

namespace ofds {
namespace {

using json = nlohmann::ordered_json;

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_get(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

std::string to_string(UnitMode mode) {
  return mode == UnitMode::kProposals ? "proposals" : "ground_truth";
}

UnitMode unit_mode_from_string(const std::string& s) {
  if (s == "proposals") return UnitMode::kProposals;
  if (s == "ground_truth" || s == "gt") return UnitMode::kGroundTruth;
  throw UsageError("unknown unit mode '" + s + "'");
}

std::string manifest_to_json(const SelectionManifest& m) {
  json selected = json::array();
  for (const auto& e : m.selected) {
    selected.push_back(json{{"image_id", e.image_id},
                            {"class_id", opt(e.class_id)},
                            {"cluster", opt(e.cluster)},
                            {"object_index", opt(e.object_index)},
                            {"distance", opt(e.distance)},
                            {"score", opt(e.score)},
                            {"step", e.step},
                            {"cost", e.cost}});
  }
  json per_class = json::object();
  for (const auto& [name, count] : m.per_class_objects) per_class[name] = count;
  json j{{"method", m.method},
         {"seed", m.seed},
         {"budget", {{"units", m.budget.total_units}, {"avg_units", m.budget.avg_units_per_image}}},
         {"unit_mode", to_string(m.unit_mode)},
         {"selected", std::move(selected)},
         {"realized_units", m.realized_units},
         {"per_class_objects", std::move(per_class)}};
  return j.dump(2) + "\n";
}

SelectionManifest manifest_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    SelectionManifest m;
    m.method = j.at("method").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.budget.total_units = j.at("budget").at("units").get<std::int64_t>();
    m.budget.avg_units_per_image = j.at("budget").at("avg_units").get<double>();
    m.unit_mode = unit_mode_from_string(j.at("unit_mode").get<std::string>());
    for (const auto& e : j.at("selected")) {
      SelectionEntry entry;
      entry.image_id = e.at("image_id").get<std::string>();
      entry.class_id = opt_get<std::int32_t>(e, "class_id");
      entry.cluster = opt_get<std::size_t>(e, "cluster");
      entry.object_index = opt_get<std::size_t>(e, "object_index");
      entry.distance = opt_get<double>(e, "distance");
      entry.score = opt_get<double>(e, "score");
      entry.step = e.at("step").get<std::size_t>();
      entry.cost = e.at("cost").get<std::int64_t>();
      m.selected.push_back(std::move(entry));
    }
    m.realized_units = j.at("realized_units").get<std::int64_t>();
    for (const auto& [name, count] : j.at("per_class_objects").items()) {
      m.per_class_objects[name] = count.get<std::int64_t>();
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("selection manifest: ") + e.what());
  }
}

void write_manifest(const SelectionManifest& manifest, const std::filesystem::path& path) {
  write_file_atomic(path, manifest_to_json(manifest));
}

SelectionManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("selection manifest: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

std::int64_t unit_cost(const ProposalDataset& dataset, const std::string& image_id, UnitMode mode) {
  if (mode == UnitMode::kGroundTruth && !dataset.has_ground_truth()) {
    throw DataError("ground_truth unit mode requires ground-truth objects");
  }
  if (!DatasetIndex(dataset).find_image(image_id)) {
    throw DataError("dangling image_id '" + image_id + "'");
  }
  std::int64_t n = 0;
  if (mode == UnitMode::kProposals) {
    for (const auto& p : dataset.proposals) n += p.image_id == image_id;
  } else {
    for (const auto& g : dataset.ground_truth) n += g.image_id == image_id;
  }
  return n;
}

std::vector<std::int64_t> charged_costs(const ProposalDataset& dataset, UnitMode mode) {
  if (mode == UnitMode::kGroundTruth && !dataset.has_ground_truth()) {
    throw DataError("ground_truth unit mode requires ground-truth objects");
  }
  const DatasetIndex index(dataset);
  std::vector<std::int64_t> costs(dataset.images.size());
  for (std::size_t i = 0; i < costs.size(); ++i) {
    const std::size_t n = mode == UnitMode::kProposals ? index.proposals_on(i).size()
                                                       : index.ground_truth_on(i).size();
    costs[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(n));
  }
  return costs;
}

std::int64_t total_units(const ProposalDataset& dataset, UnitMode mode) {
  std::int64_t total = 0;
  for (auto c : charged_costs(dataset, mode)) total += c;
  return total;
}

std::vector<std::int64_t> objects_per_class(const ProposalDataset& dataset,
                                            const std::vector<std::size_t>& images, UnitMode mode) {
  const DatasetIndex index(dataset);
  std::vector<std::int64_t> counts(dataset.classes.size(), 0);
  for (std::size_t img : images) {
    if (mode == UnitMode::kProposals) {
      for (std::size_t p : index.proposals_on(img)) ++counts[dataset.proposals[p].class_id];
    } else {
      for (std::size_t g : index.ground_truth_on(img)) ++counts[dataset.ground_truth[g].class_id];
    }
  }
  return counts;
}

SelectionState::SelectionState(const ProposalDataset& dataset, UnitMode mode)
    : dataset_(&dataset),
      mode_(mode),
      costs_(charged_costs(dataset, mode)),
      selected_(dataset.images.size(), false) {
  if (!costs_.empty()) {
    max_cost_ = *std::max_element(costs_.begin(), costs_.end());
    min_cost_ = *std::min_element(costs_.begin(), costs_.end());
  }
}

bool SelectionState::add(std::size_t image, SelectionEntry entry) {
  if (selected_[image]) return false;
  selected_[image] = true;
  order_.push_back(image);
  entry.image_id = dataset_->images[image].id;
  entry.cost = costs_[image];
  entry.step = entry.step == 0 ? entries_.size() + 1 : entry.step;
  spent_ += costs_[image];
  entries_.push_back(std::move(entry));
  return true;
}

SelectionManifest SelectionState::finish(std::string method, std::uint64_t seed,
                                         BudgetSpec budget) const {
  SelectionManifest m;
  m.method = std::move(method);
  m.seed = seed;
  m.budget = budget;
  m.unit_mode = mode_;
  m.selected = entries_;
  m.realized_units = spent_;
  const auto counts = objects_per_class(*dataset_, order_, mode_);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    m.per_class_objects[dataset_->classes.names()[c]] = counts[c];
  }
  return m;
}

}  // namespace ofds
