#include "ofds/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ofds/errors.hpp"
#include "ofds/proposal_store.hpp"

namespace ofds::synth {
namespace {

using json = nlohmann::ordered_json;

std::size_t weighted_pick(const std::vector<double>& weights, std::mt19937_64& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double target = std::uniform_real_distribution<double>(0.0, total)(rng);
  double cum = 0.0;
  std::size_t last = weights.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    cum += weights[i];
    last = i;
    if (cum > target) return i;
  }
  return last;
}

void validate(const SynthSpec& spec) {
  if (spec.classes.empty()) throw DataError("synth: at least one class is required");
  if (spec.dim == 0) throw DataError("synth: dim must be positive");
  if (spec.min_objects_per_image == 0 || spec.min_objects_per_image > spec.max_objects_per_image) {
    throw DataError("synth: need 1 <= min_objects_per_image <= max_objects_per_image");
  }
  if (!(spec.duplicate_fraction >= 0.0 && spec.duplicate_fraction < 1.0)) {
    throw DataError("synth: duplicate_fraction must be in [0,1)");
  }
  if (spec.image_width <= 0 || spec.image_height <= 0) {
    throw DataError("synth: image size must be positive");
  }
  std::size_t total = 0;
  std::unordered_set<std::string> names;
  for (const auto& c : spec.classes) {
    if (!names.insert(c.name).second) throw DataError("synth: duplicate class name '" + c.name + "'");
    if (c.modes == 0) throw DataError("synth: class '" + c.name + "' needs at least one mode");
    if (c.spread < 0.0) throw DataError("synth: negative spread");
    if (!c.mode_means.empty()) {
      if (c.mode_means.size() != c.modes) throw DataError("synth: mode_means count != modes");
      for (const auto& m : c.mode_means) {
        if (m.size() != spec.dim) throw DataError("synth: mode mean dimension mismatch");
      }
    }
    total += c.objects;
  }
  if (total == 0 && spec.duplicate_fraction > 0.0) {
    throw DataError("synth: duplicate_fraction set but no objects to duplicate");
  }
  const std::size_t m = spec.classes.size();
  if (!spec.cooccurrence.empty()) {
    if (spec.cooccurrence.size() != m) throw DataError("synth: cooccurrence must be M x M");
    for (const auto& row : spec.cooccurrence) {
      if (row.size() != m) throw DataError("synth: cooccurrence must be M x M");
      for (double v : row) {
        if (!(v >= 0.0 && v <= 1.0)) throw DataError("synth: cooccurrence entries must be in [0,1]");
      }
    }
  }
  if (!spec.imbalance.empty()) {
    if (spec.imbalance.size() != m) throw DataError("synth: imbalance needs one factor per class");
    for (double f : spec.imbalance) {
      if (!(f > 0.0 && f <= 1.0)) throw DataError("synth: imbalance factors must be in (0,1]");
    }
  }
}

BBox random_box(std::int64_t width, std::int64_t height, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> frac(0.05, 0.4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w = std::round(frac(rng) * static_cast<double>(width));
  const double h = std::round(frac(rng) * static_cast<double>(height));
  const double x = std::floor(unit(rng) * (static_cast<double>(width) - w));
  const double y = std::floor(unit(rng) * (static_cast<double>(height) - h));
  return {x, y, w, h};
}

std::vector<std::size_t> object_counts(const ProposalDataset& ds) {
  std::vector<std::size_t> counts(ds.classes.size(), 0);
  for (const auto& p : ds.proposals) ++counts[p.class_id];
  return counts;
}

}  // namespace

SynthSpec spec_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    SynthSpec s;
    s.dim = j.value("dim", s.dim);
    s.min_objects_per_image = j.value("min_objects_per_image", s.min_objects_per_image);
    s.max_objects_per_image = j.value("max_objects_per_image", s.max_objects_per_image);
    s.cooccurrence = j.value("cooccurrence", s.cooccurrence);
    s.duplicate_fraction = j.value("duplicate_fraction", s.duplicate_fraction);
    s.imbalance = j.value("imbalance", s.imbalance);
    s.mode_scale = j.value("mode_scale", s.mode_scale);
    s.image_features = j.value("image_features", s.image_features);
    s.image_feature_noise = j.value("image_feature_noise", s.image_feature_noise);
    s.image_width = j.value("image_width", s.image_width);
    s.image_height = j.value("image_height", s.image_height);
    s.seed = j.value("seed", s.seed);
    for (const auto& c : j.at("classes")) {
      ClassSpec cs;
      cs.name = c.at("name").get<std::string>();
      cs.objects = c.at("objects").get<std::size_t>();
      cs.modes = c.value("modes", cs.modes);
      cs.spread = c.value("spread", cs.spread);
      cs.mode_means = c.value("mode_means", cs.mode_means);
      s.classes.push_back(std::move(cs));
    }
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("synth spec: ") + e.what());
  }
}

std::string spec_to_json(const SynthSpec& s) {
  json classes = json::array();
  for (const auto& c : s.classes) {
    json cj{{"name", c.name}, {"objects", c.objects}, {"modes", c.modes}, {"spread", c.spread}};
    if (!c.mode_means.empty()) cj["mode_means"] = c.mode_means;
    classes.push_back(std::move(cj));
  }
  json j{{"seed", s.seed},
         {"dim", s.dim},
         {"min_objects_per_image", s.min_objects_per_image},
         {"max_objects_per_image", s.max_objects_per_image},
         {"duplicate_fraction", s.duplicate_fraction},
         {"mode_scale", s.mode_scale},
         {"image_features", s.image_features},
         {"image_feature_noise", s.image_feature_noise},
         {"image_width", s.image_width},
         {"image_height", s.image_height},
         {"classes", std::move(classes)}};
  if (!s.cooccurrence.empty()) j["cooccurrence"] = s.cooccurrence;
  if (!s.imbalance.empty()) j["imbalance"] = s.imbalance;
  return j.dump(2) + "\n";
}

SynthSpec read_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("synth spec: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return spec_from_json(ss.str());
}

ProposalDataset generate(const SynthSpec& spec) {
  validate(spec);
  const std::size_t m = spec.classes.size();
  const std::size_t dim = spec.dim;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Object features per class, modes balanced and order shuffled.
  std::vector<std::vector<std::vector<float>>> pools(m);
  for (std::size_t c = 0; c < m; ++c) {
    const auto& cs = spec.classes[c];
    std::vector<std::vector<double>> means = cs.mode_means;
    if (means.empty()) {
      means.assign(cs.modes, std::vector<double>(dim));
      for (auto& mean : means) {
        for (auto& v : mean) v = spec.mode_scale * normal(rng);
      }
    }
    for (std::size_t i = 0; i < cs.objects; ++i) {
      const auto& mean = means[i % cs.modes];
      std::vector<float> f(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        f[d] = static_cast<float>(mean[d] + cs.spread * normal(rng));
      }
      pools[c].push_back(std::move(f));
    }
    std::shuffle(pools[c].begin(), pools[c].end(), rng);
  }

  ProposalDataset ds;
  std::vector<std::string> names;
  for (const auto& c : spec.classes) names.push_back(c.name);
  ds.classes = ClassTable(std::move(names));
  ds.features = FeatureMatrix(0, dim);

  std::vector<std::size_t> next(m, 0);
  auto remaining = [&](std::size_t c) { return static_cast<double>(pools[c].size() - next[c]); };
  std::uniform_int_distribution<std::size_t> per_image(spec.min_objects_per_image,
                                                       spec.max_objects_per_image);
  std::size_t image_no = 0;
  while (true) {
    std::vector<double> weights(m);
    for (std::size_t c = 0; c < m; ++c) weights[c] = remaining(c);
    if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) break;

    const std::size_t target = per_image(rng);
    const std::size_t primary = weighted_pick(weights, rng);
    std::vector<std::size_t> classes_on_image{primary};
    ++next[primary];
    while (classes_on_image.size() < target) {
      for (std::size_t c = 0; c < m; ++c) {
        const double co = spec.cooccurrence.empty() ? 1.0 : spec.cooccurrence[primary][c];
        weights[c] = remaining(c) * co;
      }
      if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) break;
      const std::size_t c = weighted_pick(weights, rng);
      classes_on_image.push_back(c);
      ++next[c];
    }

    char id[32];
    std::snprintf(id, sizeof(id), "img_%06zu", image_no++);
    ImageRecord img{id, spec.image_width, spec.image_height, std::nullopt};
    std::vector<double> image_mean(dim, 0.0);
    // Objects were taken from the pools above; walk the same picks again.
    std::vector<std::size_t> taken(m, 0);
    for (std::size_t c : classes_on_image) ++taken[c];
    std::vector<std::size_t> cursor(m);
    for (std::size_t c = 0; c < m; ++c) cursor[c] = next[c] - taken[c];
    for (std::size_t c : classes_on_image) {
      const auto& f = pools[c][cursor[c]++];
      for (std::size_t d = 0; d < dim; ++d) image_mean[d] += f[d];
      ObjectProposal p;
      p.image_id = img.id;
      p.class_id = static_cast<std::int32_t>(c);
      p.confidence = 1.0;
      p.bbox = random_box(spec.image_width, spec.image_height, rng);
      p.feature_index = ds.features.rows();
      ds.features.append_row(f);
      ds.ground_truth.push_back({p.image_id, p.class_id, p.bbox});
      ds.proposals.push_back(std::move(p));
    }
    if (spec.image_features) {
      std::vector<float> feat(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        feat[d] = static_cast<float>(image_mean[d] / static_cast<double>(classes_on_image.size()) +
                                     spec.image_feature_noise * normal(rng));
      }
      img.image_feature = std::move(feat);
    }
    ds.images.push_back(std::move(img));
  }

  if (!spec.imbalance.empty()) ds = apply_imbalance(ds, spec.imbalance, spec.seed);
  if (spec.duplicate_fraction > 0.0) ds = inject_duplicates(ds, spec.duplicate_fraction, spec.seed);
  return ds;
}

ProposalDataset keep_images(const ProposalDataset& ds, const std::vector<bool>& keep) {
  ProposalDataset out;
  out.classes = ds.classes;
  out.features = FeatureMatrix(0, ds.features.dim());
  std::unordered_set<std::string> kept;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    if (!keep[i]) continue;
    out.images.push_back(ds.images[i]);
    kept.insert(ds.images[i].id);
  }
  for (const auto& p : ds.proposals) {
    if (!kept.contains(p.image_id)) continue;
    ObjectProposal q = p;
    q.feature_index = out.features.rows();
    out.features.append_row(ds.feature_of(p));
    out.proposals.push_back(std::move(q));
  }
  for (const auto& g : ds.ground_truth) {
    if (kept.contains(g.image_id)) out.ground_truth.push_back(g);
  }
  return out;
}

ProposalDataset apply_imbalance(const ProposalDataset& ds, const std::vector<double>& factors,
                                std::uint64_t seed) {
  const std::size_t m = ds.classes.size();
  if (factors.size() != m) throw UsageError("apply_imbalance: one factor per class required");
  for (double f : factors) {
    if (!(f > 0.0 && f <= 1.0)) throw UsageError("apply_imbalance: factors must be in (0,1]");
  }
  const auto original = object_counts(ds);
  std::vector<std::size_t> target(m);
  for (std::size_t c = 0; c < m; ++c) {
    target[c] = static_cast<std::size_t>(std::floor(factors[c] * static_cast<double>(original[c]) + 1e-9));
  }
  const DatasetIndex index(ds);
  std::vector<std::vector<std::size_t>> per_image(ds.images.size(), std::vector<std::size_t>(m, 0));
  for (std::size_t p = 0; p < ds.proposals.size(); ++p) {
    ++per_image[index.image_of_proposal(p)][ds.proposals[p].class_id];
  }

  std::vector<std::size_t> order(ds.images.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto counts = original;
  std::vector<bool> keep(ds.images.size(), true);
  auto over = [&](std::size_t c) { return factors[c] < 1.0 && counts[c] > target[c]; };
  std::size_t widest = 0;
  for (const auto& row : per_image) widest = std::max(widest, std::accumulate(row.begin(), row.end(), std::size_t{0}));

  // Heaviest reduction first, so its removals land while milder classes still have room.
  std::vector<std::size_t> classes(m);
  std::iota(classes.begin(), classes.end(), 0);
  std::stable_sort(classes.begin(), classes.end(),
                   [&](std::size_t x, std::size_t y) { return factors[x] < factors[y]; });

  // Pass 0: only over-target pruned classes on the image.
  // Pass 1: no pruned class that is already at its target.
  // Pass 2: pruned classes at target stay within one image of it.
  // Pass 3: anything.
  for (std::size_t cls : classes) {
    for (int pass = 0; pass < 4 && over(cls); ++pass) {
      for (std::size_t img : order) {
        if (!over(cls)) break;
        if (!keep[img] || per_image[img][cls] == 0) continue;
        bool allowed = true;
        for (std::size_t c = 0; c < m && allowed; ++c) {
          if (per_image[img][c] == 0 || over(c)) continue;
          if (pass == 0 || (pass == 1 && factors[c] < 1.0)) allowed = false;
          if (pass == 2 && factors[c] < 1.0 && counts[c] - per_image[img][c] + widest <= target[c]) {
            allowed = false;
          }
        }
        if (!allowed) continue;
        keep[img] = false;
        for (std::size_t c = 0; c < m; ++c) counts[c] -= per_image[img][c];
      }
    }
  }
  return keep_images(ds, keep);
}

ProposalDataset inject_duplicates(const ProposalDataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw UsageError("inject_duplicates: fraction must be in [0,1)");
  }
  const auto n_copies =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ds.images.size())));
  if (n_copies == 0) return ds;

  std::vector<std::size_t> order(ds.images.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::shuffle(order.begin(), order.end(), rng);

  std::unordered_set<std::string> ids;
  for (const auto& img : ds.images) ids.insert(img.id);
  const DatasetIndex index(ds);
  ProposalDataset out = ds;
  for (std::size_t k = 0; k < n_copies; ++k) {
    const std::size_t src = order[k];
    ImageRecord copy = ds.images[src];
    std::string id = copy.id + "_dup";
    for (int suffix = 2; ids.contains(id); ++suffix) {
      id = copy.id + "_dup" + std::to_string(suffix);
    }
    ids.insert(id);
    copy.id = id;
    for (std::size_t p : index.proposals_on(src)) {
      ObjectProposal q = ds.proposals[p];
      q.image_id = id;
      q.feature_index = out.features.rows();
      out.features.append_row(ds.feature_of(ds.proposals[p]));
      out.proposals.push_back(std::move(q));
    }
    for (std::size_t g : index.ground_truth_on(src)) {
      GroundTruthObject h = ds.ground_truth[g];
      h.image_id = id;
      out.ground_truth.push_back(std::move(h));
    }
    out.images.push_back(std::move(copy));
  }
  return out;
}

baselines::SimilarityTable similarity_table(const ProposalDataset& ds, double noise,
                                            std::uint64_t seed) {
  const std::size_t m = ds.classes.size();
  const DatasetIndex index(ds);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  baselines::SimilarityTable table;
  table.per_class.resize(m);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
      const auto& props = index.proposals_on(i);
      std::size_t hits = 0;
      for (std::size_t p : props) hits += ds.proposals[p].class_id == static_cast<std::int32_t>(c);
      const double share = props.empty() ? 0.0 : static_cast<double>(hits) / props.size();
      table.per_class[c].push_back({ds.images[i].id, share + noise * normal(rng)});
    }
  }
  return table;
}

SynthSpec default_spec(std::uint64_t seed) {
  SynthSpec s;
  s.seed = seed;
  s.dim = 16;
  s.min_objects_per_image = 1;
  s.max_objects_per_image = 4;
  s.mode_scale = 10.0;
  const char* names[] = {"aircraft", "bicycle", "bird",  "boat",  "bottle",
                         "bus",      "car",     "cat",   "chair", "cow"};
  for (std::size_t c = 0; c < 10; ++c) {
    ClassSpec cs;
    cs.name = names[c];
    cs.objects = 200 + 20 * c;
    cs.modes = 3;
    cs.spread = 1.0;
    s.classes.push_back(std::move(cs));
  }
  // Objects mostly share an image with their own class.
  s.cooccurrence.assign(10, std::vector<double>(10, 0.1));
  for (std::size_t c = 0; c < 10; ++c) s.cooccurrence[c][c] = 1.0;
  return s;
}

SynthSpec imbalanced_spec(std::uint64_t seed) {
  SynthSpec s = default_spec(seed);
  // Classes 0..5 are the six smallest.
  s.imbalance = {0.01, 0.05, 0.15, 0.20, 0.25, 0.50, 1.0, 1.0, 1.0, 1.0};
  return s;
}

}  // namespace ofds::synth
