#include <doctest.h>

#include <algorithm>
#include <set>

#include "ofds/clustering.hpp"
#include "ofds/errors.hpp"
#include "ofds/metrics.hpp"
#include "ofds/proposal_store.hpp"
#include "ofds/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ofds;
using namespace ofds::synth;

namespace {

SynthSpec one_class(std::size_t objects, std::size_t modes = 1) {
  SynthSpec s;
  ClassSpec c;
  c.name = "thing";
  c.objects = objects;
  c.modes = modes;
  s.classes.push_back(c);
  s.dim = 4;
  return s;
}

SelectionManifest all_images(const ProposalDataset& ds) {
  SelectionState s(ds, UnitMode::kProposals);
  for (std::size_t i = 0; i < ds.images.size(); ++i) s.add(i, {});
  return s.finish("all", 0, {1, 1.0});
}

std::vector<std::int64_t> counts_of(const ProposalDataset& ds) {
  std::vector<std::int64_t> out;
  for (auto c : class_counts(ds)) out.push_back(static_cast<std::int64_t>(c));
  return out;
}

}  // namespace

TEST_CASE("generate: counts forced by the spec") {
  const auto ds = generate(one_class(10));
  CHECK(ds.images.size() == 10);
  CHECK(ds.proposals.size() == 10);
  CHECK(ds.ground_truth.size() == 10);
  for (const auto& p : ds.proposals) {
    CHECK(p.confidence == 1.0);
    CHECK(p.bbox.x >= 0);
    CHECK(p.bbox.x + p.bbox.w <= 640);
    CHECK(p.bbox.y + p.bbox.h <= 480);
  }
  validate_dataset(ds);
}

TEST_CASE("generate: same seed gives identical files") {
  test::TempDir dir;
  const auto spec = imbalanced_spec(4);
  write_dataset(generate(spec), dir / "a.jsonl", dir / "a.bin");
  write_dataset(generate(spec), dir / "b.jsonl", dir / "b.bin");
  CHECK(test::read_text(dir / "a.jsonl") == test::read_text(dir / "b.jsonl"));
  CHECK(test::read_text(dir / "a.bin") == test::read_text(dir / "b.bin"));
  CHECK_FALSE(generate(imbalanced_spec(5)) == generate(spec));
}

TEST_CASE("generate: well-separated modes are recovered by k-means") {
  auto spec = one_class(8, 2);
  spec.classes[0].spread = 0.1;
  spec.classes[0].mode_means = {{0, 0, 0, 0}, {30, 30, 30, 30}};
  const auto ds = generate(spec);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = clustering::kmeans(ds.features, 2, {seed});
    CHECK(c.wcss == doctest::Approx(oracle::optimal_partition_wcss(ds.features, 2)));
    for (std::size_t i = 0; i < ds.features.rows(); ++i) {
      const bool far = ds.features.row(i)[0] > 15.0f;
      const bool far0 = ds.features.row(0)[0] > 15.0f;
      CHECK((c.assignment[i] == c.assignment[0]) == (far == far0));
    }
  }
}

TEST_CASE("generate: contradictory specs") {
  auto empty = one_class(0);
  empty.duplicate_fraction = 0.2;
  CHECK_THROWS_AS(generate(empty), DataError);
  auto bad = one_class(5);
  bad.imbalance = {0.0};
  CHECK_THROWS_AS(generate(bad), DataError);
  bad = one_class(5);
  bad.cooccurrence = {{1.0, 0.5}};
  CHECK_THROWS_AS(generate(bad), DataError);
  bad = one_class(5);
  bad.min_objects_per_image = 3;
  bad.max_objects_per_image = 2;
  CHECK_THROWS_AS(generate(bad), DataError);
  CHECK_THROWS_AS(spec_from_json("{\"classes\":[{\"name\":\"a\"}]}"), DataError);
}

TEST_CASE("spec JSON round trip") {
  auto spec = imbalanced_spec(9);
  spec.duplicate_fraction = 0.2;
  const auto back = spec_from_json(spec_to_json(spec));
  CHECK(spec_to_json(back) == spec_to_json(spec));
  CHECK(generate(back) == generate(spec));
}

TEST_CASE("apply_imbalance") {
  SUBCASE("factor 1 is the identity") {
    const auto ds = generate(default_spec(1));
    CHECK(apply_imbalance(ds, std::vector<double>(10, 1.0), 3) == ds);
  }
  SUBCASE("single class halved") {
    const auto ds = generate(one_class(10));
    CHECK(apply_imbalance(ds, {0.5}, 0).images.size() == 5);
  }
  SUBCASE("two co-occurring classes, one pruned to 1%") {
    SynthSpec s;
    s.classes = {{"rare", 300, 1, 0.5, {}}, {"common", 300, 1, 0.5, {}}};
    s.dim = 2;
    s.max_objects_per_image = 3;
    s.cooccurrence = {{1.0, 0.3}, {0.3, 1.0}};
    const auto ds = generate(s);
    const auto out = apply_imbalance(ds, {0.01, 1.0}, 5);
    const auto before = class_counts(ds);
    const auto after = class_counts(out);
    CHECK(after[0] <= 3);
    CHECK(after[1] <= before[1]);
    // Every dropped image carried the pruned class.
    std::set<std::string> kept;
    for (const auto& img : out.images) kept.insert(img.id);
    const DatasetIndex index(ds);
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
      if (kept.contains(ds.images[i].id)) continue;
      bool rare = false;
      for (std::size_t p : index.proposals_on(i)) rare |= ds.proposals[p].class_id == 0;
      CHECK(rare);
    }
  }
  SUBCASE("never increases counts and lands within one image of the target") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto spec = default_spec(seed);
      const auto ds = generate(spec);
      const std::vector<double> f{0.01, 0.05, 0.15, 0.20, 0.25, 0.50, 1.0, 1.0, 1.0, 1.0};
      const auto out = apply_imbalance(ds, f, seed);
      const auto before = class_counts(ds);
      const auto after = class_counts(out);
      for (std::size_t c = 0; c < f.size(); ++c) {
        CHECK(after[c] <= before[c]);
        const auto target = static_cast<std::size_t>(std::floor(f[c] * before[c] + 1e-9));
        if (f[c] < 1.0) {
          CHECK(after[c] <= target);
          CHECK(after[c] + spec.max_objects_per_image > target);
        }
      }
      validate_dataset(out);
    }
  }
}

TEST_CASE("inject_duplicates") {
  const auto ds = generate(one_class(10));
  CHECK(inject_duplicates(ds, 0.0, 1) == ds);
  const auto dup = inject_duplicates(ds, 0.2, 1);
  REQUIRE(dup.images.size() == 12);
  CHECK(dup.proposals.size() == 12);
  const DatasetIndex index(dup);
  for (std::size_t i = 10; i < 12; ++i) {
    const auto& id = dup.images[i].id;
    REQUIRE(id.size() > 4);
    CHECK(id.substr(id.size() - 4) == "_dup");
    const auto src = index.image_index(id.substr(0, id.size() - 4));
    const auto& a = dup.proposals[index.proposals_on(src)[0]];
    const auto& b = dup.proposals[index.proposals_on(i)[0]];
    CHECK(a.bbox == b.bbox);
    CHECK(squared_distance(dup.feature_of(a), dup.feature_of(b)) == 0.0);
  }
  CHECK(metrics::duplicate_pairs(all_images(dup), dup, 0.0) >= 2);

  const auto big = generate(imbalanced_spec(2));
  const auto big_dup = inject_duplicates(big, 0.2, 2);
  const auto injected = big_dup.images.size() - big.images.size();
  CHECK(injected == static_cast<std::size_t>(std::llround(0.2 * big.images.size())));
  CHECK(metrics::duplicate_pairs(all_images(big_dup), big_dup, 0.0) >= injected);
  // Copying a copy keeps ids unique.
  const auto twice = inject_duplicates(inject_duplicates(ds, 0.5, 1), 0.6, 1);
  std::set<std::string> ids;
  for (const auto& img : twice.images) ids.insert(img.id);
  CHECK(ids.size() == twice.images.size());
}

TEST_CASE("presets") {
  const auto ds = generate(imbalanced_spec(0));
  const auto counts = counts_of(ds);
  for (std::size_t c = 0; c < 6; ++c) CHECK(counts[c] < counts[9]);
  CHECK(metrics::balance_score(counts) < metrics::balance_score(counts_of(generate(default_spec(0)))));
}

TEST_CASE("similarity_table layout") {
  const auto ds = generate(default_spec(3));
  const auto t = similarity_table(ds, 0.0, 1);
  REQUIRE(t.per_class.size() == 10);
  for (const auto& cls : t.per_class) {
    REQUIRE(cls.size() == ds.images.size());
    for (std::size_t i = 0; i < cls.size(); ++i) CHECK(cls[i].image_id == ds.images[i].id);
  }
  // Without noise the score is the class share of the image's proposals.
  const DatasetIndex index(ds);
  const auto& props = index.proposals_on(0);
  const auto cls = ds.proposals[props[0]].class_id;
  CHECK(t.per_class[cls][0].score > 0.0);
}
