#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "ofds/engine.hpp"
#include "ofds/errors.hpp"
#include "ofds/metrics.hpp"
#include "ofds/proposal_store.hpp"
#include "ofds/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ofds;
using namespace ofds::engine;
using test::make_dataset;

namespace {

ProposalDataset small_synth(std::uint64_t seed, double dup = 0.0) {
  auto spec = synth::default_spec(seed);
  for (auto& c : spec.classes) c.objects = 25 + 5 * static_cast<std::size_t>(seed % 3);
  spec.duplicate_fraction = dup;
  return synth::generate(spec);
}

std::set<std::string> ids(const SelectionManifest& m) {
  std::set<std::string> s;
  for (const auto& e : m.selected) s.insert(e.image_id);
  return s;
}

}  // namespace

TEST_CASE("class_processing_order") {
  // counts a:5, b:2, c:9
  std::vector<test::ObjectSpec> objs;
  for (int i = 0; i < 5; ++i) objs.push_back({0, 0, {0.f}});
  for (int i = 0; i < 2; ++i) objs.push_back({0, 1, {0.f}});
  for (int i = 0; i < 9; ++i) objs.push_back({0, 2, {0.f}});
  CHECK(class_processing_order(make_dataset(1, {"a", "b", "c"}, objs)) ==
        std::vector<std::int32_t>{1, 0, 2});

  const auto equal = make_dataset(1, {"a", "b", "c"}, {{0, 2, {0.f}}, {0, 1, {0.f}}, {0, 0, {0.f}}});
  CHECK(class_processing_order(equal) == std::vector<std::int32_t>{0, 1, 2});

  const auto zero = make_dataset(1, {"a", "b", "c"}, {{0, 0, {0.f}}, {0, 2, {0.f}}});
  CHECK(class_processing_order(zero).front() == 1);
}

TEST_CASE("per_class_quota") {
  CHECK(per_class_quota(1000, 0, 10, 4.0) == 25);
  CHECK(per_class_quota(1000, 1000, 3, 4.0) == 0);
  CHECK(per_class_quota(500, 100, 3, 2.0) == 66);
  CHECK(per_class_quota(10, 12, 2, 1.0) == 0);  // overspent
  CHECK(per_class_quota(10, 6, 5, 1.5) == 1);   // floor gives 0, 4 >= 1.5 units left
  CHECK(per_class_quota(10, 9, 5, 1.5) == 0);   // 1 unit left < N_O
  CHECK(per_class_quota(30, 0, 10, 0.1) == 29);  // the double 0.1 is slightly above 1/10
  CHECK_THROWS_AS(per_class_quota(10, 0, 0, 1.0), UsageError);
  CHECK_THROWS_AS(per_class_quota(10, 0, 1, 0.0), UsageError);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const std::int64_t b = 1 + static_cast<std::int64_t>(rng() % 100000);
    const std::int64_t spent = static_cast<std::int64_t>(rng() % (b + 50));
    const std::int64_t rem = 1 + static_cast<std::int64_t>(rng() % 30);
    const double n_o = std::uniform_real_distribution<double>(0.05, 12.0)(rng);
    CHECK(per_class_quota(b, spent, rem, n_o) == oracle::quota(b, spent, rem, n_o));
  }
}

TEST_CASE("unit_cost") {
  auto ds = make_dataset(2, {"a"}, {{0, 0, {0.f}}, {0, 0, {0.f}}, {0, 0, {0.f}}});
  CHECK(unit_cost(ds, "im000", UnitMode::kProposals) == 3);
  CHECK(unit_cost(ds, "im001", UnitMode::kProposals) == 0);
  CHECK(charged_costs(ds, UnitMode::kProposals) == std::vector<std::int64_t>{3, 1});
  CHECK(total_units(ds, UnitMode::kProposals) == 4);
  CHECK_THROWS_AS(unit_cost(ds, "im000", UnitMode::kGroundTruth), DataError);
  CHECK_THROWS_AS(unit_cost(ds, "zzz", UnitMode::kProposals), DataError);

  auto two = make_dataset(1, {"a"}, {{0, 0, {0.f}}, {0, 0, {0.f}}});
  for (int i = 0; i < 5; ++i) two.ground_truth.push_back({"im000", 0, {}});
  CHECK(unit_cost(two, "im000", UnitMode::kGroundTruth) == 5);
  CHECK(unit_cost(two, "im000", UnitMode::kProposals) == 2);
}

TEST_CASE("estimate_avg_units") {
  const auto ds = make_dataset(3, {"a"}, {{0, 0, {0.f}}, {0, 0, {0.f}}, {0, 0, {0.f}}, {2, 0, {0.f}}});
  CHECK(estimate_avg_units(ds) == 2.0);
  CHECK_THROWS_AS(estimate_avg_units(make_dataset(2, {"a"}, {})), DataError);
}

TEST_CASE("select: identical single objects collapse to one representative") {
  const auto ds = make_dataset(3, {"a"}, {{0, 0, {1.f, 1.f}}, {1, 0, {1.f, 1.f}}, {2, 0, {1.f, 1.f}}});
  const auto m = select(ds, {1, 1.0});
  REQUIRE(m.selected.size() == 1);
  CHECK(m.realized_units == 1);
  // More budget still yields one image: the others duplicate a selected object.
  CHECK(select(ds, {3, 1.0}).selected.size() == 1);
}

TEST_CASE("select: saturation with disjoint classes") {
  const auto ds = make_dataset(6, {"a", "b"},
                               {{0, 0, {0.f, 0.f}}, {1, 0, {5.f, 0.f}}, {2, 0, {9.f, 1.f}},
                                {3, 1, {0.f, 7.f}}, {4, 1, {3.f, 3.f}}, {5, 1, {8.f, 8.f}}});
  const auto m = select(ds, {100, 1.0});
  CHECK(m.selected.size() == 6);
  const auto stats = metrics::subset_stats(m, ds);
  CHECK(stats.covered == std::vector<bool>{true, true});
}

TEST_CASE("select: hand-traced two-class fixture") {
  // Class a: blob (0,0) on images 0,1 and blob (10,10) on images 2,3.
  // Class b: blob (5,-5) on images 4,5.
  const auto ds = make_dataset(6, {"a", "b"},
                               {{0, 0, {0.f, 0.f}}, {1, 0, {0.f, 0.f}}, {2, 0, {10.f, 10.f}},
                                {3, 0, {10.f, 10.f}}, {4, 1, {5.f, -5.f}}, {5, 1, {5.f, -5.f}}});
  // b is rarer and goes first: quota floor(4 / 2) = 2 shrinks to its one
  // distinct feature, so image 4 (lowest index) is taken. a then gets
  // floor(3 / 1) = 3, shrunk to its two blobs; one image per blob, each the
  // lowest-index member. The second sweep finds nothing new.
  const auto m = select(ds, {4, 1.0}, {});
  REQUIRE(m.selected.size() == 3);
  CHECK(m.selected[0].image_id == "im004");
  CHECK(m.selected[0].class_id == 1);
  CHECK(m.selected[0].step == 1);
  std::set<std::string> a{m.selected[1].image_id, m.selected[2].image_id};
  CHECK(a == std::set<std::string>{"im000", "im002"});
  CHECK(m.selected[1].class_id == 0);
  CHECK(m.selected[1].step == 2);
  CHECK(m.selected[1].distance == 0.0);
  CHECK(m.realized_units == 3);
  CHECK(m.per_class_objects.at("a") == 2);
  CHECK(m.per_class_objects.at("b") == 1);
  CHECK(select(ds, {4, 1.0}, {}) == m);
}

TEST_CASE("select: budget below the cheapest image returns an empty manifest") {
  const auto ds = make_dataset(2, {"a"}, {{0, 0, {0.f}}, {0, 0, {1.f}}, {1, 0, {2.f}}, {1, 0, {3.f}}});
  const auto m = select(ds, {1, 2.0});
  CHECK(m.selected.empty());
  CHECK(m.realized_units == 0);
}

TEST_CASE("select: errors") {
  const auto ds = make_dataset(1, {"a"}, {{0, 0, {0.f}}});
  CHECK_THROWS_AS(select(ds, {0, 1.0}), UsageError);
  CHECK_THROWS_AS(select(ds, {5, 0.0}), UsageError);
  CHECK_THROWS_AS(select(make_dataset(0, {"a"}, {}), {5, 1.0}), DataError);
  OfdsOptions gt;
  gt.unit_mode = UnitMode::kGroundTruth;
  CHECK_THROWS_AS(select(ds, {5, 1.0}, gt), DataError);
}

TEST_CASE("select: zero-count classes are skipped") {
  const auto ds = make_dataset(3, {"a", "empty", "b"},
                               {{0, 0, {0.f}}, {1, 2, {3.f}}, {2, 2, {6.f}}});
  const auto m = select(ds, {10, 1.0});
  CHECK(m.selected.size() == 3);
  CHECK(m.per_class_objects.at("empty") == 0);
}

TEST_CASE("select: single pass without fill") {
  const auto ds = small_synth(1);
  OfdsOptions once;
  once.fill_budget = false;
  const auto b = total_units(ds, UnitMode::kProposals) / 10;
  const auto m1 = select(ds, {b, estimate_avg_units(ds)}, once);
  const auto m2 = select(ds, {b, estimate_avg_units(ds)});
  CHECK(m1.realized_units <= m2.realized_units);
  // Without fill every class is visited once: steps are at most M.
  for (const auto& e : m1.selected) CHECK(e.step <= ds.classes.size());
  // The filled run extends the single pass.
  REQUIRE(m2.selected.size() >= m1.selected.size());
  for (std::size_t i = 0; i < m1.selected.size(); ++i) {
    CHECK(m2.selected[i] == m1.selected[i]);
  }
}

TEST_CASE("select: properties on synthetic data") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto ds = small_synth(seed, seed % 2 ? 0.2 : 0.0);
    const double n_o = estimate_avg_units(ds);
    const auto total = total_units(ds, UnitMode::kProposals);
    SelectionState probe(ds, UnitMode::kProposals);
    const auto counts = class_counts(ds);
    const auto rarest = *std::min_element(counts.begin(), counts.end());
    for (double frac : {0.02, 0.05, 0.2, 0.5, 1.0}) {
      const auto b = std::max<std::int64_t>(1, static_cast<std::int64_t>(frac * total));
      const auto m = select(ds, {b, n_o}, {seed});
      CAPTURE(seed);
      CAPTURE(frac);
      // Budget safety.
      CHECK(m.realized_units <= b + probe.max_cost());
      // Unique images; recorded costs add up.
      CHECK(ids(m).size() == m.selected.size());
      std::int64_t sum = 0;
      for (const auto& e : m.selected) {
        CHECK(e.cost >= 1);
        sum += e.cost;
      }
      CHECK(sum == m.realized_units);
      // Rarity first.
      REQUIRE_FALSE(m.selected.empty());
      CHECK(counts[*m.selected.front().class_id] == rarest);
      // Representatives never duplicate one another within a class.
      CHECK(metrics::representative_duplicate_pairs(m, ds, 0.0) == 0);
      // Determinism, including the serialized form.
      CHECK(manifest_to_json(select(ds, {b, n_o}, {seed})) == manifest_to_json(m));
    }
  }
}

TEST_CASE("select: coverage when the budget affords every class") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto ds = small_synth(seed);
    SelectionState probe(ds, UnitMode::kProposals);
    const auto b = static_cast<std::int64_t>(ds.classes.size()) * probe.max_cost();
    const auto m = select(ds, {b, estimate_avg_units(ds)}, {seed});
    const auto stats = metrics::subset_stats(m, ds);
    for (bool c : stats.covered) CHECK(c);
  }
}

TEST_CASE("select: ground-truth unit mode charges ground-truth counts") {
  auto ds = small_synth(2);
  // Drop some proposals so the two modes disagree.
  ds = filter_small_boxes(ds, 0.02);
  OfdsOptions gt;
  gt.unit_mode = UnitMode::kGroundTruth;
  const auto m = select(ds, {60, 2.0}, gt);
  CHECK(m.unit_mode == UnitMode::kGroundTruth);
  for (const auto& e : m.selected) {
    CHECK(e.cost == std::max<std::int64_t>(1, unit_cost(ds, e.image_id, UnitMode::kGroundTruth)));
  }
}
