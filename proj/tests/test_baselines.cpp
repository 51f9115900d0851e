#include <doctest.h>

#include <random>
#include <set>

#include "ofds/baselines.hpp"
#include "ofds/errors.hpp"
#include "ofds/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ofds;
using namespace ofds::baselines;

namespace {

// One single-object image per feature row, so each image costs one unit.
ProposalDataset images_at(const std::vector<std::vector<float>>& feats, std::size_t classes = 1) {
  std::vector<test::ObjectSpec> objs;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    objs.push_back({i, static_cast<std::int32_t>(i % classes), feats[i]});
  }
  auto ds = test::make_dataset(feats.size(), names, objs);
  for (std::size_t i = 0; i < feats.size(); ++i) ds.images[i].image_feature = feats[i];
  return ds;
}

std::set<std::string> id_set(const SelectionManifest& m) {
  std::set<std::string> out;
  for (const auto& e : m.selected) out.insert(e.image_id);
  return out;
}

std::vector<std::string> order(const SelectionManifest& m) {
  std::vector<std::string> out;
  for (const auto& e : m.selected) out.push_back(e.image_id);
  return out;
}

SimilarityTable table(const std::vector<std::vector<double>>& scores, const ProposalDataset& ds) {
  SimilarityTable t;
  t.per_class.resize(scores.size());
  for (std::size_t c = 0; c < scores.size(); ++c) {
    for (std::size_t i = 0; i < scores[c].size(); ++i) {
      t.per_class[c].push_back({ds.images[i].id, scores[c][i]});
    }
  }
  return t;
}

ProposalDataset synth_small(std::uint64_t seed) {
  auto spec = synth::default_spec(seed);
  for (auto& c : spec.classes) c.objects = 30;
  return synth::generate(spec);
}

}  // namespace

TEST_CASE("random") {
  const auto ds = synth_small(0);
  const auto all = select_random(ds, {1000000, 1.0}, 0);
  CHECK(all.selected.size() == ds.images.size());
  CHECK(select_random(ds, {50, 1.0}, 4) == select_random(ds, {50, 1.0}, 4));
  CHECK(select_random(ds, {50, 1.0}, 4) != select_random(ds, {50, 1.0}, 5));
  const auto one = images_at({{0.f}, {1.f}, {2.f}});
  CHECK(select_random(one, {1, 1.0}, 9).selected.size() == 1);
}

TEST_CASE("kcenters: points on a line") {
  const auto ds = images_at({{0.f}, {1.f}, {10.f}});
  KCentersOptions opt;
  opt.start = 0;
  opt.batch_size = 3;
  const auto m = select_kcenters(ds, {3, 1.0}, opt);
  CHECK(order(m) == std::vector<std::string>{"im000", "im002", "im001"});
  CHECK(m.selected[1].distance == 10.0);
  CHECK(m.selected[2].distance == 1.0);
}

TEST_CASE("kcenters: single image and errors") {
  const auto one = images_at({{4.f, 2.f}});
  CHECK(select_kcenters(one, {5, 1.0}).selected.size() == 1);
  auto missing = images_at({{0.f}, {1.f}});
  missing.images[1].image_feature.reset();
  CHECK_THROWS_AS(select_kcenters(missing, {2, 1.0}), DataError);
  KCentersOptions zero;
  zero.batch_size = 0;
  CHECK_THROWS_AS(select_kcenters(one, {1, 1.0}, zero), UsageError);
}

TEST_CASE("kcenters: full batch equals exact greedy") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    const auto pts = test::random_matrix(n, 3, rng);
    std::vector<std::vector<float>> rows;
    for (std::size_t i = 0; i < n; ++i) rows.emplace_back(pts.row(i).begin(), pts.row(i).end());
    const auto ds = images_at(rows);
    KCentersOptions opt;
    opt.seed = static_cast<std::uint64_t>(trial);
    opt.batch_size = n + static_cast<std::size_t>(trial % 3);
    const auto m = select_kcenters(ds, {static_cast<std::int64_t>(n), 1.0}, opt);
    REQUIRE(m.selected.size() == n);
    const std::size_t start = std::stoul(m.selected[0].image_id.substr(2));
    std::vector<std::string> expect;
    for (std::size_t i : oracle::greedy_kcenters(pts, start, n)) expect.push_back(ds.images[i].id);
    CHECK(order(m) == expect);
  }
}

TEST_CASE("kcenters: small batches still give a valid selection") {
  const auto ds = synth_small(2);
  KCentersOptions opt;
  opt.batch_size = 7;
  const auto m = select_kcenters(ds, {80, 1.0}, opt);
  CHECK(id_set(m).size() == m.selected.size());
  CHECK(m.realized_units >= 80);
  CHECK(select_kcenters(ds, {80, 1.0}, opt) == m);
}

TEST_CASE("prototypes") {
  SUBCASE("one class ranks by distance to the mean") {
    const auto ds = images_at({{0.f}, {9.f}, {4.f}, {6.f}});  // mean 4.75
    const auto m = select_prototypes(ds, {4, 1.0}, 0);
    CHECK(order(m) == std::vector<std::string>{"im002", "im003", "im001", "im000"});
  }
  SUBCASE("well-separated clusters: one closest image each") {
    const auto ds = images_at({{0.f, 0.f}, {0.f, 1.f}, {0.f, 0.4f}, {50.f, 50.f}, {50.f, 52.f},
                               {50.f, 50.9f}},
                              2);
    const auto m = select_prototypes(ds, {2, 1.0}, 0);
    CHECK(id_set(m) == std::set<std::string>{"im002", "im005"});
  }
  SUBCASE("more classes than images") {
    const auto ds = images_at({{0.f}, {1.f}}, 3);
    CHECK_THROWS_AS(select_prototypes(ds, {2, 1.0}, 0), DataError);
  }
}

TEST_CASE("retrieval") {
  SUBCASE("one class is plain top-k") {
    const auto ds = images_at({{0.f}, {0.f}, {0.f}, {0.f}});
    const auto m = select_retrieval(ds, table({{0.1, 0.9, 0.5, 0.7}}, ds), {2, 1.0});
    CHECK(order(m) == std::vector<std::string>{"im001", "im003"});
    CHECK(m.selected[0].score == 0.9);
  }
  SUBCASE("two classes, distinct scores, alphabetical") {
    const auto ds = images_at({{0.f}, {0.f}, {0.f}, {0.f}, {0.f}, {0.f}, {0.f}, {0.f}}, 2);
    auto named = ds;
    named.classes = ClassTable({"zebra", "ant"});
    // ant (class 1) goes first.
    const auto t = table({{0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1},
                          {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}},
                         named);
    const auto m = select_retrieval(named, t, {4, 1.0});
    CHECK(order(m) == std::vector<std::string>{"im007", "im006", "im000", "im001"});
    CHECK(m.selected[0].class_id == 1);
    CHECK(m.selected[2].class_id == 0);
  }
  SUBCASE("a shared top image is selected once") {
    const auto ds = images_at({{0.f}, {0.f}, {0.f}}, 2);
    const auto t = table({{0.9, 0.5, 0.1}, {0.9, 0.1, 0.5}}, ds);
    const auto m = select_retrieval(ds, t, {2, 1.0});
    CHECK(order(m) == std::vector<std::string>{"im000", "im002"});
  }
  SUBCASE("missing class") {
    const auto ds = images_at({{0.f}, {0.f}}, 2);
    SimilarityTable t;
    t.per_class.resize(2);
    t.per_class[0].push_back({"im000", 1.0});
    CHECK_THROWS_AS(select_retrieval(ds, t, {2, 1.0}), DataError);
  }
}

TEST_CASE("similarity table file") {
  const auto ds = synth_small(1);
  const auto t = synth::similarity_table(ds, 0.05, 3);
  test::TempDir dir;
  write_similarity(t, dir / "s.jsonl");
  CHECK(load_similarity(dir / "s.jsonl", ds) == t);

  test::write_text(dir / "bad.jsonl", "{\"class_id\":0,\"image_id\":\"nope\",\"score\":1}\n");
  CHECK_THROWS_AS(load_similarity(dir / "bad.jsonl", ds), DataError);
  const std::string line = "{\"class_id\":0,\"image_id\":\"" + ds.images[0].id + "\",\"score\":1}\n";
  test::write_text(dir / "dup.jsonl", line + line);
  CHECK_THROWS_AS(load_similarity(dir / "dup.jsonl", ds), DataError);
  test::write_text(dir / "cls.jsonl", "{\"class_id\":99,\"image_id\":\"" + ds.images[0].id +
                                          "\",\"score\":1}\n");
  CHECK_THROWS_AS(load_similarity(dir / "cls.jsonl", ds), DataError);
}

TEST_CASE("baselines: budget safety, uniqueness, determinism") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto ds = synth_small(seed);
    const auto t = synth::similarity_table(ds, 0.05, seed);
    SelectionState probe(ds, UnitMode::kProposals);
    for (std::int64_t b : {1, 7, 40, 150}) {
      const BudgetSpec budget{b, 1.0};
      KCentersOptions kc;
      kc.seed = seed;
      for (const auto& m :
           {select_random(ds, budget, seed), select_kcenters(ds, budget, kc),
            select_prototypes(ds, budget, seed), select_retrieval(ds, t, budget)}) {
        CAPTURE(m.method);
        CHECK(m.realized_units <= b + probe.max_cost());
        CHECK(m.realized_units > b - probe.max_cost());
        CHECK(id_set(m).size() == m.selected.size());
      }
      CHECK(select_prototypes(ds, budget, seed) == select_prototypes(ds, budget, seed));
      CHECK(select_retrieval(ds, t, budget) == select_retrieval(ds, t, budget));
      CHECK(select_kcenters(ds, budget, kc) == select_kcenters(ds, budget, kc));
    }
  }
}
