// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <set>
#include <string>

#include <doctest.h>

#include "nuigo/common.hpp"
#include "nuigo/dataset.hpp"
#include "nuigo/image_io.hpp"
#include "nuigo/manifest.hpp"
#include "nuigo/synthesis.hpp"
#include "support/helpers.hpp"

using nuigo::Dataset;
using testsupport::TempDir;

namespace {

// Builds a small synthesized dataset on disk and returns its manifest path.
std::filesystem::path build_dataset(const TempDir& in, const TempDir& out,
                                    int n_clean, int size = 32) {
  for (int i = 0; i < n_clean; ++i)
    nuigo::save_image_png(in.path() / ("img_" + std::to_string(i) + ".png"),
                          testsupport::make_fundus_image(size, 300 + i));
  nuigo::SynthesisConfig cfg;
  cfg.image_size = size;
  cfg.rng_seed = 4;
  nuigo::synthesize_dataset(in.path(), out.path(), cfg);
  return out.path() / "manifest.csv";
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("load_dataset resolves every pair next to the manifest") {
  TempDir in, out;
  const auto manifest = build_dataset(in, out, 3);
  const Dataset ds = nuigo::load_dataset(manifest);
  CHECK(ds.root == out.path());
  REQUIRE(ds.entries.size() == 15);
  for (const auto& e : ds.entries) {
    CHECK(std::filesystem::exists(e.clean_path));
    CHECK(std::filesystem::exists(e.degraded_path));
    CHECK(e.clean_path.parent_path().filename() == "clean");
    CHECK(e.degraded_path.parent_path().filename() == "degraded");
  }
}

TEST_CASE("a manifest entry without its image file fails") {
  TempDir in, out;
  const auto manifest = build_dataset(in, out, 2);
  std::filesystem::remove(out.path() / "degraded" / "img_1_th2.png");
  CHECK_THROWS_AS(nuigo::load_dataset(manifest), nuigo::ValidationError);
}

TEST_CASE("split keeps all variants of a clean image on one side") {
  TempDir in, out;
  const auto manifest = build_dataset(in, out, 10);
  const Dataset ds = nuigo::load_dataset(manifest);
  const auto split = nuigo::split_dataset(ds, 0.8, 7);
  CHECK(split.train.size() + split.val.size() == ds.entries.size());
  CHECK(split.train.size() == 40);  // 8 of 10 clean ids, 5 variants each
  CHECK(split.val.size() == 10);

  std::set<std::string> train_ids, val_ids;
  for (int i : split.train) train_ids.insert(ds.entries[i].meta.clean_id);
  for (int i : split.val) val_ids.insert(ds.entries[i].meta.clean_id);
  CHECK(train_ids.size() == 8);
  CHECK(val_ids.size() == 2);
  for (const auto& id : val_ids) CHECK(train_ids.count(id) == 0);
}

TEST_CASE("split is deterministic in the seed and varies across seeds") {
  TempDir in, out;
  const auto manifest = build_dataset(in, out, 8);
  const Dataset ds = nuigo::load_dataset(manifest);
  const auto a = nuigo::split_dataset(ds, 0.75, 11);
  const auto b = nuigo::split_dataset(ds, 0.75, 11);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);

  bool differs = false;
  for (std::uint64_t seed = 12; seed < 20 && !differs; ++seed) {
    const auto c = nuigo::split_dataset(ds, 0.75, seed);
    if (c.train != a.train) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("extreme fractions still leave both sides nonempty") {
  TempDir in, out;
  const auto manifest = build_dataset(in, out, 4);
  const Dataset ds = nuigo::load_dataset(manifest);
  const auto lo = nuigo::split_dataset(ds, 0.01, 3);
  CHECK(lo.train.size() == 5);  // one clean id
  CHECK(lo.val.size() == 15);
  const auto hi = nuigo::split_dataset(ds, 0.99, 3);
  CHECK(hi.train.size() == 15);
  CHECK(hi.val.size() == 5);
}

TEST_CASE("fewer than two clean ids cannot be split") {
  TempDir in, out;
  const auto manifest = build_dataset(in, out, 1);
  const Dataset ds = nuigo::load_dataset(manifest);
  CHECK_THROWS_AS(nuigo::split_dataset(ds, 0.8, 1), nuigo::ValidationError);
}

TEST_CASE("out-of-range fractions are rejected") {
  TempDir in, out;
  const auto manifest = build_dataset(in, out, 3);
  const Dataset ds = nuigo::load_dataset(manifest);
  CHECK_THROWS_AS(nuigo::split_dataset(ds, 0.0, 1), nuigo::ValidationError);
  CHECK_THROWS_AS(nuigo::split_dataset(ds, 1.0, 1), nuigo::ValidationError);
}

TEST_CASE("missing manifest fails") {
  CHECK_THROWS_AS(nuigo::load_dataset("/nonexistent/manifest.csv"),
                  nuigo::ValidationError);
}

}  // TEST_SUITE
