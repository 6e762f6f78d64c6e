#include <doctest.h>

#include <set>

#include "slomo/dataset.hpp"
#include "slomo/error.hpp"
#include "test_support.hpp"

using namespace slomo;
using namespace slomo::dataset;

namespace {

std::vector<ClipManifest> corpus_of(std::size_t n, std::uint32_t frames = 10) {
  std::vector<ClipManifest> clips;
  for (std::size_t i = 0; i < n; ++i) clips.push_back({"c" + std::to_string(i), frames, {30, 1}, "c" + std::to_string(i)});
  return clips;
}

AugmentedTriplet sample_triplet(int w, int h) {
  return make_augmented({"c", 0}, {test::random_frame(w, h, 1), test::random_frame(w, h, 2), test::random_frame(w, h, 3)});
}

std::size_t count(const SplitAssignment& s, Split which) { return s.clips_in(which).size(); }

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("triplet examples") {
    CHECK(extract_triplets("a", 3).triplets.size() == 1);
    CHECK(extract_triplets("a", 10).triplets.size() == 8);
    const auto s3 = extract_triplets("a", 10, 3).triplets;
    REQUIRE(s3.size() == 3);
    CHECK(s3[0].t == 0);
    CHECK(s3[1].t == 3);
    CHECK(s3[2].t == 6);
  }

  TEST_CASE("triplet count law") {
    for (std::uint32_t n = 1; n <= 100; ++n) {
      const auto ex = extract_triplets("a", n);
      CHECK(ex.triplets.size() == (n >= 2 ? n - 2 : 0));
      CHECK(ex.warnings.size() == (n < 3 ? 1u : 0u));
    }
  }

  TEST_CASE("zero stride is rejected") { CHECK_THROWS_AS(extract_triplets("a", 5, 0), Error); }

  TEST_CASE("split sizes") {
    const auto s10 = split_clips(corpus_of(10));
    CHECK(count(s10, Split::kTrain) == 8);
    CHECK(count(s10, Split::kVal) == 1);
    CHECK(count(s10, Split::kTest) == 1);
    const auto s1700 = split_clips(corpus_of(1700));
    CHECK(count(s1700, Split::kTrain) == 1360);
    CHECK(count(s1700, Split::kVal) == 170);
    CHECK(count(s1700, Split::kTest) == 170);
  }

  TEST_CASE("splits are total and disjoint") {
    Rng rng(3);
    for (int trial = 0; trial < 60; ++trial) {
      const std::size_t n = 1 + rng.uniform(499);
      const auto s = split_clips(corpus_of(n), kDefaultRatios, rng.next());
      CHECK(s.assignments.size() == n);
      std::set<std::string> seen;
      for (auto sp : {Split::kTrain, Split::kVal, Split::kTest}) {
        for (const auto& id : s.clips_in(sp)) CHECK(seen.insert(id).second);
      }
      CHECK(seen.size() == n);
      CHECK(count(s, Split::kVal) == n / 10);
    }
  }

  TEST_CASE("split determinism and seed sensitivity") {
    const auto clips = corpus_of(200);
    CHECK(format_split_file(split_clips(clips, kDefaultRatios, 11)) ==
          format_split_file(split_clips(clips, kDefaultRatios, 11)));
    bool differs = false;
    for (std::uint64_t seed = 0; seed < 10 && !differs; ++seed) {
      differs = split_clips(clips, kDefaultRatios, seed) != split_clips(clips, kDefaultRatios, seed + 100);
    }
    CHECK(differs);
  }

  TEST_CASE("ratio validation") {
    CHECK_THROWS_AS(split_clips(corpus_of(5), {Ratio{1, 2}, Ratio{1, 2}, Ratio{1, 10}}), Error);
    CHECK_THROWS_AS(split_clips({}), Error);
    CHECK(parse_ratios("0.8,0.1,0.1") == kDefaultRatios);
    CHECK(parse_ratio("4/5") == Ratio{4, 5});
    CHECK(format_ratio(Ratio{4, 5}) == "0.8");
  }

  TEST_CASE("split file round trip") {
    const auto s = split_clips(corpus_of(30), kDefaultRatios, 42);
    CHECK(parse_split_file(format_split_file(s)) == s);
  }

  TEST_CASE("corpus json round trip and validation") {
    const auto clips = corpus_of(3);
    CHECK(parse_corpus(format_corpus(clips)) == clips);
    auto dup = clips;
    dup[1].id = dup[0].id;
    CHECK_THROWS_AS(validate_corpus(dup), Error);
  }

  TEST_CASE("triplet index follows the split") {
    auto clips = corpus_of(10, 5);
    clips[3].frame_count = 2;
    const auto split = split_clips(clips);
    const auto index = build_triplet_index(clips, split);
    CHECK(index.entries.size() == 9 * 3);
    CHECK(index.warnings.size() == 1);
    for (const auto& e : index.entries) CHECK(split.assignments.at(e.triplet.clip_id) == e.split);
    CHECK(parse_triplet_index(format_triplet_index(index)) == index);
  }

  TEST_CASE("crop bounds") {
    const auto full = sample_triplet(448, 256);
    CHECK(crop(full, 0, 0).frames.first == full.frames.first);
    const auto big = sample_triplet(1280, 720);
    const auto corner = crop(big, 832, 464);
    CHECK(corner.frames.middle.width() == 448);
    CHECK(corner.frames.middle.at(0, 0, 0) == big.frames.middle.at(832, 464, 0));
    CHECK_THROWS_AS(crop(big, 833, 0), Error);
    try {
      (void)crop(sample_triplet(320, 240), 0, 0);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kBounds);
    }
  }

  TEST_CASE("flip and reversal are involutions") {
    const auto t = sample_triplet(13, 6);
    const auto f = hflip(t);
    CHECK(hflip(f).frames.first == t.frames.first);
    for (int y = 0; y < 6; ++y) {
      for (int c = 0; c < 3; ++c) CHECK(f.frames.last.at(0, y, c) == t.frames.last.at(12, y, c));
    }
    const auto one_col = sample_triplet(1, 4);
    CHECK(hflip(one_col).frames.middle == one_col.frames.middle);

    const auto r = time_reverse(t);
    CHECK(r.frames.first == t.frames.last);
    CHECK(r.frames.last == t.frames.first);
    CHECK(r.frames.middle == t.frames.middle);
    CHECK(time_reverse(r).frames.first == t.frames.first);
  }

  TEST_CASE("crop commutes with flip at the mirrored origin") {
    const auto t = sample_triplet(40, 20);
    const int x = 5, y = 3, w = 16, h = 8;
    const auto a = hflip(crop(t, x, y, w, h));
    const auto b = crop(hflip(t), 40 - x - w, y, w, h);
    CHECK(a.frames.first == b.frames.first);
    CHECK(a.frames.middle == b.frames.middle);
    CHECK(a.frames.last == b.frames.last);
  }

  TEST_CASE("random augmentation") {
    const auto p1 = plan_augmentation(1280, 720, 77);
    CHECK(p1 == plan_augmentation(1280, 720, 77));
    int flips = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
      const auto p = plan_augmentation(1280, 720, seed);
      CHECK(p.crop.x >= 0);
      CHECK(p.crop.x <= 832);
      CHECK(p.crop.y >= 0);
      CHECK(p.crop.y <= 464);
      flips += p.hflip;
    }
    CHECK(std::abs(flips / 10000.0 - 0.5) <= 0.02);
    CHECK_THROWS_AS(plan_augmentation(320, 240, 1), Error);

    const auto t = sample_triplet(460, 260);
    const auto a = random_augment(t, 5);
    const auto b = random_augment(t, 5);
    CHECK(a.crop == b.crop);
    CHECK(a.frames.first == b.frames.first);
    CHECK(format_augmentation_line(a) == format_augmentation_line(b));
  }

  TEST_CASE("bounded draws are in range") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) CHECK(rng.uniform(6) <= 6);
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a", 2) == derive_seed(1, "a", 2));
  }
}
