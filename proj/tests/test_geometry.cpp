#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <doctest.h>

#include "handoff/geometry.hpp"
#include "oracles.hpp"

using namespace handoff;

TEST_CASE("iou examples") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == doctest::Approx(1.0));
  CHECK(iou({0, 0, 10, 10}, {20, 20, 5, 5}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0).epsilon(1e-12));
  CHECK(iou({0, 0, 0, 0}, {0, 0, 0, 0}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {10, 0, 10, 10}) == 0.0);  // touching edges
}

TEST_CASE("iou agrees with pixel counting on random integer boxes") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pos(0, 40), size(0, 25);
  for (int i = 0; i < 1000; ++i) {
    const oracle::IntBox a{pos(rng), pos(rng), size(rng), size(rng)};
    const oracle::IntBox b{pos(rng), pos(rng), size(rng), size(rng)};
    const double got = iou({double(a.x), double(a.y), double(a.w), double(a.h)},
                           {double(b.x), double(b.y), double(b.w), double(b.h)});
    REQUIRE(std::abs(got - oracle::pixel_iou(a, b)) <= 1e-9);
  }
}

TEST_CASE("iou properties") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-50, 50), size(0.1, 30);
  for (int i = 0; i < 500; ++i) {
    const BBox a{pos(rng), pos(rng), size(rng), size(rng)};
    const BBox b{pos(rng), pos(rng), size(rng), size(rng)};
    const double v = iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == doctest::Approx(iou(b, a)));
    CHECK(iou(a, a) == doctest::Approx(1.0));
    // translation invariance
    CHECK(iou(a.translated(3.5, -2.25), b.translated(3.5, -2.25)) == doctest::Approx(v).epsilon(1e-9));
  }
}

TEST_CASE("bbox validity") {
  CHECK(BBox{0, 0, 1, 1}.valid());
  CHECK_FALSE(BBox{0, 0, -1, 1}.valid());
  CHECK_FALSE(BBox{std::numeric_limits<double>::quiet_NaN(), 0, 1, 1}.valid());
  CHECK(BBox{0, 0, 0, 5}.empty());
  CHECK(intersection_area({0, 0, 4, 4}, {2, 2, 4, 4}) == doctest::Approx(4.0));
  const auto c = clip_to({-5, -5, 20, 20}, 10, 8);
  CHECK(c == BBox{0, 0, 10, 8});
}

TEST_CASE("center distance") {
  const BBox a{0, 0, 2, 2};
  CHECK(center_distance(a, a) == 0.0);
  CHECK(center_distance(BBox::from_center(0, 0, 2, 2), BBox::from_center(3, 4, 2, 2)) == doctest::Approx(5.0));
  CHECK(center_distance({0, 0, 2, 2}, {10, 0, 2, 2}) == doctest::Approx(10.0));
}

TEST_CASE("classify_frame") {
  const BBox gt{0, 0, 10, 10};
  CHECK(classify_frame(std::nullopt, std::nullopt).kind == MatchKind::Skip);
  CHECK(classify_frame(std::nullopt, gt).kind == MatchKind::FN);
  CHECK(classify_frame(gt, std::nullopt).kind == MatchKind::FP);
  const auto tp = classify_frame(gt, gt, 0.5);
  CHECK(tp.kind == MatchKind::TP);
  CHECK(*tp.iou == doctest::Approx(1.0));
  const auto fp = classify_frame(BBox{0, 0, 10, 10}, BBox{8, 0, 10, 10}, 0.5);
  CHECK(fp.kind == MatchKind::FP);
  CHECK(*fp.iou == doctest::Approx(2.0 / 18.0));
  // exactly at tau counts as a match
  CHECK(classify_frame(BBox{0, 0, 10, 10}, BBox{0, 0, 10, 20}, 0.5).kind == MatchKind::TP);
}

TEST_CASE("aggregate examples") {
  std::vector<FrameMatch> m;
  const BBox b{0, 0, 10, 10};
  for (int i = 0; i < 81; ++i) m.push_back(classify_frame(b, b));
  for (int i = 0; i < 19; ++i) m.push_back(classify_frame(std::nullopt, b));
  const auto r = aggregate(m);
  CHECK(r.tp == 81);
  CHECK(r.fp == 0);
  CHECK(r.fn == 19);
  CHECK(r.precision == doctest::Approx(1.0));
  CHECK(r.recall == doctest::Approx(0.81));
  CHECK(r.f1 == doctest::Approx(2 * 0.81 / 1.81));
  CHECK(r.frames_evaluated == 100);

  std::vector<FrameMatch> five;
  for (int i = 0; i < 3; ++i) five.push_back(classify_frame(BBox::from_center(5, 0, 2, 2), BBox::from_center(0, 0, 2, 2)));
  CHECK(aggregate(five).ope == doctest::Approx(5.0));

  const auto empty = aggregate({});
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);
  CHECK(empty.ope == 0.0);
  CHECK(empty.frames_evaluated == 0);
}

TEST_CASE("aggregate against a counting oracle") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coin(0, 3);
  std::uniform_real_distribution<double> shift(0, 12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FrameMatch> m;
    long tp = 0, fp = 0, fn = 0, skip = 0;
    double iou_sum = 0, dist_sum = 0;
    long paired = 0;
    for (int i = 0; i < 60; ++i) {
      const BBox gt{0, 0, 10, 10};
      const BBox pred = gt.translated(shift(rng), 0);
      switch (coin(rng)) {
        case 0: m.push_back(classify_frame(std::nullopt, std::nullopt)); ++skip; break;
        case 1: m.push_back(classify_frame(std::nullopt, gt)); ++fn; break;
        case 2: m.push_back(classify_frame(pred, std::nullopt)); ++fp; break;
        default: {
          const double v = iou(pred, gt);
          m.push_back(classify_frame(pred, gt));
          (v >= 0.5 ? tp : fp)++;
          iou_sum += v;
          dist_sum += center_distance(pred, gt);
          ++paired;
        }
      }
    }
    const auto r = aggregate(m);
    CHECK(r.tp == tp);
    CHECK(r.fp == fp);
    CHECK(r.fn == fn);
    CHECK(r.frames_evaluated == 60 - skip);
    const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double rc = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    CHECK(r.precision == doctest::Approx(p));
    CHECK(r.recall == doctest::Approx(rc));
    CHECK(r.f1 == doctest::Approx(p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0));
    if (paired) {
      CHECK(r.mean_iou == doctest::Approx(iou_sum / double(paired)));
      CHECK(r.ope == doctest::Approx(dist_sum / double(paired)));
    }
  }
}

TEST_CASE("f1 score") {
  CHECK(f1_score(0, 0) == 0.0);
  CHECK(f1_score(1, 1) == doctest::Approx(1.0));
  CHECK(f1_score(1.0, 0.81) == doctest::Approx(0.895027).epsilon(1e-5));
}
