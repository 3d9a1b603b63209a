#include <stdexcept>
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "percept/rng.hpp"
#include "percept/rpn.hpp"

using namespace percept;

namespace {

// Pixel-membership IoU for integer boxes: a pixel (i,j) belongs to a box
// when x1 <= i < x2 and y1 <= j < y2.
double iou_pixel_count(const BBox& a, const BBox& b, int grid) {
    long inter = 0, uni = 0;
    for (int j = 0; j < grid; ++j) {
        for (int i = 0; i < grid; ++i) {
            const bool in_a = i >= a.x1 && i < a.x2 && j >= a.y1 && j < a.y2;
            const bool in_b = i >= b.x1 && i < b.x2 && j >= b.y1 && j < b.y2;
            inter += in_a && in_b;
            uni += in_a || in_b;
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BBox random_box(Rng& rng, double span) {
    const double x1 = rng.uniform(0, span - 1);
    const double y1 = rng.uniform(0, span - 1);
    return {x1, y1, x1 + rng.uniform(0.5, span - x1), y1 + rng.uniform(0.5, span - y1)};
}

FeatureMap map_1ch(std::vector<double> vals, int h, int w) {
    FeatureMap m = FeatureMap::zeros(1, h, w);
    m.data = std::move(vals);
    return m;
}

}  // namespace

TEST_SUITE("rpn") {

TEST_CASE("generate_anchors counting and geometry") {
    CHECK(generate_anchors(1, 1, 16, {32}, {1.0}).size() == 1);

    const auto square = generate_anchors(1, 1, 16, {24}, {1.0});
    CHECK(square[0].box.width() == doctest::Approx(24));
    CHECK(square[0].box.height() == doctest::Approx(24));

    const auto grid = generate_anchors(2, 2, 16, {16, 32, 64}, {0.5, 1, 2});
    CHECK(grid.size() == 36);
    CHECK(grid[0].cell_y == 0);
    CHECK(grid[0].cell_x == 0);
    CHECK(grid[0].box.cx() == doctest::Approx(8.0));
    CHECK(grid[0].box.cy() == doctest::Approx(8.0));

    // width = s*sqrt(r), height = s/sqrt(r); area stays s^2
    for (const auto& a : grid) {
        const double s = std::vector<double>{16, 32, 64}[a.scale_idx];
        CHECK(a.box.area() == doctest::Approx(s * s));
    }
    CHECK_THROWS_AS(generate_anchors(1, 1, 16, {}, {1.0}), std::invalid_argument);
}

TEST_CASE("anchors beyond image bounds are kept and flagged") {
    const auto anchors = generate_anchors(2, 2, 8, {64}, {1.0});
    CHECK(anchors.size() == 4);
    for (const auto& a : anchors) CHECK(!a.inside_image);
    const auto small = generate_anchors(2, 2, 8, {4}, {1.0});
    for (const auto& a : small) CHECK(a.inside_image);
}

TEST_CASE("iou basics") {
    const BBox a{0, 0, 10, 10};
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, {20, 20, 30, 30}) == 0.0);
    CHECK(iou(a, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0));
    CHECK(iou(a, {5, 0, 15, 10}) == doctest::Approx(iou_pixel_count(a, {5, 0, 15, 10}, 20)));
}

TEST_CASE("iou symmetry and range on random boxes") {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const BBox a = random_box(rng, 40);
        const BBox b = random_box(rng, 40);
        const double ab = iou(a, b);
        CHECK(ab == iou(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("iou equals pixel counting on a small exhaustive grid") {
    const int grid = 6;
    std::vector<BBox> boxes;
    for (int x1 = 0; x1 <= grid; ++x1) {
        for (int x2 = x1 + 1; x2 <= grid; ++x2) {
            for (int y1 = 0; y1 <= grid; ++y1) {
                for (int y2 = y1 + 1; y2 <= grid; ++y2) {
                    boxes.push_back({static_cast<double>(x1), static_cast<double>(y1),
                                     static_cast<double>(x2), static_cast<double>(y2)});
                }
            }
        }
    }
    for (const auto& a : boxes) {
        for (const auto& b : boxes) {
            CHECK(iou(a, b) == doctest::Approx(iou_pixel_count(a, b, grid)).epsilon(1e-12));
        }
    }
}

TEST_CASE("label_anchor follows the three-way rule") {
    Anchor anchor;
    anchor.box = {0, 0, 10, 10};
    // constructed overlaps: 0.8, 0.2 and 0.5
    CHECK(iou(anchor.box, {0, 2, 10, 10}) == doctest::Approx(0.8));
    CHECK(label_anchor(anchor, {{0, 2, 10, 10}}) == AnchorLabel::Positive);
    CHECK(iou(anchor.box, {0, 0, 10, 2}) == doctest::Approx(0.2));
    CHECK(label_anchor(anchor, {{0, 0, 10, 2}}) == AnchorLabel::Negative);
    CHECK(iou(anchor.box, {0, 0, 10, 5}) == doctest::Approx(0.5));
    CHECK(label_anchor(anchor, {{0, 0, 10, 5}}) == AnchorLabel::Ignore);
    // no ground truth at all: max IoU 0 < 0.3
    CHECK(label_anchor(anchor, {}) == AnchorLabel::Negative);
}

TEST_CASE("label_anchor agrees with a brute-force reimplementation") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        Anchor anchor;
        anchor.box = random_box(rng, 64);
        std::vector<BBox> gts;
        const int n = rng.uniform_int(0, 4);
        for (int g = 0; g < n; ++g) gts.push_back(random_box(rng, 64));

        double best = 0.0;
        for (const auto& gt : gts) best = std::max(best, iou(anchor.box, gt));
        const AnchorLabel expected = best > 0.7    ? AnchorLabel::Positive
                                     : best < 0.3 ? AnchorLabel::Negative
                                                  : AnchorLabel::Ignore;
        CHECK(label_anchor(anchor, gts) == expected);
    }
}

TEST_CASE("gt fallback promotes the best anchor per ground truth") {
    const auto anchors = generate_anchors(4, 4, 8, {16}, {1.0});
    const std::vector<BBox> gt = {{2, 2, 12, 12}};
    const auto plain = assign_rpn_labels(anchors, gt, false);
    CHECK(std::count(plain.begin(), plain.end(), 1) == 0);  // nothing above 0.7 here
    const auto with_fallback = assign_rpn_labels(anchors, gt, true);
    CHECK(std::count(with_fallback.begin(), with_fallback.end(), 1) == 1);
}

TEST_CASE("propose_rois keeps a lone anchor") {
    std::vector<Anchor> anchors(1);
    anchors[0].box = {4, 4, 20, 20};
    const auto rois = propose_rois({0.1}, anchors, 5, 0.5, 64, 64);
    REQUIRE(rois.size() == 1);
    CHECK(rois[0].score == doctest::Approx(0.1));
}

TEST_CASE("propose_rois suppresses duplicates and keeps disjoint boxes") {
    std::vector<Anchor> two(2);
    two[0].box = {0, 0, 10, 10};
    two[1].box = {0, 0, 10, 10};
    const auto suppressed = propose_rois({0.9, 0.8}, two, 5, 0.5, 64, 64);
    REQUIRE(suppressed.size() == 1);
    CHECK(suppressed[0].score == doctest::Approx(0.9));

    std::vector<Anchor> three(3);
    three[0].box = {0, 0, 10, 10};
    three[1].box = {20, 20, 30, 30};
    three[2].box = {40, 40, 50, 50};
    const auto kept = propose_rois({0.5, 0.7, 0.6}, three, 5, 0.5, 64, 64);
    CHECK(kept.size() == 3);
    // sorted by descending score, pairwise IoU below the threshold
    CHECK(kept[0].score >= kept[1].score);
    CHECK(kept[1].score >= kept[2].score);
    for (size_t i = 0; i < kept.size(); ++i) {
        for (size_t j = i + 1; j < kept.size(); ++j) {
            CHECK(iou(kept[i].box, kept[j].box) <= 0.5);
        }
    }
    CHECK_THROWS_AS(propose_rois({0.5}, three, 0, 0.5, 64, 64), std::invalid_argument);
}

TEST_CASE("objectness_scores is a per-anchor softmax") {
    FeatureMap logits = FeatureMap::zeros(2, 1, 1);
    logits.data = {0.0, 0.0};
    const auto s = objectness_scores(logits, 1);
    CHECK(s[0] == doctest::Approx(0.5));
    logits.data = {0.0, 100.0};
    CHECK(objectness_scores(logits, 1)[0] == doctest::Approx(1.0));
}

TEST_CASE("roi_pool whole-map single bin is the global max") {
    FeatureMap m = map_1ch({3, 1, 4, 1, 5, 9, 2, 6, 5}, 3, 3);
    const ROI whole{{0, 0, 3, 3}, 1.0};
    const FeatureMap out = roi_pool(m, whole, 1, 1, 1);
    CHECK(out.data[0] == 9.0);

    FeatureMap constant = FeatureMap::zeros(2, 4, 4);
    for (double& v : constant.data) v = 0.7;
    const FeatureMap bins = roi_pool(constant, {{0, 0, 4, 4}, 1.0}, 2, 2, 1);
    for (double v : bins.data) CHECK(v == 0.7);
}

TEST_CASE("roi_pool 4x4 -> 2x2 bins") {
    std::vector<double> vals(16);
    for (int i = 0; i < 16; ++i) vals[i] = i + 1;  // 1..16 row-major
    const FeatureMap m = map_1ch(vals, 4, 4);
    const FeatureMap out = roi_pool(m, {{0, 0, 4, 4}, 1.0}, 2, 2, 1);
    CHECK(out.data == std::vector<double>{6, 8, 14, 16});
}

TEST_CASE("roi_pool rejects fully external rois") {
    const FeatureMap m = FeatureMap::zeros(1, 4, 4);
    CHECK_THROWS_AS(roi_pool(m, {{100, 100, 120, 120}, 1.0}, 2, 2, 1), std::invalid_argument);
}

TEST_CASE("roi_pool stays within the global max and is monotone") {
    Rng rng(23);
    FeatureMap m = FeatureMap::zeros(3, 8, 8);
    for (double& v : m.data) v = rng.uniform(-1, 1);
    double global = -1e300;
    for (double v : m.data) global = std::max(global, v);
    const ROI roi{{4, 2, 30, 28}, 1.0};
    const FeatureMap out = roi_pool(m, roi, 3, 3, 4);
    for (double v : out.data) CHECK(v <= global);

    for (int trial = 0; trial < 30; ++trial) {
        const size_t idx = rng.next_u64() % m.data.size();
        FeatureMap bumped = m;
        bumped.data[idx] += rng.uniform(0.0, 1.0);
        const FeatureMap out2 = roi_pool(bumped, roi, 3, 3, 4);
        for (size_t i = 0; i < out.data.size(); ++i) CHECK(out2.data[i] >= out.data[i]);
    }
}

TEST_CASE("roi_pool backward routes gradients to bin argmaxes") {
    std::vector<double> vals(16);
    for (int i = 0; i < 16; ++i) vals[i] = i + 1;
    const FeatureMap m = map_1ch(vals, 4, 4);
    RoiPoolCache cache;
    roi_pool(m, {{0, 0, 4, 4}, 1.0}, 2, 2, 1, &cache);
    FeatureMap up = FeatureMap::zeros(1, 2, 2);
    up.data = {1, 2, 3, 4};
    FeatureMap dm = FeatureMap::zeros(1, 4, 4);
    roi_pool_backward(cache, up, dm);
    CHECK(dm.at(0, 1, 1) == 1.0);   // value 6
    CHECK(dm.at(0, 1, 3) == 2.0);   // value 8
    CHECK(dm.at(0, 3, 1) == 3.0);   // value 14
    CHECK(dm.at(0, 3, 3) == 4.0);   // value 16
    double total = 0;
    for (double v : dm.data) total += v;
    CHECK(total == 10.0);
}

}  // TEST_SUITE
