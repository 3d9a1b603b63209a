#pragma once

#include <vector>

#include "percept/feature_map.hpp"

namespace percept {

// Axis-aligned box in image pixels, x1 < x2 and y1 < y2.
// A box covers the half-open pixel region [x1, x2) x [y1, y2).
struct BBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }
};

// Candidate box of fixed scale/ratio centered on a feature cell.
struct Anchor {
    BBox box;
    int cell_y = 0, cell_x = 0;
    int scale_idx = 0, ratio_idx = 0;
    bool inside_image = true;  // anchors beyond image bounds are kept, flagged
};

// Three-way anchor label: positive 1, negative -1, ignore 0.
enum class AnchorLabel : int { Negative = -1, Ignore = 0, Positive = 1 };

// One anchor per (scale, ratio) pair per cell, centered at
// ((cx+0.5)*stride, (cy+0.5)*stride); width = s*sqrt(r), height = s/sqrt(r).
// Cell-major order, scales outer, ratios inner.
std::vector<Anchor> generate_anchors(int map_h, int map_w, int stride,
                                     const std::vector<double>& scales,
                                     const std::vector<double>& ratios);

// Intersection over union; 0 for disjoint boxes.
double iou(const BBox& a, const BBox& b);

// Labels against the best-overlapping ground truth: 1 if IoU > 0.7,
// -1 if IoU < 0.3, 0 otherwise. No ground truth means IoU 0.
AnchorLabel label_anchor(const Anchor& anchor, const std::vector<BBox>& gt_boxes);

// Training labels over all anchors; with gt_fallback the highest-IoU anchor
// per ground-truth box is promoted to positive even below the 0.7 threshold.
std::vector<int> assign_rpn_labels(const std::vector<Anchor>& anchors,
                                   const std::vector<BBox>& gt_boxes, bool gt_fallback);

struct ROI {
    BBox box;
    double score = 0.0;
};

// Per-anchor object probability from a 2A x H x W logits map; channel pair
// (2k, 2k+1) is (background, object) for anchor slot k.
std::vector<double> objectness_scores(const FeatureMap& logits, int anchors_per_cell);

// Greedy non-maximum suppression over score-sorted anchors, truncated to
// top_k, boxes clipped to the image. Scores must already be in [0,1].
std::vector<ROI> propose_rois(const std::vector<double>& scores,
                              const std::vector<Anchor>& anchors, int top_k, double nms_iou,
                              int img_w, int img_h);

struct RoiPoolCache {
    int channels = 0, out_h = 0, out_w = 0;
    int fmap_h = 0, fmap_w = 0;
    std::vector<int32_t> argmax;  // flat index into the source map, -1 for empty bins
};

// Max-pools the ROI into a fixed out_h x out_w grid per channel. The box is
// mapped to feature cells (floor start, ceil end) and split into bins by
// proportional rounding; empty bins yield 0.
FeatureMap roi_pool(const FeatureMap& fmap, const ROI& roi, int out_h, int out_w, int stride,
                    RoiPoolCache* cache = nullptr);

// Routes upstream gradients to each bin's argmax cell.
void roi_pool_backward(const RoiPoolCache& cache, const FeatureMap& upstream, FeatureMap& dfmap);

}  // namespace percept
