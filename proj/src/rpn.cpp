#include "percept/rpn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace percept {

std::vector<Anchor> generate_anchors(int map_h, int map_w, int stride,
                                     const std::vector<double>& scales,
                                     const std::vector<double>& ratios) {
    if (stride < 1) throw std::invalid_argument("generate_anchors: stride must be >= 1");
    if (scales.empty() || ratios.empty()) {
        throw std::invalid_argument("generate_anchors: scales and ratios must be non-empty");
    }
    const double img_w = static_cast<double>(map_w) * stride;
    const double img_h = static_cast<double>(map_h) * stride;
    std::vector<Anchor> anchors;
    anchors.reserve(static_cast<size_t>(map_h) * map_w * scales.size() * ratios.size());
    for (int cy = 0; cy < map_h; ++cy) {
        for (int cx = 0; cx < map_w; ++cx) {
            const double center_x = (cx + 0.5) * stride;
            const double center_y = (cy + 0.5) * stride;
            for (size_t si = 0; si < scales.size(); ++si) {
                for (size_t ri = 0; ri < ratios.size(); ++ri) {
                    const double w = scales[si] * std::sqrt(ratios[ri]);
                    const double h = scales[si] / std::sqrt(ratios[ri]);
                    Anchor a;
                    a.box = {center_x - w / 2, center_y - h / 2, center_x + w / 2,
                             center_y + h / 2};
                    a.cell_y = cy;
                    a.cell_x = cx;
                    a.scale_idx = static_cast<int>(si);
                    a.ratio_idx = static_cast<int>(ri);
                    a.inside_image = a.box.x1 >= 0 && a.box.y1 >= 0 && a.box.x2 <= img_w &&
                                     a.box.y2 <= img_h;
                    anchors.push_back(a);
                }
            }
        }
    }
    return anchors;
}

double iou(const BBox& a, const BBox& b) {
    const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return inter / uni;
}

AnchorLabel label_anchor(const Anchor& anchor, const std::vector<BBox>& gt_boxes) {
    double m = 0.0;
    for (const auto& gt : gt_boxes) m = std::max(m, iou(anchor.box, gt));
    if (m > 0.7) return AnchorLabel::Positive;
    if (m < 0.3) return AnchorLabel::Negative;
    return AnchorLabel::Ignore;
}

std::vector<int> assign_rpn_labels(const std::vector<Anchor>& anchors,
                                   const std::vector<BBox>& gt_boxes, bool gt_fallback) {
    std::vector<int> labels(anchors.size());
    for (size_t i = 0; i < anchors.size(); ++i) {
        labels[i] = static_cast<int>(label_anchor(anchors[i], gt_boxes));
    }
    if (gt_fallback) {
        for (const auto& gt : gt_boxes) {
            double best = 0.0;
            size_t best_idx = anchors.size();
            for (size_t i = 0; i < anchors.size(); ++i) {
                double v = iou(anchors[i].box, gt);
                if (v > best) {
                    best = v;
                    best_idx = i;
                }
            }
            if (best_idx < anchors.size()) labels[best_idx] = 1;
        }
    }
    return labels;
}

std::vector<double> objectness_scores(const FeatureMap& logits, int anchors_per_cell) {
    if (logits.channels != 2 * anchors_per_cell) {
        throw std::invalid_argument("objectness_scores: expected 2 channels per anchor");
    }
    const int h = logits.height, w = logits.width;
    std::vector<double> scores(static_cast<size_t>(h) * w * anchors_per_cell);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int k = 0; k < anchors_per_cell; ++k) {
                const double l0 = logits.at(2 * k, y, x);
                const double l1 = logits.at(2 * k + 1, y, x);
                const double m = std::max(l0, l1);
                const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
                scores[(static_cast<size_t>(y) * w + x) * anchors_per_cell + k] = e1 / (e0 + e1);
            }
        }
    }
    return scores;
}

std::vector<ROI> propose_rois(const std::vector<double>& scores,
                              const std::vector<Anchor>& anchors, int top_k, double nms_iou,
                              int img_w, int img_h) {
    if (top_k < 1) throw std::invalid_argument("propose_rois: top_k must be >= 1");
    if (scores.size() != anchors.size()) {
        throw std::invalid_argument("propose_rois: score/anchor count mismatch");
    }
    std::vector<size_t> order(anchors.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    std::vector<ROI> kept;
    for (size_t idx : order) {
        if (static_cast<int>(kept.size()) >= top_k) break;
        BBox box = anchors[idx].box;
        box.x1 = std::clamp(box.x1, 0.0, static_cast<double>(img_w));
        box.y1 = std::clamp(box.y1, 0.0, static_cast<double>(img_h));
        box.x2 = std::clamp(box.x2, 0.0, static_cast<double>(img_w));
        box.y2 = std::clamp(box.y2, 0.0, static_cast<double>(img_h));
        if (box.width() <= 0.0 || box.height() <= 0.0) continue;
        bool keep = true;
        for (const auto& r : kept) {
            if (iou(box, r.box) > nms_iou) {
                keep = false;
                break;
            }
        }
        if (keep) kept.push_back({box, scores[idx]});
    }
    return kept;
}

FeatureMap roi_pool(const FeatureMap& fmap, const ROI& roi, int out_h, int out_w, int stride,
                    RoiPoolCache* cache) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("roi_pool: bad output size");
    // box -> feature cells: floor for start, ceil for end
    int fx1 = static_cast<int>(std::floor(roi.box.x1 / stride));
    int fy1 = static_cast<int>(std::floor(roi.box.y1 / stride));
    int fx2 = static_cast<int>(std::ceil(roi.box.x2 / stride));
    int fy2 = static_cast<int>(std::ceil(roi.box.y2 / stride));
    fx1 = std::clamp(fx1, 0, fmap.width);
    fy1 = std::clamp(fy1, 0, fmap.height);
    fx2 = std::clamp(fx2, 0, fmap.width);
    fy2 = std::clamp(fy2, 0, fmap.height);
    const int fw = fx2 - fx1, fh = fy2 - fy1;
    if (fw <= 0 || fh <= 0) {
        throw std::invalid_argument("roi_pool: roi lies outside the feature map");
    }

    FeatureMap out = FeatureMap::zeros(fmap.channels, out_h, out_w);
    if (cache) {
        cache->channels = fmap.channels;
        cache->out_h = out_h;
        cache->out_w = out_w;
        cache->fmap_h = fmap.height;
        cache->fmap_w = fmap.width;
        cache->argmax.assign(out.size(), -1);
    }
    auto edge = [](int lo, int extent, int bins, int i) {
        return lo + static_cast<int>(std::llround(static_cast<double>(i) * extent / bins));
    };
    for (int by = 0; by < out_h; ++by) {
        const int y0 = edge(fy1, fh, out_h, by), y1 = edge(fy1, fh, out_h, by + 1);
        for (int bx = 0; bx < out_w; ++bx) {
            const int x0 = edge(fx1, fw, out_w, bx), x1 = edge(fx1, fw, out_w, bx + 1);
            if (y1 <= y0 || x1 <= x0) continue;  // empty bin stays 0
            for (int c = 0; c < fmap.channels; ++c) {
                double best = -1e300;
                int best_idx = -1;
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) {
                        int idx = (c * fmap.height + y) * fmap.width + x;
                        if (fmap.data[idx] > best) {
                            best = fmap.data[idx];
                            best_idx = idx;
                        }
                    }
                }
                size_t oi = (static_cast<size_t>(c) * out_h + by) * out_w + bx;
                out.data[oi] = best;
                if (cache) cache->argmax[oi] = best_idx;
            }
        }
    }
    return out;
}

void roi_pool_backward(const RoiPoolCache& cache, const FeatureMap& upstream, FeatureMap& dfmap) {
    if (dfmap.channels != cache.channels || dfmap.height != cache.fmap_h ||
        dfmap.width != cache.fmap_w) {
        throw std::invalid_argument("roi_pool_backward: gradient map shape mismatch");
    }
    for (size_t i = 0; i < cache.argmax.size(); ++i) {
        if (cache.argmax[i] >= 0) dfmap.data[cache.argmax[i]] += upstream.data[i];
    }
}

}  // namespace percept
