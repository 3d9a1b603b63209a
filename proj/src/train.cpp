#include "percept/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "percept/error.hpp"
#include "percept/rng.hpp"

namespace percept {

std::vector<ManifestEntry> load_manifest(const std::string& path,
                                         const std::vector<std::string>& classes) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path + ": cannot open manifest");
    const std::string root = std::filesystem::path(path).parent_path().string();

    std::map<std::string, int> class_index;
    for (size_t i = 0; i < classes.size(); ++i) class_index[classes[i]] = static_cast<int>(i);

    std::vector<ManifestEntry> entries;
    std::map<std::string, size_t> by_name;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string name;
        if (!(ls >> name) || name[0] == '#') continue;
        std::string label;
        ManifestEntry* entry;
        if (auto it = by_name.find(name); it != by_name.end()) {
            entry = &entries[it->second];
        } else {
            by_name[name] = entries.size();
            ManifestEntry e;
            const bool absolute = std::filesystem::path(name).is_absolute();
            e.image_path = (root.empty() || absolute) ? name : root + "/" + name;
            entries.push_back(std::move(e));
            entry = &entries.back();
        }
        if (!(ls >> label)) continue;  // image with no objects
        double x1, y1, x2, y2;
        if (!(ls >> x1 >> y1 >> x2 >> y2)) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected 'image label x1 y1 x2 y2'");
        }
        auto ci = class_index.find(label);
        if (ci == class_index.end()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": unknown class '" + label +
                            "'");
        }
        if (!(x1 < x2 && y1 < y2)) {
            throw DataError(path + ":" + std::to_string(lineno) + ": degenerate box");
        }
        entry->gt_boxes.push_back({x1, y1, x2, y2});
        entry->gt_labels.push_back(ci->second);
    }
    if (entries.empty()) throw DataError(path + ": empty manifest");
    return entries;
}

double lr_at_step(const TrainConfig& cfg, long step, long total_steps) {
    if (total_steps <= 1) return cfg.lr_linear ? cfg.lr_end : cfg.lr_start;
    if (cfg.lr_linear) {
        const double tt = static_cast<double>(step) / static_cast<double>(total_steps - 1);
        return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * tt;
    }
    return 2 * step >= total_steps ? cfg.lr_end : cfg.lr_start;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << "part,epoch,lr,loss,roi_accuracy\n";
    out.precision(12);
    for (const auto& r : rows) {
        out << r.part << "," << r.epoch << "," << r.lr << "," << r.loss << "," << r.accuracy
            << "\n";
    }
}

std::vector<PreparedImage> prepare_images(const std::vector<ManifestEntry>& entries,
                                          const PipelineConfig& config) {
    std::vector<PreparedImage> prepared;
    prepared.reserve(entries.size());
    for (const auto& e : entries) {
        PreparedImage p;
        p.name = e.image_path;
        const Image gray = to_grayscale(load_image(e.image_path));
        p.img_w = gray.width;
        p.img_h = gray.height;
        for (const auto& b : e.gt_boxes) {
            if (b.x2 <= 0 || b.y2 <= 0 || b.x1 >= gray.width || b.y1 >= gray.height) {
                throw DataError(e.image_path + ": ground-truth box lies outside the image");
            }
        }
        p.modalities = extract_modalities(gray, config);
        p.gt_boxes = e.gt_boxes;
        p.gt_labels = e.gt_labels;
        prepared.push_back(std::move(p));
    }
    return prepared;
}

namespace {

constexpr double kProbFloor = 1e-12;

struct AnchorContext {
    std::vector<Anchor> anchors;
    std::vector<int> rpn_labels;             // {1,-1,0} per anchor
    std::vector<size_t> positive, negative;  // RPN label index lists
};

AnchorContext build_anchor_context(const PreparedImage& img, const PipelineConfig& cfg,
                                   int map_h, int map_w) {
    AnchorContext ctx;
    ctx.anchors =
        generate_anchors(map_h, map_w, cfg.stride(), cfg.anchor_scales, cfg.anchor_ratios);
    ctx.rpn_labels = assign_rpn_labels(ctx.anchors, img.gt_boxes, cfg.gt_fallback);
    for (size_t i = 0; i < ctx.anchors.size(); ++i) {
        if (ctx.rpn_labels[i] == 1) ctx.positive.push_back(i);
        if (ctx.rpn_labels[i] == -1) ctx.negative.push_back(i);
    }
    return ctx;
}

// IoU-rule label for a proposal: class of the best-overlapping ground truth
// at >= 0.5, background below 0.3, otherwise skip (-1).
int proposal_label(const BBox& box, const PreparedImage& img, int background) {
    double best = 0.0;
    int best_label = -1;
    for (size_t g = 0; g < img.gt_boxes.size(); ++g) {
        double v = iou(box, img.gt_boxes[g]);
        if (v > best) {
            best = v;
            best_label = img.gt_labels[g];
        }
    }
    if (best >= 0.5) return best_label;
    if (best < 0.3) return background;
    return -1;
}

struct PipelineGrads {
    std::vector<NetworkParams> columns;
    NetworkParams rpn;
    NetworkParams head;
};

PipelineGrads zero_grads(const PipelineModel& model) {
    PipelineGrads g;
    for (const auto& c : model.columns) g.columns.push_back(zeros_like(c));
    g.rpn = zeros_like(model.rpn);
    g.head = zeros_like(model.head);
    return g;
}

void clear_grads(PipelineGrads& g) {
    for (auto& c : g.columns) fill_zero(c);
    fill_zero(g.rpn);
    fill_zero(g.head);
}

void scale_grads(PipelineGrads& g, double a) {
    for (auto& c : g.columns) scale_params(c, a);
    scale_params(g.rpn, a);
    scale_params(g.head, a);
}

void apply_sgd(PipelineModel& model, const PipelineGrads& g, double lr) {
    for (size_t i = 0; i < model.columns.size(); ++i) axpy(-lr, g.columns[i], model.columns[i]);
    axpy(-lr, g.rpn, model.rpn);
    axpy(-lr, g.head, model.head);
}

template <typename T>
std::vector<T> sample_up_to(std::vector<T> pool, size_t count, Rng& rng) {
    if (pool.size() > count) {
        rng.shuffle(pool);
        pool.resize(count);
    }
    return pool;
}

// Forward and backward of one image; accumulates into grads, returns the loss.
double train_step(const PipelineModel& model, const PreparedImage& img,
                  const AnchorContext& ctx, const TrainConfig& tcfg, Rng& rng,
                  PipelineGrads& grads) {
    const PipelineConfig& cfg = model.config;
    std::vector<ForwardCache> col_caches;
    FusionCache fusion_cache;
    const FeatureMap fused =
        pipeline_features(model, img.modalities, &col_caches, &fusion_cache);
    FeatureMap dfused = FeatureMap::zeros(fused.channels, fused.height, fused.width);

    double loss = 0.0;

    // RPN objectness: cross-entropy over sampled positive/negative anchors
    ForwardCache rpn_cache;
    const FeatureMap logits = net_forward(model.rpn, fused, &rpn_cache);
    const int A = cfg.anchors_per_cell();
    const auto pos = sample_up_to(ctx.positive, static_cast<size_t>(tcfg.max_pos_anchors), rng);
    const auto neg = sample_up_to(
        ctx.negative,
        std::max(static_cast<size_t>(tcfg.min_neg_anchors), 2 * pos.size()), rng);
    const size_t n_rpn = pos.size() + neg.size();
    if (n_rpn > 0) {
        FeatureMap dlogits = FeatureMap::zeros(logits.channels, logits.height, logits.width);
        auto accumulate = [&](size_t anchor_idx, int target) {
            const Anchor& a = ctx.anchors[anchor_idx];
            const int slot = static_cast<int>(anchor_idx) % A;
            const double l0 = logits.at(2 * slot, a.cell_y, a.cell_x);
            const double l1 = logits.at(2 * slot + 1, a.cell_y, a.cell_x);
            const double m = std::max(l0, l1);
            const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
            const double z = e0 + e1;
            const double p0 = e0 / z, p1 = e1 / z;
            const double pt = target == 1 ? p1 : p0;
            loss += -std::log(std::max(pt, kProbFloor)) / static_cast<double>(n_rpn);
            const double t1 = target == 1 ? 1.0 : 0.0;
            dlogits.at(2 * slot, a.cell_y, a.cell_x) +=
                (p0 - (1.0 - t1)) / static_cast<double>(n_rpn);
            dlogits.at(2 * slot + 1, a.cell_y, a.cell_x) += (p1 - t1) / static_cast<double>(n_rpn);
        };
        for (size_t i : pos) accumulate(i, 1);
        for (size_t i : neg) accumulate(i, -1);
        FeatureMap drpn_in = net_backward(model.rpn, rpn_cache, dlogits, grads.rpn);
        for (size_t i = 0; i < dfused.data.size(); ++i) dfused.data[i] += drpn_in.data[i];
    }

    // classification head: ground-truth boxes plus ROIs drawn from the
    // current proposals, labeled by the IoU rule (hard negatives included)
    struct TrainRoi {
        BBox box;
        int label;
    };
    std::vector<TrainRoi> rois;
    for (size_t g = 0; g < img.gt_boxes.size(); ++g) {
        rois.push_back({img.gt_boxes[g], img.gt_labels[g]});
    }
    {
        const auto scores = objectness_scores(logits, A);
        const auto proposals =
            propose_rois(scores, ctx.anchors, cfg.top_k, cfg.nms_iou, img.img_w, img.img_h);
        std::vector<TrainRoi> pos, neg;
        for (const auto& p : proposals) {
            const int label = proposal_label(p.box, img, cfg.background_class());
            if (label < 0) continue;
            (label == cfg.background_class() ? neg : pos).push_back({p.box, label});
        }
        for (const auto& r : sample_up_to(pos, static_cast<size_t>(tcfg.head_pos_rois), rng)) {
            rois.push_back(r);
        }
        for (const auto& r : sample_up_to(neg, static_cast<size_t>(tcfg.head_bg_rois), rng)) {
            rois.push_back(r);
        }
    }
    if (!rois.empty()) {
        const double inv = 1.0 / static_cast<double>(rois.size());
        for (const auto& troi : rois) {
            RoiPoolCache pool_cache;
            ROI roi{troi.box, 1.0};
            const FeatureMap pooled =
                roi_pool(fused, roi, cfg.pool_h, cfg.pool_w, cfg.stride(), &pool_cache);
            ForwardCache head_cache;
            const auto probs = head_forward(model.head, pooled, &head_cache);
            loss += -std::log(std::max(probs[troi.label], kProbFloor)) * inv;
            FeatureMap dlogits = FeatureMap::zeros(static_cast<int>(probs.size()), 1, 1);
            for (size_t c = 0; c < probs.size(); ++c) {
                dlogits.data[c] = (probs[c] - (static_cast<int>(c) == troi.label ? 1.0 : 0.0)) *
                                  inv;
            }
            FeatureMap dpooled = net_backward(model.head, head_cache, dlogits, grads.head);
            roi_pool_backward(pool_cache, dpooled, dfused);
        }
    }

    // back through fusion into every column
    const auto column_grads =
        fuse_backward(fusion_cache, dfused, fused.height, fused.width, fused.channels);
    for (size_t ci = 0; ci < model.columns.size(); ++ci) {
        net_backward(model.columns[ci], col_caches[ci], column_grads[ci], grads.columns[ci]);
    }
    return loss;
}

EvalReport evaluate_impl(const PipelineModel& model,
                         const std::vector<const PreparedImage*>& images) {
    const PipelineConfig& cfg = model.config;
    EvalReport report;
    report.class_total.assign(cfg.class_count_with_bg(), 0);
    report.class_correct.assign(cfg.class_count_with_bg(), 0);
    for (const auto* img_ptr : images) {
        const PreparedImage& img = *img_ptr;
        const FeatureMap fused = pipeline_features(model, img.modalities);
        const FeatureMap logits = net_forward(model.rpn, fused);
        const auto scores = objectness_scores(logits, cfg.anchors_per_cell());
        const auto anchors = generate_anchors(fused.height, fused.width, cfg.stride(),
                                              cfg.anchor_scales, cfg.anchor_ratios);
        const auto rois =
            propose_rois(scores, anchors, cfg.top_k, cfg.nms_iou, img.img_w, img.img_h);

        struct EvalRoi {
            BBox box;
            int label;
        };
        std::vector<EvalRoi> eval_rois;
        for (size_t g = 0; g < img.gt_boxes.size(); ++g) {
            eval_rois.push_back({img.gt_boxes[g], img.gt_labels[g]});
        }
        for (const auto& roi : rois) {
            double best = 0.0;
            int best_label = -1;
            for (size_t g = 0; g < img.gt_boxes.size(); ++g) {
                double v = iou(roi.box, img.gt_boxes[g]);
                if (v > best) {
                    best = v;
                    best_label = img.gt_labels[g];
                }
            }
            if (best >= 0.5) {
                eval_rois.push_back({roi.box, best_label});
            } else if (best < 0.3) {
                eval_rois.push_back({roi.box, cfg.background_class()});
            }
        }
        for (const auto& er : eval_rois) {
            const FeatureMap pooled =
                roi_pool(fused, {er.box, 1.0}, cfg.pool_h, cfg.pool_w, cfg.stride());
            const auto probs = head_forward(model.head, pooled);
            int pred = 0;
            for (size_t c = 1; c < probs.size(); ++c) {
                if (probs[c] > probs[pred]) pred = static_cast<int>(c);
            }
            report.total++;
            report.class_total[er.label]++;
            if (pred == er.label) {
                report.correct++;
                report.class_correct[er.label]++;
            }
        }
    }
    report.accuracy = report.total > 0
                          ? static_cast<double>(report.correct) / report.total
                          : 0.0;
    report.no_positive_rois = true;
    for (int c = 0; c < static_cast<int>(report.class_total.size()) - 1; ++c) {
        if (report.class_total[c] > 0) report.no_positive_rois = false;
    }
    return report;
}

PipelineModel train_one_part(const std::vector<const PreparedImage*>& part,
                             const PipelineConfig& cfg, const TrainConfig& tcfg, int part_idx,
                             std::vector<MetricsRow>& metrics, GradStats& stats) {
    PipelineModel model = init_pipeline(cfg, tcfg.seed);
    Rng rng(mix_seed(tcfg.seed, 17));

    // anchor geometry depends only on the image size; contexts are fixed
    std::vector<AnchorContext> contexts;
    contexts.reserve(part.size());
    for (const auto* img : part) {
        contexts.push_back(build_anchor_context(
            *img, cfg, img->img_h / cfg.stride(), img->img_w / cfg.stride()));
    }

    const auto names = column_names(cfg.fusion);
    const long batches_per_epoch =
        (static_cast<long>(part.size()) + tcfg.batch_size - 1) / tcfg.batch_size;
    const long total_steps = batches_per_epoch * tcfg.epochs;
    long step = 0;
    PipelineGrads grads = zero_grads(model);
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        stats.begin_epoch(part_idx, epoch);
        std::vector<size_t> order(part.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);

        double epoch_loss = 0.0;
        double last_lr = tcfg.lr_start;
        for (long b = 0; b < batches_per_epoch; ++b) {
            clear_grads(grads);
            const size_t lo = static_cast<size_t>(b) * tcfg.batch_size;
            const size_t hi = std::min(part.size(), lo + tcfg.batch_size);
            double batch_loss = 0.0;
            for (size_t i = lo; i < hi; ++i) {
                batch_loss +=
                    train_step(model, *part[order[i]], contexts[order[i]], tcfg, rng, grads);
            }
            const double inv = 1.0 / static_cast<double>(hi - lo);
            batch_loss *= inv;
            scale_grads(grads, inv);

            for (size_t ci = 0; ci < grads.columns.size(); ++ci) {
                for (const auto& blk : grads.columns[ci].blocks) {
                    stats.record("col_" + names[ci] + "." + blk.spec.name, blk.weights);
                }
            }
            for (const auto& blk : grads.rpn.blocks) stats.record("rpn." + blk.spec.name, blk.weights);
            for (const auto& blk : grads.head.blocks) {
                stats.record("head." + blk.spec.name, blk.weights);
            }

            last_lr = lr_at_step(tcfg, step, total_steps);
            apply_sgd(model, grads, last_lr);
            ++step;
            epoch_loss += batch_loss;
        }

        std::map<std::string, const std::vector<double>*> weight_lookup;
        for (size_t ci = 0; ci < model.columns.size(); ++ci) {
            for (const auto& blk : model.columns[ci].blocks) {
                weight_lookup["col_" + names[ci] + "." + blk.spec.name] = &blk.weights;
            }
        }
        for (const auto& blk : model.rpn.blocks) {
            weight_lookup["rpn." + blk.spec.name] = &blk.weights;
        }
        for (const auto& blk : model.head.blocks) {
            weight_lookup["head." + blk.spec.name] = &blk.weights;
        }
        stats.end_epoch(weight_lookup);

        const EvalReport report = evaluate_impl(model, part);

        MetricsRow row;
        row.part = part_idx;
        row.epoch = epoch;
        row.lr = last_lr;
        row.loss = epoch_loss / static_cast<double>(batches_per_epoch);
        row.accuracy = report.accuracy;
        metrics.push_back(row);
    }
    return model;
}

}  // namespace

TrainResult train_three_way(const std::vector<ManifestEntry>& entries,
                            const PipelineConfig& pipe_config, const TrainConfig& train_config) {
    if (entries.size() < 3) {
        throw DataError("train_three_way: need at least 3 images to split three ways");
    }
    if (!(train_config.lr_start >= train_config.lr_end && train_config.lr_end > 0)) {
        throw std::invalid_argument("train_three_way: need lr_start >= lr_end > 0");
    }
    if (train_config.epochs < 1 || train_config.batch_size < 1) {
        throw std::invalid_argument("train_three_way: epochs and batch size must be >= 1");
    }
    for (const auto& e : entries) {
        for (int l : e.gt_labels) {
            if (l < 0 || l >= static_cast<int>(pipe_config.class_names.size())) {
                throw DataError("train_three_way: class label out of range");
            }
        }
    }
    const std::vector<PreparedImage> prepared = prepare_images(entries, pipe_config);

    const size_t n = prepared.size();
    const size_t part_size = n / 3;  // remainder goes to the last part
    TrainResult result;
    GradStats stats;
    for (int part_idx = 0; part_idx < 3; ++part_idx) {
        const size_t lo = part_idx * part_size;
        const size_t hi = part_idx == 2 ? n : lo + part_size;
        std::vector<const PreparedImage*> part;
        for (size_t i = lo; i < hi; ++i) part.push_back(&prepared[i]);
        result.part_models.push_back(train_one_part(part, pipe_config, train_config, part_idx,
                                                    result.metrics, stats));
    }
    result.model = average_pipelines(result.part_models);
    result.grad_rows = stats.rows();
    return result;
}

std::vector<std::pair<std::vector<double>, int>> extract_features(
    const PipelineModel& model, const std::vector<PreparedImage>& images) {
    const PipelineConfig& cfg = model.config;
    std::vector<std::pair<std::vector<double>, int>> features;
    for (const auto& img : images) {
        if (img.gt_boxes.empty()) continue;
        const FeatureMap fused = pipeline_features(model, img.modalities);
        for (size_t g = 0; g < img.gt_boxes.size(); ++g) {
            const FeatureMap pooled = roi_pool(fused, {img.gt_boxes[g], 1.0}, cfg.pool_h,
                                               cfg.pool_w, cfg.stride());
            features.emplace_back(pooled.data, img.gt_labels[g]);
        }
    }
    return features;
}

EvalReport evaluate(const PipelineModel& model, const std::vector<PreparedImage>& images) {
    if (images.empty()) throw DataError("evaluate: empty image set");
    std::vector<const PreparedImage*> view;
    view.reserve(images.size());
    for (const auto& img : images) view.push_back(&img);
    return evaluate_impl(model, view);
}

}  // namespace percept
