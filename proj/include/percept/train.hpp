#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "percept/grad_stats.hpp"
#include "percept/pipeline.hpp"

namespace percept {

// One image with its ground-truth boxes. Labels index into the class list.
struct ManifestEntry {
    std::string image_path;
    std::vector<BBox> gt_boxes;
    std::vector<int> gt_labels;
};

// Lines are `image_path label x1 y1 x2 y2`; a bare `image_path` declares an
// image with no objects. Paths are resolved against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::string& path,
                                         const std::vector<std::string>& classes);

struct TrainConfig {
    int epochs = 10;
    double lr_start = 0.01;
    double lr_end = 0.005;
    bool lr_linear = false;  // default is a single step at the half mark
    int batch_size = 1;
    uint64_t seed = 1;
    int max_pos_anchors = 16;  // RPN loss sampling
    int min_neg_anchors = 4;
    int head_pos_rois = 4;  // positive proposals fed to the head per image
    int head_bg_rois = 6;   // background proposals fed to the head per image
};

// Learning-rate schedule over all optimizer steps of one part's training:
// lr_start for the first half, lr_end for the second (or linear decay).
double lr_at_step(const TrainConfig& cfg, long step, long total_steps);

struct MetricsRow {
    int part = 0;
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double accuracy = 0.0;
};

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

// Modalities and anchor labels computed once per image and reused
// across epochs and parts.
struct PreparedImage {
    std::string name;
    int img_w = 0, img_h = 0;
    std::vector<Image> modalities;
    std::vector<BBox> gt_boxes;
    std::vector<int> gt_labels;
};

std::vector<PreparedImage> prepare_images(const std::vector<ManifestEntry>& entries,
                                          const PipelineConfig& config);

struct TrainResult {
    PipelineModel model;                      // average of the three part models
    std::vector<PipelineModel> part_models;   // in part order
    std::vector<MetricsRow> metrics;          // one row per part per epoch
    std::vector<GradStatRow> grad_rows;
};

// The three-way protocol: split the dataset into 3 equal parts (remainder to
// the last), train a full pipeline copy per part with stepped learning rate,
// then average weights and biases elementwise. Bit-deterministic given the
// dataset order and seed.
TrainResult train_three_way(const std::vector<ManifestEntry>& entries,
                            const PipelineConfig& pipe_config, const TrainConfig& train_config);

// Flattened ROI-pooled fused features of every ground-truth box.
std::vector<std::pair<std::vector<double>, int>> extract_features(
    const PipelineModel& model, const std::vector<PreparedImage>& images);

struct EvalReport {
    double accuracy = 0.0;
    int total = 0, correct = 0;
    std::vector<int> class_total;    // C+1 entries, background last
    std::vector<int> class_correct;
    bool no_positive_rois = false;
};

// ROI classification accuracy: ground-truth boxes plus RPN proposals labeled
// by IoU (>= 0.5 object class, < 0.3 background, otherwise skipped).
EvalReport evaluate(const PipelineModel& model, const std::vector<PreparedImage>& images);

}  // namespace percept
