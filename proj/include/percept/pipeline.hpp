#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "percept/detection.hpp"
#include "percept/filters.hpp"
#include "percept/fusion.hpp"
#include "percept/heads.hpp"
#include "percept/laser.hpp"
#include "percept/net.hpp"
#include "percept/optical_flow.hpp"
#include "percept/rpn.hpp"

namespace percept {

// Everything needed to build, run and serialize one detector.
struct PipelineConfig {
    FusionMode fusion = FusionMode::Scale;
    HeadVariant head = HeadVariant::Cnn1C;
    std::vector<std::string> class_names = {"person", "car", "sign"};

    std::vector<int> column_channels = {8, 16, 32};  // conv blocks, pool 2 each
    std::vector<double> anchor_scales = {16, 32, 64};
    std::vector<double> anchor_ratios = {0.5, 1.0, 2.0};
    int rpn_channels = 32;
    int pool_h = 4, pool_w = 4;
    int fc1 = 128, fc2 = 64;
    int top_k = 32;
    double nms_iou = 0.7;
    bool gt_fallback = true;

    CannyParams canny;
    HornSchunckParams hs;
    double scale_t_small = 3.0;
    double scale_t_large = 5.0;

    int stride() const { return 1 << static_cast<int>(column_channels.size()); }
    int anchors_per_cell() const {
        return static_cast<int>(anchor_scales.size() * anchor_ratios.size());
    }
    int class_count_with_bg() const { return static_cast<int>(class_names.size()) + 1; }
    int background_class() const { return static_cast<int>(class_names.size()); }
};

// Column names in the canonical fusion order (intensity first).
std::vector<std::string> column_names(FusionMode mode);

struct PipelineModel {
    PipelineConfig config;
    std::vector<NetworkParams> columns;  // parallel to column_names(config.fusion)
    NetworkParams rpn;
    NetworkParams head;
};

// Glorot-initialized model; each column, the RPN and the head get an
// independent stream derived from the seed.
PipelineModel init_pipeline(const PipelineConfig& config, uint64_t seed);

// Averages corresponding columns/RPN/head across part-trained models.
PipelineModel average_pipelines(const std::vector<PipelineModel>& models);

bool equal_pipelines(const PipelineModel& a, const PipelineModel& b);

// The per-column input images for one gray frame: intensity plus the
// modality maps the fusion mode calls for. The optical-flow column pairs the
// frame with a synthetic 1-pixel diagonal shift.
std::vector<Image> extract_modalities(const Image& gray, const PipelineConfig& config);

// Fused conv feature map of one frame; caches enable backprop.
FeatureMap pipeline_features(const PipelineModel& model, const std::vector<Image>& modalities,
                             std::vector<ForwardCache>* column_caches = nullptr,
                             FusionCache* fusion_cache = nullptr);

// Versioned binary container: config, class names and all parameter blocks.
// Round-trips bit-exactly.
void save_model(const PipelineModel& model, const std::string& path);
PipelineModel load_model(const std::string& path);

struct DetectOptions {
    double min_score = 0.25;
    double class_nms_iou = 0.3;
    int max_detections = 0;  // 0 = unlimited
    int cam_rows = 3, cam_cols = 3;
};

// Laser context for distance assignment; null scan leaves distances unknown.
struct LaserContext {
    const LaserScan* scan = nullptr;
    GridCalibration calib = GridCalibration::default_calibration();
};

// Full detector: modalities -> columns -> fusion -> RPN -> ROI pool -> head,
// then grid cell and distance per surviving detection.
std::vector<Detection> detect_image(const PipelineModel& model, const Image& img,
                                    const std::string& image_name, const DetectOptions& opts,
                                    const LaserContext* laser = nullptr);

}  // namespace percept
