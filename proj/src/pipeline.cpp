#include "percept/pipeline.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "percept/error.hpp"
#include "percept/rng.hpp"

namespace percept {

std::vector<std::string> column_names(FusionMode mode) {
    switch (mode) {
        case FusionMode::None: return {"I"};
        case FusionMode::Edges: return {"I", "Ec", "Es", "Ep"};
        case FusionMode::Flow: return {"I", "O"};
        case FusionMode::Scale: return {"I", "G3", "G5"};
    }
    throw std::invalid_argument("column_names: bad fusion mode");
}

PipelineModel init_pipeline(const PipelineConfig& config, uint64_t seed) {
    PipelineModel model;
    model.config = config;
    const Arch column = backbone_arch(1, config.column_channels);
    const auto names = column_names(config.fusion);
    for (size_t i = 0; i < names.size(); ++i) {
        model.columns.push_back(init_params(column, mix_seed(seed, i)));
    }
    const int feat_c = config.column_channels.back();
    Arch rpn_arch;
    rpn_arch.push_back(LayerSpec::conv("rpn_conv", feat_c, config.rpn_channels, 3,
                                       /*relu=*/true, /*pool=*/false));
    rpn_arch.push_back(LayerSpec::conv("rpn_logits", config.rpn_channels,
                                       2 * config.anchors_per_cell(), 1,
                                       /*relu=*/false, /*pool=*/false));
    model.rpn = init_params(rpn_arch, mix_seed(seed, 100));
    model.head = init_params(head_arch(config.head, feat_c, config.pool_h, config.pool_w,
                                       config.class_count_with_bg(), config.fc1, config.fc2),
                             mix_seed(seed, 200));
    return model;
}

PipelineModel average_pipelines(const std::vector<PipelineModel>& models) {
    if (models.empty()) throw std::invalid_argument("average_pipelines: empty list");
    PipelineModel avg;
    avg.config = models[0].config;
    const size_t n_cols = models[0].columns.size();
    for (size_t ci = 0; ci < n_cols; ++ci) {
        std::vector<NetworkParams> nets;
        for (const auto& m : models) nets.push_back(m.columns[ci]);
        avg.columns.push_back(average_params(nets));
    }
    std::vector<NetworkParams> rpns, heads;
    for (const auto& m : models) {
        rpns.push_back(m.rpn);
        heads.push_back(m.head);
    }
    avg.rpn = average_params(rpns);
    avg.head = average_params(heads);
    return avg;
}

bool equal_pipelines(const PipelineModel& a, const PipelineModel& b) {
    if (a.columns.size() != b.columns.size()) return false;
    for (size_t i = 0; i < a.columns.size(); ++i) {
        if (!equal_params(a.columns[i], b.columns[i])) return false;
    }
    return equal_params(a.rpn, b.rpn) && equal_params(a.head, b.head);
}

std::vector<Image> extract_modalities(const Image& gray, const PipelineConfig& config) {
    if (gray.channels != 1) {
        throw std::invalid_argument("extract_modalities: expected a grayscale frame");
    }
    std::vector<Image> mods;
    mods.push_back(gray);
    switch (config.fusion) {
        case FusionMode::None:
            break;
        case FusionMode::Edges:
            mods.push_back(edge_detect(gray, EdgeMethod::Canny, config.canny));
            mods.push_back(edge_detect(gray, EdgeMethod::Sobel));
            mods.push_back(edge_detect(gray, EdgeMethod::Prewitt));
            break;
        case FusionMode::Flow: {
            const Image next = shift_image(gray, 1, 1);
            mods.push_back(flow_orientation(optical_flow(gray, next, config.hs)));
            break;
        }
        case FusionMode::Scale:
            mods.push_back(gaussian_scale(gray, config.scale_t_small));
            mods.push_back(gaussian_scale(gray, config.scale_t_large));
            break;
    }
    return mods;
}

FeatureMap pipeline_features(const PipelineModel& model, const std::vector<Image>& modalities,
                             std::vector<ForwardCache>* column_caches,
                             FusionCache* fusion_cache) {
    if (modalities.size() != model.columns.size()) {
        throw std::invalid_argument("pipeline_features: modality/column count mismatch");
    }
    std::vector<FeatureMap> maps(model.columns.size());
    if (column_caches) column_caches->resize(model.columns.size());
    for (size_t i = 0; i < model.columns.size(); ++i) {
        maps[i] = net_forward(model.columns[i], image_to_feature_map(modalities[i]),
                              column_caches ? &(*column_caches)[i] : nullptr);
    }
    return fuse_forward(model.config.fusion, maps, fusion_cache);
}

namespace {

constexpr char kModelMagic[4] = {'P', 'M', 'M', '1'};

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError("model container: truncated");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw DataError("model container: truncated");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    uint32_t n = get_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw DataError("model container: truncated");
    return s;
}

void put_dvec(std::ostream& out, const std::vector<double>& v) {
    put_u32(out, static_cast<uint32_t>(v.size()));
    for (double x : v) put_f64(out, x);
}

std::vector<double> get_dvec(std::istream& in) {
    uint32_t n = get_u32(in);
    std::vector<double> v(n);
    for (auto& x : v) x = get_f64(in);
    return v;
}

}  // namespace

void save_model(const PipelineModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path + ": cannot open for writing");
    const PipelineConfig& c = model.config;
    out.write(kModelMagic, 4);
    put_u32(out, 1);  // container version
    out.put(static_cast<char>(c.fusion));
    out.put(static_cast<char>(c.head));
    put_u32(out, static_cast<uint32_t>(c.class_names.size()));
    for (const auto& name : c.class_names) put_string(out, name);
    put_u32(out, static_cast<uint32_t>(c.column_channels.size()));
    for (int ch : c.column_channels) put_u32(out, static_cast<uint32_t>(ch));
    put_dvec(out, c.anchor_scales);
    put_dvec(out, c.anchor_ratios);
    put_u32(out, static_cast<uint32_t>(c.rpn_channels));
    put_u32(out, static_cast<uint32_t>(c.pool_h));
    put_u32(out, static_cast<uint32_t>(c.pool_w));
    put_u32(out, static_cast<uint32_t>(c.fc1));
    put_u32(out, static_cast<uint32_t>(c.fc2));
    put_u32(out, static_cast<uint32_t>(c.top_k));
    put_f64(out, c.nms_iou);
    out.put(c.gt_fallback ? 1 : 0);
    put_f64(out, c.canny.sigma);
    put_f64(out, c.canny.low_ratio);
    put_f64(out, c.canny.high_ratio);
    put_f64(out, c.hs.alpha2);
    put_u32(out, static_cast<uint32_t>(c.hs.iters));
    put_f64(out, c.scale_t_small);
    put_f64(out, c.scale_t_large);

    put_u32(out, static_cast<uint32_t>(model.columns.size()));
    for (const auto& col : model.columns) write_params(out, col);
    write_params(out, model.rpn);
    write_params(out, model.head);
    if (!out) throw DataError(path + ": write failed");
}

PipelineModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError(path + ": cannot open model file");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kModelMagic, 4) != 0) {
        throw DataError(path + ": not a model container");
    }
    const uint32_t version = get_u32(in);
    if (version != 1) {
        throw DataError(path + ": unsupported container version " + std::to_string(version));
    }
    PipelineModel model;
    PipelineConfig& c = model.config;
    c.fusion = static_cast<FusionMode>(in.get());
    c.head = static_cast<HeadVariant>(in.get());
    c.class_names.clear();
    const uint32_t n_classes = get_u32(in);
    for (uint32_t i = 0; i < n_classes; ++i) c.class_names.push_back(get_string(in));
    c.column_channels.clear();
    const uint32_t n_blocks = get_u32(in);
    for (uint32_t i = 0; i < n_blocks; ++i) {
        c.column_channels.push_back(static_cast<int>(get_u32(in)));
    }
    c.anchor_scales = get_dvec(in);
    c.anchor_ratios = get_dvec(in);
    c.rpn_channels = static_cast<int>(get_u32(in));
    c.pool_h = static_cast<int>(get_u32(in));
    c.pool_w = static_cast<int>(get_u32(in));
    c.fc1 = static_cast<int>(get_u32(in));
    c.fc2 = static_cast<int>(get_u32(in));
    c.top_k = static_cast<int>(get_u32(in));
    c.nms_iou = get_f64(in);
    c.gt_fallback = in.get() != 0;
    c.canny.sigma = get_f64(in);
    c.canny.low_ratio = get_f64(in);
    c.canny.high_ratio = get_f64(in);
    c.hs.alpha2 = get_f64(in);
    c.hs.iters = static_cast<int>(get_u32(in));
    c.scale_t_small = get_f64(in);
    c.scale_t_large = get_f64(in);

    const uint32_t n_columns = get_u32(in);
    if (n_columns != column_names(c.fusion).size()) {
        throw DataError(path + ": column count does not match the fusion mode");
    }
    for (uint32_t i = 0; i < n_columns; ++i) model.columns.push_back(read_params(in));
    model.rpn = read_params(in);
    model.head = read_params(in);
    if (!in) throw DataError(path + ": truncated container");
    return model;
}

std::vector<Detection> detect_image(const PipelineModel& model, const Image& img,
                                    const std::string& image_name, const DetectOptions& opts,
                                    const LaserContext* laser) {
    const PipelineConfig& cfg = model.config;
    const Image gray = to_grayscale(img);
    const FeatureMap fused = pipeline_features(model, extract_modalities(gray, cfg));

    const FeatureMap logits = net_forward(model.rpn, fused);
    const auto scores = objectness_scores(logits, cfg.anchors_per_cell());
    const auto anchors = generate_anchors(fused.height, fused.width, cfg.stride(),
                                          cfg.anchor_scales, cfg.anchor_ratios);
    const auto rois =
        propose_rois(scores, anchors, cfg.top_k, cfg.nms_iou, gray.width, gray.height);

    struct Scored {
        Detection det;
        int class_idx;
    };
    std::vector<Scored> candidates;
    for (const auto& roi : rois) {
        const FeatureMap pooled = roi_pool(fused, roi, cfg.pool_h, cfg.pool_w, cfg.stride());
        const auto probs = head_forward(model.head, pooled);
        int best = 0;
        for (size_t i = 1; i < probs.size(); ++i) {
            if (probs[i] > probs[best]) best = static_cast<int>(i);
        }
        if (best == cfg.background_class() || probs[best] < opts.min_score) continue;
        Detection d;
        d.image = image_name;
        d.class_name = cfg.class_names[best];
        d.score = probs[best];
        d.box = roi.box;
        candidates.push_back({std::move(d), best});
    }

    // per-class NMS over the classified boxes
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Scored& a, const Scored& b) { return a.det.score > b.det.score; });
    std::vector<Detection> out;
    for (const auto& cand : candidates) {
        if (opts.max_detections > 0 && static_cast<int>(out.size()) >= opts.max_detections) break;
        bool keep = true;
        for (const auto& kept : out) {
            if (kept.class_name == cand.det.class_name &&
                iou(kept.box, cand.det.box) > opts.class_nms_iou) {
                keep = false;
                break;
            }
        }
        if (!keep) continue;
        Detection d = cand.det;
        const int q = std::clamp(static_cast<int>(d.box.cx()), 0, gray.width - 1);
        const int r = std::clamp(static_cast<int>(d.box.cy()), 0, gray.height - 1);
        const int rows = laser ? laser->calib.cam_rows : opts.cam_rows;
        const int cols = laser ? laser->calib.cam_cols : opts.cam_cols;
        const CamCell cell = pixel_to_camera_cell(q, r, gray.width, gray.height, rows, cols);
        d.cell_row = cell.row;
        d.cell_col = cell.col;
        if (laser && laser->scan) {
            const DistanceResult dist =
                map_to_distance(q, r, gray.width, gray.height, laser->calib, *laser->scan);
            if (dist.has_return) d.distance_mm = dist.z_mm;
        }
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace percept
