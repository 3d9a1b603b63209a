#include "percept/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "percept/announce.hpp"
#include "percept/error.hpp"
#include "percept/gradcheck.hpp"
#include "percept/pipeline.hpp"
#include "percept/svm.hpp"
#include "percept/synth.hpp"
#include "percept/train.hpp"

namespace percept {

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& s, size_t expected, const char* what) {
    std::vector<double> vals;
    try {
        for (const auto& tok : split_csv(s)) vals.push_back(std::stod(tok));
    } catch (const std::exception&) {
        throw UsageError(std::string(what) + ": '" + s + "' is not a number list");
    }
    if (expected > 0 && vals.size() != expected) {
        throw UsageError(std::string(what) + ": expected " + std::to_string(expected) +
                         " comma-separated values");
    }
    return vals;
}

struct CommonModelFlags {
    std::string fusion = "scale";
    std::string head = "cnn1c";
    std::string classes = "person,car,sign";
    std::string scales = "16,32,64";
    std::string ratios = "0.5,1,2";
    int top_k = 32;
    double nms_iou = 0.7;
    bool gt_fallback = true;
    double canny_low = 0.1, canny_high = 0.2;
    double hs_alpha2 = 100.0;
    int hs_iters = 100;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--fusion", fusion, "Fusion mode")
            ->check(CLI::IsMember({"none", "edges", "flow", "scale"}));
        cmd->add_option("--head", head, "Classifier head")
            ->check(CLI::IsMember({"cnn0c", "cnn1c"}));
        cmd->add_option("--classes", classes, "Comma-separated class names");
        cmd->add_option("--scales", scales, "Anchor scales, px");
        cmd->add_option("--ratios", ratios, "Anchor aspect ratios");
        cmd->add_option("--top-k", top_k, "Proposals kept after NMS");
        cmd->add_option("--nms-iou", nms_iou, "Proposal NMS IoU threshold");
        cmd->add_flag("--gt-fallback,!--no-gt-fallback", gt_fallback,
                      "Promote the best anchor per ground-truth box to positive");
        cmd->add_option("--canny-low", canny_low, "Canny low threshold ratio");
        cmd->add_option("--canny-high", canny_high, "Canny high threshold ratio");
        cmd->add_option("--hs-alpha2", hs_alpha2, "Horn-Schunck regularization");
        cmd->add_option("--hs-iters", hs_iters, "Horn-Schunck iterations");
    }

    PipelineConfig to_config() const {
        PipelineConfig cfg;
        cfg.fusion = fusion_mode_from_name(fusion);
        cfg.head = head_variant_from_name(head);
        cfg.class_names = split_csv(classes);
        if (cfg.class_names.empty()) throw UsageError("--classes must not be empty");
        cfg.anchor_scales = parse_doubles(scales, 0, "--scales");
        cfg.anchor_ratios = parse_doubles(ratios, 0, "--ratios");
        cfg.top_k = top_k;
        cfg.nms_iou = nms_iou;
        cfg.gt_fallback = gt_fallback;
        cfg.canny.low_ratio = canny_low;
        cfg.canny.high_ratio = canny_high;
        cfg.hs.alpha2 = hs_alpha2;
        cfg.hs.iters = hs_iters;
        return cfg;
    }
};

nlohmann::json detection_to_json(const Detection& d) {
    nlohmann::json j;
    j["image"] = d.image;
    j["class"] = d.class_name;
    j["score"] = d.score;
    j["box"] = {d.box.x1, d.box.y1, d.box.x2, d.box.y2};
    j["grid_cell"] = {d.cell_row, d.cell_col};
    if (d.distance_mm) {
        j["distance_mm"] = *d.distance_mm;
    } else {
        j["distance_mm"] = "unknown";
    }
    return j;
}

int run_synth(const std::string& out_dir, int count, const std::string& classes, int size,
              int objects, uint64_t seed) {
    SynthOptions opts;
    opts.count = count;
    opts.width = opts.height = size;
    opts.objects_per_image = objects;
    opts.classes = split_csv(classes);
    opts.seed = seed;
    const SynthResult res = synth_dataset(out_dir, opts);
    std::cout << "wrote " << res.images_written << " images, " << res.objects_placed
              << " objects, manifest " << res.manifest_path << "\n";
    return 0;
}

int run_train(const CommonModelFlags& flags, const std::string& manifest_path,
              const std::string& model_path, std::string metrics_path,
              std::string gradstats_path, int epochs, int batch, double lr_start, double lr_end,
              bool lr_linear, uint64_t seed) {
    PipelineConfig cfg = flags.to_config();
    TrainConfig tcfg;
    tcfg.epochs = epochs;
    tcfg.batch_size = batch;
    tcfg.lr_start = lr_start;
    tcfg.lr_end = lr_end;
    tcfg.lr_linear = lr_linear;
    tcfg.seed = seed;
    if (tcfg.lr_start < tcfg.lr_end || tcfg.lr_end <= 0) {
        throw UsageError("learning rates must satisfy lr-start >= lr-end > 0");
    }

    const auto entries = load_manifest(manifest_path, cfg.class_names);
    const TrainResult result = train_three_way(entries, cfg, tcfg);

    save_model(result.model, model_path);
    if (metrics_path.empty()) metrics_path = model_path + ".metrics.csv";
    if (gradstats_path.empty()) gradstats_path = model_path + ".gradstats.csv";
    write_metrics_csv(result.metrics, metrics_path);
    {
        std::ofstream out(gradstats_path);
        if (!out) throw DataError(gradstats_path + ": cannot open for writing");
        out << "part,epoch,layer,grad_mean_norm,grad_std_norm\n";
        out.precision(17);
        for (const auto& r : result.grad_rows) {
            out << r.part << "," << r.epoch << "," << r.layer << "," << r.mean_norm << ","
                << r.std_norm << "\n";
        }
    }
    double final_acc = result.metrics.empty() ? 0.0 : result.metrics.back().accuracy;
    std::cout << "model " << model_path << " (" << fusion_mode_name(cfg.fusion) << ", "
              << head_variant_name(cfg.head) << "), final part accuracy " << final_acc << "\n"
              << "metrics " << metrics_path << "\ngrad stats " << gradstats_path << "\n";
    return 0;
}

int run_detect(const std::string& model_path, std::vector<std::string> images,
               const std::string& watch_dir, const std::string& scan_path,
               const std::string& calib_path, const std::string& policy_text,
               const std::string& speak_cmd, const std::string& out_path, double frame_interval,
               double min_score, int max_detections, const std::string& announce_path) {
    const PipelineModel model = load_model(model_path);

    if (!watch_dir.empty()) {
        if (!std::filesystem::is_directory(watch_dir)) {
            throw DataError(watch_dir + ": not a directory");
        }
        std::vector<std::string> found;
        for (const auto& entry : std::filesystem::directory_iterator(watch_dir)) {
            const std::string ext = entry.path().extension().string();
            if (ext == ".pgm" || ext == ".ppm") found.push_back(entry.path().string());
        }
        std::sort(found.begin(), found.end());
        images.insert(images.end(), found.begin(), found.end());
    }
    if (images.empty()) throw UsageError("detect: no input images (pass files or --watch-dir)");

    LaserScan scan;
    LaserContext laser;
    bool have_scan = false;
    if (!scan_path.empty()) {
        if (calib_path.empty()) {
            throw UsageError("detect: --scan requires --calib");
        }
        scan = parse_scan(scan_path);
        laser.calib = load_calibration(calib_path);
        laser.scan = &scan;
        have_scan = true;
    } else if (!calib_path.empty()) {
        laser.calib = load_calibration(calib_path);
    }

    Policy policy;
    try {
        policy = Policy::parse(policy_text);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    DetectOptions opts;
    opts.min_score = min_score;
    opts.max_detections = max_detections;
    opts.cam_rows = laser.calib.cam_rows;
    opts.cam_cols = laser.calib.cam_cols;

    std::ofstream out_file;
    std::ostream* out = &std::cout;
    if (!out_path.empty() && out_path != "-") {
        out_file.open(out_path);
        if (!out_file) throw DataError(out_path + ": cannot open for writing");
        out = &out_file;
    }

    std::vector<TimedDetection> stream;
    for (size_t i = 0; i < images.size(); ++i) {
        const Image img = load_image(images[i]);
        const auto detections =
            detect_image(model, img, images[i], opts, have_scan ? &laser : nullptr);
        const double t = static_cast<double>(i) * frame_interval;
        for (const auto& d : detections) {
            (*out) << detection_to_json(d).dump() << "\n";
            stream.push_back({t, d});
        }
    }

    const auto announcements = schedule(policy, stream, laser.calib.cam_cols);
    std::unique_ptr<AnnouncementSink> sink;
    if (!speak_cmd.empty()) {
        sink = make_command_sink(speak_cmd);
    } else if (!announce_path.empty()) {
        sink = make_file_sink(announce_path);
    } else {
        sink = make_stream_sink(std::cout);
    }
    for (const auto& a : announcements) {
        emit(a, *sink);
        nlohmann::json j;  // announcements are mirrored into the JSON-lines log
        j["type"] = "announcement";
        j["t"] = a.t;
        j["text"] = a.text;
        j["urgent"] = a.urgent;
        (*out) << j.dump() << "\n";
    }
    return 0;
}

int run_eval(const std::string& model_path, const std::string& manifest_path, bool with_svm,
             const std::string& svm_train_manifest, bool svm_on_test, int svm_epochs,
             double svm_lr, double svm_reg, uint64_t seed) {
    const PipelineModel model = load_model(model_path);
    const auto entries = load_manifest(manifest_path, model.config.class_names);
    const auto prepared = prepare_images(entries, model.config);
    const EvalReport report = evaluate(model, prepared);

    std::cout << "roi_accuracy " << report.accuracy << " (" << report.correct << "/"
              << report.total << ")\n";
    for (size_t c = 0; c < report.class_total.size(); ++c) {
        const std::string name = c < model.config.class_names.size()
                                     ? model.config.class_names[c]
                                     : "background";
        std::cout << "class " << name << " " << report.class_correct[c] << "/"
                  << report.class_total[c] << "\n";
    }
    if (report.no_positive_rois) {
        std::cout << "warning: no positive ROIs in this manifest\n";
    }

    if (with_svm) {
        // Algorithm step as published trains the SVM on test-set features;
        // the default here uses a separate training manifest instead.
        std::vector<std::pair<std::vector<double>, int>> train_feats;
        if (svm_on_test) {
            train_feats = extract_features(model, prepared);
        } else {
            if (svm_train_manifest.empty()) {
                throw UsageError("eval: --svm needs --svm-train-manifest (or --svm-on-test)");
            }
            const auto train_entries =
                load_manifest(svm_train_manifest, model.config.class_names);
            train_feats = extract_features(model, prepare_images(train_entries, model.config));
        }
        const auto eval_feats = extract_features(model, prepared);
        if (train_feats.empty() || eval_feats.empty()) {
            throw DataError("eval: no ground-truth boxes to extract SVM features from");
        }
        std::vector<std::vector<double>> xs;
        std::vector<int> ys;
        for (auto& [x, y] : train_feats) {
            xs.push_back(x);
            ys.push_back(y);
        }
        const SvmModel svm = svm_train(xs, ys, static_cast<int>(model.config.class_names.size()),
                                       svm_epochs, svm_lr, svm_reg, seed);
        int correct = 0;
        for (const auto& [x, y] : eval_feats) {
            if (svm_predict(svm, x) == y) correct++;
        }
        std::cout << "svm_accuracy " << static_cast<double>(correct) / eval_feats.size() << " ("
                  << correct << "/" << eval_feats.size() << ")"
                  << (svm_on_test ? " [trained on test features]" : "") << "\n";
    }
    return 0;
}

int run_simulate_scan(const std::string& out_path, double wall_x, double wall_y0, double wall_y1,
                      const std::vector<std::string>& rects,
                      const std::vector<std::string>& circles, const std::string& pose_text) {
    std::vector<Obstacle> scene;
    if (wall_x > 0) scene.push_back(Obstacle::wall(wall_x, wall_y0, wall_y1));
    for (const auto& r : rects) {
        const auto v = parse_doubles(r, 4, "--rect");
        scene.push_back(Obstacle::rect(v[0], v[1], v[2], v[3]));
    }
    for (const auto& c : circles) {
        const auto v = parse_doubles(c, 3, "--circle");
        scene.push_back(Obstacle::circle(v[0], v[1], v[2]));
    }
    SensorPose pose;
    if (!pose_text.empty()) {
        const auto v = parse_doubles(pose_text, 3, "--pose");
        pose.x_mm = v[0];
        pose.y_mm = v[1];
        pose.heading_rad = v[2] * M_PI / 180.0;
    }
    const LaserScan scan = simulate_scan(scene, pose);
    write_scan_csv(scan, out_path);
    int valid = 0;
    for (const auto& s : scan.samples) valid += s.valid ? 1 : 0;
    std::cout << "wrote " << scan.samples.size() << " beams (" << valid << " returns) to "
              << out_path << "\n";
    return 0;
}

int run_gradcheck(int coords, uint64_t seed) {
    bool ok = true;
    for (FusionMode mode : {FusionMode::Edges, FusionMode::Flow, FusionMode::Scale}) {
        const auto res = gradcheck_composed(mode, HeadVariant::Cnn1C, coords, seed);
        std::cout << "fusion " << fusion_mode_name(mode) << ": max rel err " << res.max_rel_err
                  << " over " << res.coords_checked << " coordinates\n";
        ok = ok && res.max_rel_err < 1e-4;
    }
    if (!ok) {
        std::cerr << "gradcheck failed\n";
        return 3;
    }
    return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"multi-modal fusion object detection and ranging pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic shape dataset");
    std::string synth_out;
    int synth_count = 60, synth_size = 64, synth_objects = 1;
    std::string synth_classes = "person,car,sign";
    uint64_t synth_seed = 1;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--count", synth_count, "Total image count");
    synth->add_option("--classes", synth_classes, "Comma-separated class names");
    synth->add_option("--size", synth_size, "Image width/height");
    synth->add_option("--objects", synth_objects, "Objects per image");
    synth->add_option("--seed", synth_seed, "Random seed");

    // train
    auto* train = app.add_subcommand("train", "Train the three-way averaged detector");
    CommonModelFlags train_flags;
    train_flags.add_to(train);
    std::string train_manifest, train_model, train_metrics, train_gradstats;
    int train_epochs = 10, train_batch = 1;
    double train_lr_start = 0.01, train_lr_end = 0.005;
    bool train_lr_linear = false;
    uint64_t train_seed = 1;
    train->add_option("--manifest", train_manifest, "Training manifest")->required();
    train->add_option("--out", train_model, "Model output path")->required();
    train->add_option("--metrics", train_metrics, "Metrics CSV path");
    train->add_option("--grad-stats", train_gradstats, "Gradient statistics CSV path");
    train->add_option("--epochs", train_epochs, "Epochs per part");
    train->add_option("--batch", train_batch, "Mini-batch size");
    train->add_option("--lr-start", train_lr_start, "Initial learning rate");
    train->add_option("--lr-end", train_lr_end, "Final learning rate");
    train->add_flag("--lr-linear", train_lr_linear, "Linear decay instead of one step");
    train->add_option("--seed", train_seed, "Random seed");

    // detect
    auto* detect = app.add_subcommand("detect", "Detect, classify and range objects");
    std::string det_model, det_watch, det_scan, det_calib, det_policy = "once";
    std::string det_speak, det_out = "-", det_announce;
    std::vector<std::string> det_images;
    double det_interval = 1.0, det_min_score = 0.25;
    int det_max = 0;
    detect->add_option("--model", det_model, "Trained model container")->required();
    detect->add_option("images", det_images, "Input PGM/PPM images");
    detect->add_option("--watch-dir", det_watch, "Process every PGM/PPM in a directory");
    detect->add_option("--scan", det_scan, "Laser scan CSV");
    detect->add_option("--calib", det_calib, "Camera/laser grid calibration file");
    detect->add_option("--policy", det_policy, "interval:N | once | tooclose:MM");
    detect->add_option("--speak-cmd", det_speak, "External command template for announcements");
    detect->add_option("--out", det_out, "Detections JSON-lines output ('-' = stdout)");
    detect->add_option("--announce-out", det_announce, "Announcement text file");
    detect->add_option("--frame-interval", det_interval, "Seconds between frames");
    detect->add_option("--min-score", det_min_score, "Minimum class probability");
    detect->add_option("--max-detections", det_max,
                       "Cap detections per image (0 = unlimited)");

    // eval
    auto* eval = app.add_subcommand("eval", "ROI classification accuracy report");
    std::string eval_model, eval_manifest, eval_svm_manifest;
    bool eval_svm = false, eval_svm_on_test = false;
    int eval_svm_epochs = 50;
    double eval_svm_lr = 0.01, eval_svm_reg = 1e-4;
    uint64_t eval_seed = 1;
    eval->add_option("--model", eval_model, "Trained model container")->required();
    eval->add_option("--manifest", eval_manifest, "Evaluation manifest")->required();
    eval->add_flag("--svm", eval_svm, "Also train/evaluate the linear SVM post-classifier");
    eval->add_option("--svm-train-manifest", eval_svm_manifest, "Manifest for SVM training");
    eval->add_flag("--svm-on-test", eval_svm_on_test,
                   "Train the SVM on the evaluation features (the published protocol)");
    eval->add_option("--svm-epochs", eval_svm_epochs, "SVM epochs");
    eval->add_option("--svm-lr", eval_svm_lr, "SVM learning rate");
    eval->add_option("--svm-reg", eval_svm_reg, "SVM L2 regularization");
    eval->add_option("--seed", eval_seed, "Random seed");

    // simulate-scan
    auto* sim = app.add_subcommand("simulate-scan", "Ray-cast a laser scan of a synthetic scene");
    std::string sim_out, sim_pose;
    double sim_wall_x = 0, sim_wall_y0 = -6000, sim_wall_y1 = 6000;
    std::vector<std::string> sim_rects, sim_circles;
    sim->add_option("--out", sim_out, "Scan CSV output path")->required();
    sim->add_option("--wall-x", sim_wall_x, "Wall at this forward distance, mm");
    sim->add_option("--wall-y0", sim_wall_y0, "Wall lateral start, mm");
    sim->add_option("--wall-y1", sim_wall_y1, "Wall lateral end, mm");
    sim->add_option("--rect", sim_rects, "Rectangle obstacle x1,y1,x2,y2 (mm)");
    sim->add_option("--circle", sim_circles, "Circle obstacle cx,cy,r (mm)");
    sim->add_option("--pose", sim_pose, "Sensor pose x,y,heading_deg");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the composed gradients");
    int gc_coords = 100;
    uint64_t gc_seed = 7;
    gc->add_option("--coords", gc_coords, "Coordinates to sample per fusion mode");
    gc->add_option("--seed", gc_seed, "Random seed");

    std::vector<const char*> argv;
    argv.push_back("percept");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (app.got_subcommand(synth)) {
            return run_synth(synth_out, synth_count, synth_classes, synth_size, synth_objects,
                             synth_seed);
        }
        if (app.got_subcommand(train)) {
            return run_train(train_flags, train_manifest, train_model, train_metrics,
                             train_gradstats, train_epochs, train_batch, train_lr_start,
                             train_lr_end, train_lr_linear, train_seed);
        }
        if (app.got_subcommand(detect)) {
            return run_detect(det_model, det_images, det_watch, det_scan, det_calib, det_policy,
                              det_speak, det_out, det_interval, det_min_score, det_max,
                              det_announce);
        }
        if (app.got_subcommand(eval)) {
            return run_eval(eval_model, eval_manifest, eval_svm, eval_svm_manifest,
                            eval_svm_on_test, eval_svm_epochs, eval_svm_lr, eval_svm_reg,
                            eval_seed);
        }
        if (app.got_subcommand(sim)) {
            return run_simulate_scan(sim_out, sim_wall_x, sim_wall_y0, sim_wall_y1, sim_rects,
                                     sim_circles, sim_pose);
        }
        if (app.got_subcommand(gc)) {
            return run_gradcheck(gc_coords, gc_seed);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}

}  // namespace percept
