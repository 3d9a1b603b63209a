// Acceptance suite: one check per pipeline-level criterion, each printing a
// single PASS/FAIL line. Run with no arguments for the full suite or with a
// check name to run one.

#include <bitset>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include "percept/announce.hpp"
#include "percept/cli.hpp"
#include "percept/gradcheck.hpp"
#include "percept/grad_stats.hpp"
#include "percept/laser.hpp"
#include "percept/pipeline.hpp"
#include "percept/rng.hpp"
#include "percept/rpn.hpp"
#include "percept/synth.hpp"
#include "percept/train.hpp"

using namespace percept;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string scratch_dir() {
    const std::string dir = "percept_acceptance_tmp";
    std::filesystem::create_directories(dir);
    return dir;
}

BBox random_box(Rng& rng, double span) {
    const double x1 = rng.uniform(0, span - 1);
    const double y1 = rng.uniform(0, span - 1);
    return {x1, y1, x1 + rng.uniform(0.5, span - x1), y1 + rng.uniform(0.5, span - y1)};
}

// ---------------------------------------------------------------- labeling

Outcome check_labeling() {
    Anchor anchor;
    anchor.box = {0, 0, 10, 10};
    // overlaps constructed to hit IoU 0.8 / 0.2 / 0.5 exactly
    if (label_anchor(anchor, {{0, 2, 10, 10}}) != AnchorLabel::Positive) {
        return {false, "IoU 0.8 did not label positive"};
    }
    if (label_anchor(anchor, {{0, 0, 10, 2}}) != AnchorLabel::Negative) {
        return {false, "IoU 0.2 did not label negative"};
    }
    if (label_anchor(anchor, {{0, 0, 10, 5}}) != AnchorLabel::Ignore) {
        return {false, "IoU 0.5 did not label ignore"};
    }

    Rng rng(20250808);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Anchor a;
        a.box = random_box(rng, 96);
        std::vector<BBox> gts;
        const int n = rng.uniform_int(0, 5);
        for (int g = 0; g < n; ++g) gts.push_back(random_box(rng, 96));

        // brute-force reimplementation of the labeling rule
        double best = 0.0;
        for (const auto& gt : gts) {
            const double ix =
                std::max(0.0, std::min(a.box.x2, gt.x2) - std::max(a.box.x1, gt.x1));
            const double iy =
                std::max(0.0, std::min(a.box.y2, gt.y2) - std::max(a.box.y1, gt.y1));
            const double inter = ix * iy;
            const double uni = a.box.area() + gt.area() - inter;
            best = std::max(best, uni > 0 ? inter / uni : 0.0);
        }
        const AnchorLabel expected = best > 0.7    ? AnchorLabel::Positive
                                     : best < 0.3 ? AnchorLabel::Negative
                                                  : AnchorLabel::Ignore;
        if (label_anchor(a, gts) != expected) mismatches++;
    }
    if (mismatches > 0) {
        return {false, std::to_string(mismatches) + " mismatches on 1000 random configurations"};
    }
    return {true, "Eq. branches exact, 0/1000 brute-force mismatches"};
}

// --------------------------------------------------------------------- iou

Outcome check_iou() {
    // every axis-aligned integer box in a 12x12 grid, pixel membership as bits
    constexpr int G = 12;
    std::vector<BBox> boxes;
    std::vector<std::bitset<G * G>> masks;
    for (int x1 = 0; x1 <= G; ++x1) {
        for (int x2 = x1 + 1; x2 <= G; ++x2) {
            for (int y1 = 0; y1 <= G; ++y1) {
                for (int y2 = y1 + 1; y2 <= G; ++y2) {
                    boxes.push_back({static_cast<double>(x1), static_cast<double>(y1),
                                     static_cast<double>(x2), static_cast<double>(y2)});
                    std::bitset<G * G> m;
                    for (int y = y1; y < y2; ++y) {
                        for (int x = x1; x < x2; ++x) m.set(y * G + x);
                    }
                    masks.push_back(m);
                }
            }
        }
    }
    double max_err = 0.0;
    for (size_t i = 0; i < boxes.size(); ++i) {
        for (size_t j = i; j < boxes.size(); ++j) {
            const auto inter = (masks[i] & masks[j]).count();
            const auto uni = (masks[i] | masks[j]).count();
            const double oracle = static_cast<double>(inter) / static_cast<double>(uni);
            max_err = std::max(max_err, std::abs(iou(boxes[i], boxes[j]) - oracle));
        }
    }
    std::ostringstream detail;
    detail << boxes.size() << " boxes, max abs err " << max_err;
    return {max_err <= 1e-12, detail.str()};
}

// --------------------------------------------------------------- gradients

Outcome check_gradients() {
    double worst = 0.0;
    for (FusionMode mode : {FusionMode::Edges, FusionMode::Flow, FusionMode::Scale}) {
        const GradCheckResult res = gradcheck_composed(mode, HeadVariant::Cnn1C, 100, 20250808);
        worst = std::max(worst, res.max_rel_err);
        if (res.coords_checked < 100) return {false, "fewer than 100 coordinates checked"};
    }
    std::ostringstream detail;
    detail << "max rel err " << worst << " over 100 coords x {F_E, F_O, F_G}";
    return {worst < 1e-4, detail.str()};
}

// ------------------------------------------------------------------ fusion

Outcome check_fusion() {
    Rng rng(7);
    auto random_fmap = [&](int c, int h, int w) {
        FeatureMap m = FeatureMap::zeros(c, h, w);
        for (double& v : m.data) v = rng.uniform(-3, 3);
        return m;
    };
    const FeatureMap fI = random_fmap(4, 6, 5);
    const FeatureMap a = random_fmap(4, 6, 5);
    const FeatureMap b = random_fmap(4, 6, 5);
    const FeatureMap c = random_fmap(4, 6, 5);
    const FeatureMap zero = FeatureMap::zeros(4, 6, 5);

    for (const FeatureMap& out :
         {fuse_edges(fI, a, b, c).map, fuse_flow(fI, a).map, fuse_scale(fI, a, b).map}) {
        if (out.channels != 4 || out.height != 6 || out.width != 5) {
            return {false, "fusion changed the map shape"};
        }
    }
    if (fuse_max({a, a, a}).data != a.data) return {false, "fuse_max not idempotent"};
    if (fuse_max({a, b, c}).data != fuse_max({c, a, b}).data) {
        return {false, "fuse_max not commutative"};
    }
    if (fuse_sum(a, zero).data != a.data) return {false, "fuse_sum additive identity broken"};
    if (fuse_sum(a, b).data != fuse_sum(b, a).data) return {false, "fuse_sum not commutative"};
    FeatureMap neg = a;
    for (double& v : neg.data) v = -v;
    for (double v : fuse_sum(a, neg).data) {
        if (v != 0.0) return {false, "a + (-a) not exactly zero"};
    }
    if (fuse_edges(fI, zero, zero, zero).map.data != fI.data) {
        return {false, "edge fusion collapse to fI failed"};
    }
    const FeatureMap collapse = fuse_edges(zero, a, b, c).map;
    if (collapse.data != fuse_max({a, b, c}).data) {
        return {false, "edge fusion collapse to max failed"};
    }
    // elementwise definition on explicit values
    FeatureMap e1 = FeatureMap::zeros(1, 1, 1), e2 = e1, e3 = e1, e4 = e1;
    e1.data = {1};
    e2.data = {2};
    e3.data = {5};
    e4.data = {3};
    if (fuse_edges(e1, e2, e3, e4).map.data != std::vector<double>{6}) {
        return {false, "Eq. 1 on scalars: expected max(3,6,4) = 6"};
    }
    return {true, "shape, idempotence, commutativity, identities and collapses exact"};
}

// --------------------------------------------------------------- averaging

Outcome check_averaging() {
    const Arch arch = backbone_arch(1, {8, 16});
    const NetworkParams n = init_params(arch, 99);
    if (!equal_params(average_params({n, n, n}), n)) {
        return {false, "average of three identical nets is not bit-exact"};
    }

    const NetworkParams a = init_params(arch, 1);
    const NetworkParams b = init_params(arch, 2);
    const NetworkParams c = init_params(arch, 3);
    const NetworkParams p = average_params({a, b, c});
    const NetworkParams q = average_params({b, c, a});
    const double alpha = 2.5;
    NetworkParams sa = a, sb = b, sc = c;
    scale_params(sa, alpha);
    scale_params(sb, alpha);
    scale_params(sc, alpha);
    const NetworkParams sp = average_params({sa, sb, sc});
    for (size_t bi = 0; bi < p.blocks.size(); ++bi) {
        for (size_t i = 0; i < p.blocks[bi].weights.size(); ++i) {
            if (std::abs(p.blocks[bi].weights[i] - q.blocks[bi].weights[i]) > 1e-12) {
                return {false, "permutation invariance exceeded 1e-12"};
            }
            if (std::abs(sp.blocks[bi].weights[i] - alpha * p.blocks[bi].weights[i]) > 1e-12) {
                return {false, "scale commutation exceeded 1e-12"};
            }
        }
    }
    return {true, "identical-input averaging bit-exact; permutation/scaling within 1e-12"};
}

// --------------------------------------------------------------- training

Outcome check_training() {
    const std::string dir = scratch_dir() + "/training";
    std::filesystem::remove_all(dir);
    SynthOptions opts;
    opts.count = 210;  // 70 per class
    opts.width = opts.height = 64;
    opts.seed = 20250808;
    synth_dataset(dir, opts);
    const auto entries = load_manifest(dir + "/manifest.txt", opts.classes);

    TrainConfig tcfg;
    tcfg.epochs = 30;
    tcfg.seed = 20250808;

    // CNN_1C with scale fusion against the 90% bar on its own training split
    PipelineConfig scale_cfg;
    scale_cfg.fusion = FusionMode::Scale;
    scale_cfg.head = HeadVariant::Cnn1C;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult scale_run = train_three_way(entries, scale_cfg, tcfg);
    const double train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const EvalReport scale_report =
        evaluate(scale_run.model, prepare_images(entries, scale_cfg));

    // published ordering on intensity-only features: CNN_1C >= CNN_0C, ties
    // permitted; both heads are trained to saturation under the same seed
    PipelineConfig cfg1 = scale_cfg;
    cfg1.fusion = FusionMode::None;
    cfg1.head = HeadVariant::Cnn1C;
    PipelineConfig cfg0 = cfg1;
    cfg0.head = HeadVariant::Cnn0C;
    TrainConfig order_cfg = tcfg;
    order_cfg.epochs = 60;
    const TrainResult run1 = train_three_way(entries, cfg1, order_cfg);
    const TrainResult run0 = train_three_way(entries, cfg0, order_cfg);
    const double acc1 = evaluate(run1.model, prepare_images(entries, cfg1)).accuracy;
    const double acc0 = evaluate(run0.model, prepare_images(entries, cfg0)).accuracy;

    std::ostringstream detail;
    detail << "F_G/CNN_1C accuracy " << scale_report.accuracy << " in " << train_seconds
           << " s; intensity-only CNN_1C " << acc1 << " vs CNN_0C " << acc0;
    const bool pass = scale_report.accuracy >= 0.90 && train_seconds < 600.0 && acc1 >= acc0;
    return {pass, detail.str()};
}

// ------------------------------------------------------------------- depth

Outcome check_depth() {
    // wall 900 mm ahead, spanning far more than 3 beams of the center band
    const LaserScan scan = simulate_scan({Obstacle::wall(900)});
    const GridCalibration calib = GridCalibration::default_calibration();
    const DistanceResult res = map_to_distance(32, 32, 64, 64, calib, scan);
    if (!res.has_return) return {false, "no return mapped for the wall scene"};
    if (std::abs(res.z_mm - 900) > 1) {
        return {false, "wall at 900 mm mapped to " + std::to_string(res.z_mm) + " mm"};
    }

    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        PolarSample s{rng.uniform(20, 5600), rng.uniform(-2.09, 2.09), true};
        const auto [x, y] = polar_to_cartesian(s);
        const double rho = std::sqrt(x * x + y * y);
        const double alpha = std::atan2(y, x);
        if (std::abs(rho - s.rho_mm) / s.rho_mm >= 1e-9 ||
            std::abs(alpha - s.alpha_rad) >= 1e-9) {
            return {false, "polar round trip error above 1e-9"};
        }
    }

    // out-of-range returns must stay invalid with their raw values
    const std::string scan_path = scratch_dir() + "/range.csv";
    std::ofstream(scan_path) << "0.0,19\n0.36,20\n0.72,5600\n1.08,5601\n";
    const LaserScan parsed = parse_scan(scan_path);
    if (parsed.samples[0].valid || parsed.samples[3].valid) {
        return {false, "out-of-range samples marked valid"};
    }
    if (!parsed.samples[1].valid || !parsed.samples[2].valid) {
        return {false, "boundary ranges 20/5600 must be valid"};
    }
    if (parsed.samples[0].rho_mm != 19.0 || parsed.samples[3].rho_mm != 5601.0) {
        return {false, "out-of-range samples were clamped"};
    }
    return {true, "wall mapped to 900 mm; round trip < 1e-9; out-of-range kept invalid"};
}

// ------------------------------------------------------------------ policy

Outcome check_policy() {
    // scripted 60-event stream: 3 classes, distances sweeping through 1000 mm
    std::vector<TimedDetection> stream;
    const char* classes[3] = {"person", "car", "sign"};
    for (int i = 0; i < 60; ++i) {
        TimedDetection td;
        td.t = i * 0.5;
        td.det.class_name = classes[i % 3];
        td.det.cell_row = 1;
        td.det.cell_col = i % 3;
        td.det.score = 0.9;
        if (i % 5 != 4) td.det.distance_mm = 400 + 150 * (i % 13);
        stream.push_back(td);
    }

    Policy once;
    once.mode = Policy::Mode::Once;
    const auto once_out = schedule(once, stream);
    std::map<std::string, std::vector<double>> per_class_t;
    for (const auto& a : once_out) {
        per_class_t[a.text.substr(0, a.text.find(' '))].push_back(a.t);
    }
    // presence never lapses for 10 s in this stream, so exactly one per class
    if (once_out.size() != 3) {
        return {false, "once policy produced " + std::to_string(once_out.size()) +
                           " announcements, expected 3"};
    }

    Policy close;
    close.mode = Policy::Mode::TooClose;
    close.tooclose_mm = 1000;
    const auto close_out = schedule(close, stream);
    std::map<std::string, double> last_t;
    for (const auto& a : close_out) {
        if (!a.urgent) return {false, "tooclose announcement not urgent"};
        // find the source detection and verify its distance
        bool found = false;
        for (const auto& td : stream) {
            if (td.t == a.t && a.text.rfind(td.det.class_name, 0) == 0) {
                if (!td.det.distance_mm || *td.det.distance_mm >= close.tooclose_mm) {
                    return {false, "tooclose announced a detection at/beyond the threshold"};
                }
                found = true;
            }
        }
        if (!found) return {false, "tooclose announcement without a source detection"};
        const std::string cls = a.text.substr(0, a.text.find(' '));
        if (last_t.count(cls) && a.t - last_t[cls] < 1.0) {
            return {false, "tooclose rate limit violated"};
        }
        last_t[cls] = a.t;
    }
    if (close_out.empty()) return {false, "tooclose never fired on sub-threshold events"};

    Policy interval;
    interval.mode = Policy::Mode::FixedInterval;
    interval.period_s = 5.0;
    const auto int_out = schedule(interval, stream);
    std::map<std::string, double> prev;
    for (const auto& a : int_out) {
        const std::string cls = a.text.substr(0, a.text.find(' '));
        if (prev.count(cls) && a.t - prev[cls] < interval.period_s) {
            return {false, "fixed-interval spacing below the period"};
        }
        prev[cls] = a.t;
    }
    if (int_out.size() < 6) return {false, "fixed interval fired implausibly rarely"};

    std::ostringstream detail;
    detail << "once " << once_out.size() << ", tooclose " << close_out.size()
           << ", interval " << int_out.size() << " announcements, all invariants exact";
    return {true, detail.str()};
}

// ------------------------------------------------------------- diagnostics

Outcome check_diagnostics() {
    const std::string dir = scratch_dir() + "/diag";
    std::filesystem::remove_all(dir);
    SynthOptions opts;
    opts.count = 9;
    opts.width = opts.height = 32;
    opts.seed = 3;
    synth_dataset(dir, opts);

    const std::string model = dir + "/model.bin";
    const std::string grad_csv = dir + "/gradstats.csv";
    const int rc = cli_main({"train", "--manifest", dir + "/manifest.txt", "--out", model,
                             "--grad-stats", grad_csv, "--epochs", "2", "--fusion", "none",
                             "--head", "cnn0c", "--seed", "3"});
    if (rc != 0) return {false, "training run failed with exit code " + std::to_string(rc)};
    std::ifstream in(grad_csv);
    if (!in) return {false, "grad stats CSV was not produced"};
    std::string line;
    std::getline(in, line);
    if (line != "part,epoch,layer,grad_mean_norm,grad_std_norm") {
        return {false, "unexpected grad stats header"};
    }
    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::string part, epoch, layer, meann, stdn;
        std::getline(ls, part, ',');
        std::getline(ls, epoch, ',');
        std::getline(ls, layer, ',');
        std::getline(ls, meann, ',');
        std::getline(ls, stdn, ',');
        const double m = std::stod(meann), s = std::stod(stdn);
        if (!std::isfinite(m) || !std::isfinite(s)) {
            return {false, "non-finite value in grad stats row " + line};
        }
        rows++;
    }
    if (rows == 0) return {false, "grad stats CSV has no rows"};

    // a layer whose gradients vanish reports exact zeros
    GradStats stats;
    stats.begin_epoch(0, 0);
    stats.record("dead", {0.0, 0.0, 0.0});
    stats.record("dead", {0.0, 0.0, 0.0});
    const std::vector<double> w = {0.5, -1.0, 2.0};
    stats.end_epoch({{"dead", &w}});
    if (stats.rows()[0].mean_norm != 0.0 || stats.rows()[0].std_norm != 0.0) {
        return {false, "zero gradients did not report exact zeros"};
    }
    return {true, std::to_string(rows) + " finite rows; zero-gradient layer reports exact zeros"};
}

using CheckFn = std::function<Outcome()>;

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, CheckFn>> checks = {
        {"labeling", check_labeling},   {"iou", check_iou},
        {"gradients", check_gradients}, {"fusion", check_fusion},
        {"averaging", check_averaging}, {"training", check_training},
        {"depth", check_depth},         {"policy", check_policy},
        {"diagnostics", check_diagnostics},
    };

    std::string filter;
    if (argc > 1) filter = argv[1];
    bool matched = false;
    bool all_pass = true;
    for (const auto& [name, fn] : checks) {
        if (!filter.empty() && name != filter) continue;
        matched = true;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = fn();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %-11s %s (%.1f s)\n", outcome.pass ? "PASS" : "FAIL", name.c_str(),
                    outcome.detail.c_str(), secs);
        std::fflush(stdout);
        all_pass = all_pass && outcome.pass;
    }
    if (!matched) {
        std::fprintf(stderr, "unknown check '%s'\n", filter.c_str());
        return 2;
    }
    return all_pass ? 0 : 1;
}
