#include "percept/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "percept/error.hpp"
#include "percept/image.hpp"
#include "percept/rng.hpp"
#include "percept/rpn.hpp"

namespace percept {

namespace {

struct Placed {
    BBox box;
    int class_idx;
};

// Shapes are drawn into the GT box; the triangle is isoceles, apex up.
void draw_shape(Image& img, int shape, const BBox& box, double level) {
    const int x1 = static_cast<int>(box.x1), y1 = static_cast<int>(box.y1);
    const int x2 = static_cast<int>(box.x2), y2 = static_cast<int>(box.y2);
    const double cx = box.cx(), cy = box.cy();
    const double rx = box.width() / 2.0, ry = box.height() / 2.0;
    for (int y = y1; y < y2; ++y) {
        for (int x = x1; x < x2; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            bool inside = false;
            switch (shape) {
                case 0: {  // disc
                    const double dx = (px - cx) / rx, dy = (py - cy) / ry;
                    inside = dx * dx + dy * dy <= 1.0;
                    break;
                }
                case 1:  // rectangle
                    inside = true;
                    break;
                default: {  // triangle
                    const double fy = (py - box.y1) / (box.y2 - box.y1);  // 0 apex, 1 base
                    inside = std::abs(px - cx) <= fy * rx;
                    break;
                }
            }
            if (inside) img.at(y, x) = level;
        }
    }
}

}  // namespace

SynthResult synth_dataset(const std::string& out_dir, const SynthOptions& opts) {
    const int n_classes = static_cast<int>(opts.classes.size());
    if (n_classes < 1) throw std::invalid_argument("synth_dataset: need at least one class");
    if (opts.count < 3 * n_classes) {
        throw std::invalid_argument("synth_dataset: need at least 3 images per class");
    }
    if (opts.width < 32 || opts.height < 32) {
        throw std::invalid_argument("synth_dataset: images must be at least 32x32");
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const std::string manifest_path = out_dir + "/manifest.txt";
    std::ofstream manifest(manifest_path);
    if (!manifest) throw DataError(out_dir + ": directory is not writable");

    Rng rng(opts.seed);
    SynthResult result;
    result.manifest_path = manifest_path;
    for (int i = 0; i < opts.count; ++i) {
        const int class_idx = i % n_classes;
        Image img = Image::zeros(opts.height, opts.width, 1);
        const double bg = rng.uniform(0.05, 0.20);
        for (double& v : img.data) v = bg + rng.uniform(0.0, 0.05);

        std::vector<Placed> placed;
        for (int obj = 0; obj < opts.objects_per_image; ++obj) {
            const int cls = obj == 0 ? class_idx : rng.uniform_int(0, n_classes - 1);
            for (int attempt = 0; attempt < 40; ++attempt) {
                const int w = rng.uniform_int(18, std::min(44, opts.width - 6));
                const int h = rng.uniform_int(18, std::min(44, opts.height - 6));
                const int x1 = rng.uniform_int(2, opts.width - w - 2);
                const int y1 = rng.uniform_int(2, opts.height - h - 2);
                BBox box{static_cast<double>(x1), static_cast<double>(y1),
                         static_cast<double>(x1 + w), static_cast<double>(y1 + h)};
                bool overlaps = false;
                for (const auto& p : placed) {
                    if (iou(box, p.box) > 0.05) {
                        overlaps = true;
                        break;
                    }
                }
                if (overlaps) continue;
                draw_shape(img, cls % 3, box, rng.uniform(0.65, 0.95));
                placed.push_back({box, cls});
                break;
            }
        }

        char name[32];
        std::snprintf(name, sizeof(name), "img_%05d.pgm", i);
        save_pgm(img, out_dir + "/" + name);
        for (const auto& p : placed) {
            manifest << name << " " << opts.classes[p.class_idx] << " "
                     << static_cast<int>(p.box.x1) << " " << static_cast<int>(p.box.y1) << " "
                     << static_cast<int>(p.box.x2) << " " << static_cast<int>(p.box.y2) << "\n";
            result.objects_placed++;
        }
        result.images_written++;
    }
    if (!manifest) throw DataError(manifest_path + ": write failed");
    return result;
}

}  // namespace percept
