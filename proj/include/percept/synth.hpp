#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace percept {

// Desk-scale dataset of gray geometric shapes standing in for street objects:
// disc = person, rectangle = car, triangle = sign. One manifest line per
// placed object: `image_path label x1 y1 x2 y2`.
struct SynthOptions {
    int count = 60;  // total images, classes round-robin
    int width = 64, height = 64;
    int objects_per_image = 1;
    std::vector<std::string> classes = {"person", "car", "sign"};
    uint64_t seed = 1;
};

struct SynthResult {
    std::string manifest_path;
    int images_written = 0;
    int objects_placed = 0;
};

// Writes `img_NNNNN.pgm` files plus `manifest.txt` under out_dir.
// Byte-identical output for a given seed. Requires >= 3 images per class.
SynthResult synth_dataset(const std::string& out_dir, const SynthOptions& opts);

}  // namespace percept
