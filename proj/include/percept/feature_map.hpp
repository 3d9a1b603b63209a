#pragma once

#include <vector>

#include "percept/image.hpp"

namespace percept {

// Channel-major C x H x W tensor; index (c * height + y) * width + x.
// The unit every filter column, fusion and pooled region produces/consumes.
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    static FeatureMap zeros(int c, int h, int w) {
        FeatureMap m;
        m.channels = c;
        m.height = h;
        m.width = w;
        m.data.assign(static_cast<size_t>(c) * h * w, 0.0);
        return m;
    }

    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }

    bool same_shape(const FeatureMap& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
    size_t size() const { return data.size(); }
};

// Interleaved image -> planar feature map with the same channel count.
FeatureMap image_to_feature_map(const Image& img);

}  // namespace percept
