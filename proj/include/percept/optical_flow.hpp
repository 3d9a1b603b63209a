#pragma once

#include <vector>

#include "percept/image.hpp"

namespace percept {

// Dense per-pixel displacement, pixels/frame. u is horizontal, v vertical.
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<double> u;
    std::vector<double> v;

    static FlowField zeros(int h, int w) {
        FlowField f;
        f.height = h;
        f.width = w;
        f.u.assign(static_cast<size_t>(h) * w, 0.0);
        f.v.assign(static_cast<size_t>(h) * w, 0.0);
        return f;
    }
};

struct HornSchunckParams {
    double alpha2 = 100.0;  // regularization weight
    int iters = 100;        // Jacobi iterations
};

// Classic Horn-Schunck estimate of the flow from prev to next.
// Inputs must be gray and of equal size.
FlowField optical_flow(const Image& prev, const Image& next,
                       const HornSchunckParams& params = {});

// atan2(v, u) mapped linearly from (-pi, pi] onto [0, 1); zero-flow pixels map to 0.
Image flow_orientation(const FlowField& flow);

// Shifts image content by (dy, dx) pixels, replicating the edge rows/columns
// left vacant. Used to synthesize a second frame for still images.
Image shift_image(const Image& img, int dy, int dx);

}  // namespace percept
