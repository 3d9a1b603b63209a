#include "percept/optical_flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace percept {

namespace {

inline double pix(const Image& img, int y, int x) {
    y = std::clamp(y, 0, img.height - 1);
    x = std::clamp(x, 0, img.width - 1);
    return img.at(y, x);
}

inline double avg(const std::vector<double>& f, int w, int h, int y, int x) {
    auto p = [&](int yy, int xx) {
        yy = std::clamp(yy, 0, h - 1);
        xx = std::clamp(xx, 0, w - 1);
        return f[static_cast<size_t>(yy) * w + xx];
    };
    return (p(y, x - 1) + p(y, x + 1) + p(y - 1, x) + p(y + 1, x)) / 6.0 +
           (p(y - 1, x - 1) + p(y - 1, x + 1) + p(y + 1, x - 1) + p(y + 1, x + 1)) / 12.0;
}

}  // namespace

FlowField optical_flow(const Image& prev, const Image& next, const HornSchunckParams& params) {
    if (prev.channels != 1 || next.channels != 1) {
        throw std::invalid_argument("optical_flow: inputs must be grayscale");
    }
    if (prev.height != next.height || prev.width != next.width) {
        throw std::invalid_argument("optical_flow: frame dimensions differ");
    }
    const int h = prev.height, w = prev.width;
    const size_t n = static_cast<size_t>(h) * w;

    // Horn-Schunck derivative estimates averaged over the 2x2x2 cube
    std::vector<double> ex(n), ey(n), et(n);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            size_t i = static_cast<size_t>(y) * w + x;
            ex[i] = 0.25 * (pix(prev, y, x + 1) - pix(prev, y, x) +
                            pix(prev, y + 1, x + 1) - pix(prev, y + 1, x) +
                            pix(next, y, x + 1) - pix(next, y, x) +
                            pix(next, y + 1, x + 1) - pix(next, y + 1, x));
            ey[i] = 0.25 * (pix(prev, y + 1, x) - pix(prev, y, x) +
                            pix(prev, y + 1, x + 1) - pix(prev, y, x + 1) +
                            pix(next, y + 1, x) - pix(next, y, x) +
                            pix(next, y + 1, x + 1) - pix(next, y, x + 1));
            et[i] = 0.25 * (pix(next, y, x) - pix(prev, y, x) +
                            pix(next, y, x + 1) - pix(prev, y, x + 1) +
                            pix(next, y + 1, x) - pix(prev, y + 1, x) +
                            pix(next, y + 1, x + 1) - pix(prev, y + 1, x + 1));
        }
    }

    FlowField flow = FlowField::zeros(h, w);
    std::vector<double> nu(n), nv(n);
    for (int it = 0; it < params.iters; ++it) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                size_t i = static_cast<size_t>(y) * w + x;
                double ubar = avg(flow.u, w, h, y, x);
                double vbar = avg(flow.v, w, h, y, x);
                double t = (ex[i] * ubar + ey[i] * vbar + et[i]) /
                           (params.alpha2 + ex[i] * ex[i] + ey[i] * ey[i]);
                nu[i] = ubar - ex[i] * t;
                nv[i] = vbar - ey[i] * t;
            }
        }
        flow.u.swap(nu);
        flow.v.swap(nv);
    }
    return flow;
}

Image flow_orientation(const FlowField& flow) {
    Image out = Image::zeros(flow.height, flow.width, 1);
    const size_t n = flow.u.size();
    for (size_t i = 0; i < n; ++i) {
        if (flow.u[i] == 0.0 && flow.v[i] == 0.0) continue;
        double val = (std::atan2(flow.v[i], flow.u[i]) + M_PI) / (2.0 * M_PI);
        if (val >= 1.0) val = 0.0;  // angle pi wraps onto -pi
        out.data[i] = val;
    }
    return out;
}

Image shift_image(const Image& img, int dy, int dx) {
    Image out = Image::zeros(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            int sy = std::clamp(y - dy, 0, img.height - 1);
            int sx = std::clamp(x - dx, 0, img.width - 1);
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = img.at(sy, sx, c);
            }
        }
    }
    return out;
}

}  // namespace percept
