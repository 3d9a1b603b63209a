#pragma once

#include <string>
#include <vector>

#include "percept/image.hpp"

namespace percept {

// Square odd-sized convolution mask.
struct Kernel {
    int size = 0;
    std::vector<double> weights;  // size * size, row-major

    double& at(int i, int j) { return weights[static_cast<size_t>(i) * size + j]; }
    double at(int i, int j) const { return weights[static_cast<size_t>(i) * size + j]; }

    static Kernel identity(int k);
    static Kernel ones(int k);
    static Kernel sobel_x();
    static Kernel sobel_y();
    static Kernel prewitt_x();
    static Kernel prewitt_y();
};

enum class EdgeMethod { Canny, Sobel, Prewitt };

// Throws std::invalid_argument for anything but "canny"/"sobel"/"prewitt".
EdgeMethod edge_method_from_name(const std::string& name);
std::string edge_method_name(EdgeMethod m);

struct CannyParams {
    double sigma = 1.0;
    double low_ratio = 0.1;   // hysteresis thresholds as fractions of the
    double high_ratio = 0.2;  // maximum gradient magnitude
};

// Plain 2-D correlation-style convolution with zero padding; output has the
// input's spatial size. 1-channel images only; even kernels are rejected.
Image convolve2d(const Image& img, const Kernel& kern);

// Sobel/Prewitt: gradient magnitude rescaled to [0,1] by the maximum (an
// all-zero map stays zero). Canny: binary {0,1} map after Gaussian smoothing,
// 4-direction non-maximum suppression and 8-connected hysteresis.
// The gradient masks use replicate borders so a constant image maps to zero.
Image edge_detect(const Image& img, EdgeMethod method, const CannyParams& params = {});

// Normalized 2-D Gaussian of variance t (sigma = sqrt(t)), radius ceil(3 sigma),
// weights renormalized to sum to 1 after truncation. Exposed so tests can read
// the impulse response directly.
Kernel gaussian_kernel(double t);

// Gaussian blur at scale t. Border pixels renormalize over the in-bounds taps,
// so a constant image is reproduced exactly.
Image gaussian_scale(const Image& img, double t);

}  // namespace percept
