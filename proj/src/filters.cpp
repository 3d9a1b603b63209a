#include "percept/filters.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace percept {

namespace {

void require_gray(const Image& img, const char* op) {
    if (img.channels != 1) {
        throw std::invalid_argument(std::string(op) + ": expected a 1-channel image");
    }
}

Kernel make_kernel(int k, std::initializer_list<double> w) {
    Kernel kern;
    kern.size = k;
    kern.weights.assign(w);
    return kern;
}

// Replicate-border convolution used by the gradient masks. Zero padding would
// manufacture edges along the image frame.
Image convolve_replicate(const Image& img, const Kernel& kern) {
    const int r = (kern.size - 1) / 2;
    Image out = Image::zeros(img.height, img.width, 1);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kern.size; ++i) {
                for (int j = 0; j < kern.size; ++j) {
                    int sy = std::clamp(y + i - r, 0, img.height - 1);
                    int sx = std::clamp(x + j - r, 0, img.width - 1);
                    acc += img.at(sy, sx) * kern.at(i, j);
                }
            }
            out.at(y, x) = acc;
        }
    }
    return out;
}

Image gradient_magnitude(const Image& img, const Kernel& kx, const Kernel& ky,
                         Image* angle_out = nullptr) {
    Image gx = convolve_replicate(img, kx);
    Image gy = convolve_replicate(img, ky);
    Image mag = Image::zeros(img.height, img.width, 1);
    if (angle_out) *angle_out = Image::zeros(img.height, img.width, 1);
    for (size_t i = 0; i < mag.data.size(); ++i) {
        mag.data[i] = std::hypot(gx.data[i], gy.data[i]);
        if (angle_out) angle_out->data[i] = std::atan2(gy.data[i], gx.data[i]);
    }
    return mag;
}

void rescale_by_max(Image& img) {
    double mx = 0.0;
    for (double v : img.data) mx = std::max(mx, v);
    if (mx > 1e-12) {
        for (double& v : img.data) v /= mx;
    } else {
        // magnitudes at float-noise scale are not edges
        for (double& v : img.data) v = 0.0;
    }
}

Image canny(const Image& img, const CannyParams& p) {
    Image smooth = gaussian_scale(img, p.sigma * p.sigma);
    Image angle;
    Image mag = gradient_magnitude(smooth, Kernel::sobel_x(), Kernel::sobel_y(), &angle);

    double max_mag = 0.0;
    for (double v : mag.data) max_mag = std::max(max_mag, v);
    Image out = Image::zeros(img.height, img.width, 1);
    // floor guards against float noise on numerically constant images
    if (max_mag <= 1e-12) return out;

    // non-maximum suppression along one of 4 quantized gradient directions
    const int h = img.height, w = img.width;
    Image thin = Image::zeros(h, w, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double m = mag.at(y, x);
            if (m <= 0.0) continue;
            double a = angle.at(y, x) * 180.0 / M_PI;
            if (a < 0) a += 180.0;
            int dy1, dx1;
            if (a < 22.5 || a >= 157.5) {
                dy1 = 0; dx1 = 1;         // horizontal gradient
            } else if (a < 67.5) {
                dy1 = 1; dx1 = 1;         // diagonal
            } else if (a < 112.5) {
                dy1 = 1; dx1 = 0;         // vertical gradient
            } else {
                dy1 = 1; dx1 = -1;        // anti-diagonal
            }
            auto neighbor = [&](int dy, int dx) {
                int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) return 0.0;
                return mag.at(ny, nx);
            };
            if (m >= neighbor(dy1, dx1) && m >= neighbor(-dy1, -dx1)) {
                thin.at(y, x) = m;
            }
        }
    }

    const double low = p.low_ratio * max_mag;
    const double high = p.high_ratio * max_mag;
    std::deque<std::pair<int, int>> frontier;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (thin.at(y, x) >= high) {
                out.at(y, x) = 1.0;
                frontier.emplace_back(y, x);
            }
        }
    }
    // hysteresis: grow strong edges through weak pixels, 8-connected
    while (!frontier.empty()) {
        auto [y, x] = frontier.front();
        frontier.pop_front();
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                if (out.at(ny, nx) == 0.0 && thin.at(ny, nx) >= low) {
                    out.at(ny, nx) = 1.0;
                    frontier.emplace_back(ny, nx);
                }
            }
        }
    }
    return out;
}

}  // namespace

Kernel Kernel::identity(int k) {
    Kernel kern;
    kern.size = k;
    kern.weights.assign(static_cast<size_t>(k) * k, 0.0);
    kern.at((k - 1) / 2, (k - 1) / 2) = 1.0;
    return kern;
}

Kernel Kernel::ones(int k) {
    Kernel kern;
    kern.size = k;
    kern.weights.assign(static_cast<size_t>(k) * k, 1.0);
    return kern;
}

Kernel Kernel::sobel_x() {
    return make_kernel(3, {-1, 0, 1, -2, 0, 2, -1, 0, 1});
}
Kernel Kernel::sobel_y() {
    return make_kernel(3, {-1, -2, -1, 0, 0, 0, 1, 2, 1});
}
Kernel Kernel::prewitt_x() {
    return make_kernel(3, {-1, 0, 1, -1, 0, 1, -1, 0, 1});
}
Kernel Kernel::prewitt_y() {
    return make_kernel(3, {-1, -1, -1, 0, 0, 0, 1, 1, 1});
}

EdgeMethod edge_method_from_name(const std::string& name) {
    if (name == "canny") return EdgeMethod::Canny;
    if (name == "sobel") return EdgeMethod::Sobel;
    if (name == "prewitt") return EdgeMethod::Prewitt;
    throw std::invalid_argument("unknown edge method '" + name + "'");
}

std::string edge_method_name(EdgeMethod m) {
    switch (m) {
        case EdgeMethod::Canny: return "canny";
        case EdgeMethod::Sobel: return "sobel";
        case EdgeMethod::Prewitt: return "prewitt";
    }
    return "?";
}

Image convolve2d(const Image& img, const Kernel& kern) {
    require_gray(img, "convolve2d");
    if (kern.size < 1 || kern.size % 2 == 0) {
        throw std::invalid_argument("convolve2d: kernel size must be odd");
    }
    const int r = (kern.size - 1) / 2;
    Image out = Image::zeros(img.height, img.width, 1);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kern.size; ++i) {
                int sy = y + i - r;
                if (sy < 0 || sy >= img.height) continue;
                for (int j = 0; j < kern.size; ++j) {
                    int sx = x + j - r;
                    if (sx < 0 || sx >= img.width) continue;
                    acc += img.at(sy, sx) * kern.at(i, j);
                }
            }
            out.at(y, x) = acc;
        }
    }
    return out;
}

Image edge_detect(const Image& img, EdgeMethod method, const CannyParams& params) {
    const Image gray = to_grayscale(img);
    switch (method) {
        case EdgeMethod::Sobel: {
            Image mag = gradient_magnitude(gray, Kernel::sobel_x(), Kernel::sobel_y());
            rescale_by_max(mag);
            return mag;
        }
        case EdgeMethod::Prewitt: {
            Image mag = gradient_magnitude(gray, Kernel::prewitt_x(), Kernel::prewitt_y());
            rescale_by_max(mag);
            return mag;
        }
        case EdgeMethod::Canny:
            return canny(gray, params);
    }
    throw std::invalid_argument("edge_detect: bad method");
}

Kernel gaussian_kernel(double t) {
    if (!(t > 0.0)) throw std::invalid_argument("gaussian_kernel: t must be > 0");
    const double sigma = std::sqrt(t);
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    Kernel kern;
    kern.size = 2 * r + 1;
    kern.weights.resize(static_cast<size_t>(kern.size) * kern.size);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        for (int j = -r; j <= r; ++j) {
            double w = std::exp(-(i * i + j * j) / (2.0 * t));
            kern.at(i + r, j + r) = w;
            sum += w;
        }
    }
    for (double& w : kern.weights) w /= sum;
    return kern;
}

Image gaussian_scale(const Image& img, double t) {
    require_gray(img, "gaussian_scale");
    const Kernel kern = gaussian_kernel(t);
    const int r = (kern.size - 1) / 2;
    Image out = Image::zeros(img.height, img.width, 1);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0, wsum = 0.0;
            for (int i = 0; i < kern.size; ++i) {
                int sy = y + i - r;
                if (sy < 0 || sy >= img.height) continue;
                for (int j = 0; j < kern.size; ++j) {
                    int sx = x + j - r;
                    if (sx < 0 || sx >= img.width) continue;
                    acc += img.at(sy, sx) * kern.at(i, j);
                    wsum += kern.at(i, j);
                }
            }
            out.at(y, x) = wsum > 0.0 ? acc / wsum : 0.0;
        }
    }
    return out;
}

}  // namespace percept
