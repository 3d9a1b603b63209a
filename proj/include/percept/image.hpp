#pragma once

#include <string>
#include <vector>

namespace percept {

// Row-major, interleaved image with values in [0,1].
// channels is 1 (gray) or 3 (RGB); index (y * width + x) * channels + c.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<double> data;

    static Image zeros(int h, int w, int ch = 1) {
        Image img;
        img.height = h;
        img.width = w;
        img.channels = ch;
        img.data.assign(static_cast<size_t>(h) * w * ch, 0.0);
        return img;
    }

    double& at(int y, int x, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
};

// Reads a binary PGM (P5) or PPM (P6) file with maxval 255.
// Throws MissingFileError, MalformedHeaderError or TruncatedPayloadError.
Image load_image(const std::string& path);

// Writes a 1-channel image as binary PGM, clamping values to [0,1].
void save_pgm(const Image& img, const std::string& path);

// Luminance conversion 0.299 R + 0.587 G + 0.114 B; gray input is returned as is.
Image to_grayscale(const Image& img);

}  // namespace percept
