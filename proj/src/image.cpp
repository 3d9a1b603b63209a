#include "percept/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "percept/error.hpp"
#include "percept/feature_map.hpp"

namespace percept {

namespace {

// Reads the next header token, skipping whitespace and '#' comment lines.
bool next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF) return false;
    while (c != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    // leave the terminator in the stream; the caller owns the single
    // whitespace byte that separates header and payload
    if (c != EOF) in.unget();
    return true;
}

int parse_header_int(std::istream& in, const std::string& path, const char* what) {
    std::string tok;
    if (!next_token(in, tok)) {
        throw MalformedHeaderError(path + ": header ends before " + what);
    }
    try {
        size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw MalformedHeaderError(path + ": bad " + what + " '" + tok + "'");
    }
}

}  // namespace

Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError(path + ": cannot open file");

    std::string magic;
    if (!next_token(in, magic) || (magic != "P5" && magic != "P6")) {
        throw MalformedHeaderError(path + ": not a binary PGM/PPM (magic '" + magic + "')");
    }
    const int channels = magic == "P5" ? 1 : 3;

    const int width = parse_header_int(in, path, "width");
    const int height = parse_header_int(in, path, "height");
    const int maxval = parse_header_int(in, path, "maxval");
    if (width < 1 || height < 1) {
        throw MalformedHeaderError(path + ": non-positive dimensions");
    }
    if (maxval != 255) {
        throw MalformedHeaderError(path + ": unsupported maxval " + std::to_string(maxval));
    }
    // exactly one whitespace byte separates the header from the payload
    int sep = in.get();
    if (sep == EOF || !std::isspace(sep)) {
        throw MalformedHeaderError(path + ": missing header/payload separator");
    }

    const size_t expected = static_cast<size_t>(width) * height * channels;
    std::vector<unsigned char> bytes(expected);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(expected));
    if (static_cast<size_t>(in.gcount()) != expected) {
        throw TruncatedPayloadError(path + ": expected " + std::to_string(expected) +
                                    " payload bytes, got " + std::to_string(in.gcount()));
    }

    Image img;
    img.height = height;
    img.width = width;
    img.channels = channels;
    img.data.resize(expected);
    for (size_t i = 0; i < expected; ++i) img.data[i] = bytes[i] / 255.0;
    return img;
}

void save_pgm(const Image& img, const std::string& path) {
    if (img.channels != 1) throw std::invalid_argument("save_pgm: image must be 1-channel");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> bytes(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        double v = std::clamp(img.data[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError(path + ": write failed");
}

Image to_grayscale(const Image& img) {
    if (img.channels == 1) return img;
    if (img.channels != 3) {
        throw std::invalid_argument("to_grayscale: expected 1 or 3 channels");
    }
    Image gray = Image::zeros(img.height, img.width, 1);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            gray.at(y, x) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                            0.114 * img.at(y, x, 2);
        }
    }
    return gray;
}

FeatureMap image_to_feature_map(const Image& img) {
    FeatureMap m = FeatureMap::zeros(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                m.at(c, y, x) = img.at(y, x, c);
            }
        }
    }
    return m;
}

}  // namespace percept
