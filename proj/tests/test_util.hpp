#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "percept/image.hpp"
#include "percept/rng.hpp"

namespace testutil {

// Per-process scratch directory under the ctest working directory.
inline std::string test_dir() {
    static const std::string dir = [] {
        std::string d = "percept_test_tmp";
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

inline std::string write_file(const std::string& name, const std::string& bytes) {
    const std::string path = test_dir() + "/" + name;
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return path;
}

inline percept::Image random_image(int h, int w, uint64_t seed) {
    percept::Rng rng(seed);
    percept::Image img = percept::Image::zeros(h, w, 1);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

}  // namespace testutil
