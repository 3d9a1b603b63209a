#pragma once

#include <optional>
#include <string>

#include "percept/rpn.hpp"

namespace percept {

// End product of the pipeline: a classified box with grid cell and range.
// distance_mm is empty when no scan was supplied or the band had no return.
struct Detection {
    std::string image;
    std::string class_name;
    double score = 0.0;
    BBox box;
    int cell_row = 0, cell_col = 0;
    std::optional<int> distance_mm;
};

}  // namespace percept
