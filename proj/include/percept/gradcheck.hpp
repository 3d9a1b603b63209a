#pragma once

#include <cstdint>

#include "percept/fusion.hpp"
#include "percept/heads.hpp"

namespace percept {

struct GradCheckResult {
    int coords_checked = 0;
    double max_rel_err = 0.0;
};

// Verifies the composed backbone -> fusion -> ROI pool -> head gradient
// against central finite differences on randomly chosen parameter
// coordinates of a small pipeline. The loss is the cross-entropy of the head
// output for a fixed ROI and label. Relative error uses an absolute floor so
// legitimately zero gradients compare equal.
GradCheckResult gradcheck_composed(FusionMode mode, HeadVariant head, int coords, uint64_t seed,
                                   double eps = 1e-4);

}  // namespace percept
