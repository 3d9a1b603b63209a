#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "percept/feature_map.hpp"

namespace percept {

enum class FusionMode { None, Edges, Flow, Scale };

FusionMode fusion_mode_from_name(const std::string& name);
std::string fusion_mode_name(FusionMode m);

// Number of column maps each mode consumes (intensity included).
size_t fusion_input_count(FusionMode m);

// Feature map plus the provenance of the fusion that produced it.
struct FusedMap {
    FeatureMap map;
    FusionMode tag = FusionMode::None;
};

// Elementwise a + b; dimensions must match.
FeatureMap fuse_sum(const FeatureMap& a, const FeatureMap& b);

// Elementwise maximum over a non-empty list of equally sized maps.
FeatureMap fuse_max(const std::vector<FeatureMap>& maps);

// F_E = max(fI+fEc, fI+fEs, fI+fEp), elementwise.
FusedMap fuse_edges(const FeatureMap& fI, const FeatureMap& fEc, const FeatureMap& fEs,
                    const FeatureMap& fEp);

// F_O = fI + fO.
FusedMap fuse_flow(const FeatureMap& fI, const FeatureMap& fO);

// F_G = max(fI, fG3, fG5), elementwise.
FusedMap fuse_scale(const FeatureMap& fI, const FeatureMap& fG3, const FeatureMap& fG5);

// Differentiable forward over the column maps in canonical order
// (None: [I]; Edges: [I,Ec,Es,Ep]; Flow: [I,O]; Scale: [I,G3,G5]).
struct FusionCache {
    FusionMode mode = FusionMode::None;
    int n_inputs = 1;
    std::vector<uint8_t> argmax;  // winning branch/input per element, max fusions only
};

FeatureMap fuse_forward(FusionMode mode, const std::vector<FeatureMap>& inputs,
                        FusionCache* cache = nullptr);

// Subgradients: sum passes through, max routes to the argmax
// (lowest index on ties).
std::vector<FeatureMap> fuse_backward(const FusionCache& cache, const FeatureMap& upstream,
                                      int height, int width, int channels);

}  // namespace percept
