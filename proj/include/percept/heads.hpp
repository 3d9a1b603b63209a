#pragma once

#include <string>
#include <vector>

#include "percept/net.hpp"

namespace percept {

// The two classifier heads applied to ROI-pooled features:
// Cnn0C is three fully connected layers; Cnn1C prepends one conv layer.
enum class HeadVariant { Cnn0C, Cnn1C };

HeadVariant head_variant_from_name(const std::string& name);
std::string head_variant_name(HeadVariant v);

// FC stack is fc1 -> fc2 -> (classes + 1 background) on the flattened
// pooled map; the Cnn1C conv is 3x3, channel-preserving.
Arch head_arch(HeadVariant variant, int in_channels, int pooled_h, int pooled_w,
               int class_count_with_bg, int fc1 = 128, int fc2 = 64);

// Class probabilities over C+1 classes (background last); sums to 1.
std::vector<double> head_forward(const NetworkParams& head, const FeatureMap& pooled,
                                 ForwardCache* cache = nullptr);

}  // namespace percept
